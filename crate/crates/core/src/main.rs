//! Command-line front end.
//!
//! Exit codes: 0 success, 1 input error, 2 when a run finished but produced
//! only uncertified rows (truncation or quadrature budgets were exhausted).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use samplingops::harness::{self, SweepConfig};
use samplingops::kernels::{check_chi_assumptions, Kernel};
use samplingops::operators::SamplingGrid;
use samplingops::orlicz::{self, PhiFunction};
use samplingops::quadrature::{IntegrationDomain, QuadratureConfig};
use samplingops::signals;

#[derive(Parser)]
#[command(
    name = "samplingops",
    about = "Sampling and convolution operator experiments with Orlicz-space error metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel assumption checks
    Kernels {
        #[command(subcommand)]
        command: KernelsCmd,
    },
    /// Convergence sweeps
    Approx {
        #[command(subcommand)]
        command: ApproxCmd,
    },
    /// Reproduce a reference figure as CSV
    Figure {
        /// fig1, fig2, fig3 or fig4
        id: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Orlicz-space utilities
    Orlicz {
        #[command(subcommand)]
        command: OrliczCmd,
    },
}

#[derive(Subcommand)]
enum KernelsCmd {
    /// Probe the kernel-side assumptions on a sampling grid
    Check {
        #[arg(long)]
        kernel: String,
        /// regular | irregular:perturbed | jitter:<eta>
        #[arg(long, default_value = "regular")]
        grid: String,
        #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
        w: Vec<f64>,
    },
}

#[derive(Subcommand)]
enum ApproxCmd {
    /// Run a w-sweep and emit per-w CSVs
    Run(RunArgs),
}

#[derive(Args, Default)]
struct RunArgs {
    /// t1..t7
    #[arg(long)]
    operator: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    /// Auxiliary kernel for t3
    #[arg(long)]
    psi: Option<String>,
    #[arg(long)]
    signal: Option<String>,
    #[arg(long, value_delimiter = ',')]
    w: Vec<f64>,
    /// Evaluation grid lo,hi,step
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Sampling grid spec (regular | irregular:perturbed | jitter:<eta>)
    #[arg(long, default_value = "regular")]
    sampling_grid: String,
    #[arg(long)]
    phi: Option<String>,
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat key=value file supplying any of the above (flags win)
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum OrliczCmd {
    /// Luxemburg norm of a catalog signal
    Norm {
        #[arg(long)]
        signal: String,
        #[arg(long)]
        phi: String,
    },
    /// Delta-2 classification of a phi-function
    Delta2 {
        #[arg(long)]
        phi: String,
    },
}

fn main() -> ExitCode {
    // clap's default error exit code is 2, which this tool reserves for
    // uncertified-only runs; bad usage must exit 1 instead
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
        Err(e) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Kernels {
            command: KernelsCmd::Check { kernel, grid, w },
        } => {
            let k = Kernel::from_name(&kernel)?;
            let g = SamplingGrid::from_spec(&grid)?;
            let report = check_chi_assumptions(&k, &g, &w, 1000)?;
            println!("kernel {kernel} on grid {}:", g.name());
            println!("  summable: {}", report.valid);
            println!("  chi2 partition defect: {:.3e}", report.chi2_partition_defect);
            println!("  chi3 moment M: {:.6}", report.chi3_moment_m);
            println!(
                "  chi4 tail profile (w, mass): {:?} (nonincreasing: {})",
                report.chi4_tail_profile, report.chi4_monotone
            );
            println!(
                "  chi5 concentration: verified={} radius={:?}",
                report.chi5_verified, report.chi5_radius
            );
            let quad = QuadratureConfig::with_tol(1e-11);
            for &wv in &w {
                let v = k.scaled_l1(wv, &quad)?.value;
                println!("  w*||chi_w||_1 at w={wv}: {:.12}", wv * v);
            }
            if g.is_jittered() {
                println!("  jitter sup profile: {:?}", g.jitter_profile(&w));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Approx {
            command: ApproxCmd::Run(args),
        } => approx_run(args),
        Command::Figure { id, out } => {
            let files = harness::reproduce_figure(&id, &out)?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Orlicz { command } => {
            match command {
                OrliczCmd::Norm { signal, phi } => {
                    let s = signals::catalog(&signal)?;
                    let p = PhiFunction::from_spec(&phi)?;
                    let radius = s.truncation_radius(1e-10).min(1e6);
                    let domain = IntegrationDomain::real_line(radius)?;
                    let norm = orlicz::luxemburg_norm(
                        |x| s.eval(x),
                        &p,
                        &domain,
                        s.breakpoints(),
                        &QuadratureConfig::with_tol(1e-9),
                    )?;
                    println!("||{signal}||_{{{phi}}} = {norm:.12}");
                }
                OrliczCmd::Delta2 { phi } => {
                    let p = PhiFunction::from_spec(&phi)?;
                    let grid = orlicz::log_grid(1e-6, 1e6, 2000);
                    let r = orlicz::delta2_classify(&p, &grid);
                    println!(
                        "delta2({phi}): satisfied={} sup_ratio={:.6e} (numeric bounded: {}, analytic: {})",
                        r.satisfied, r.sup_ratio, r.numeric_bounded, r.analytic
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn approx_run(mut args: RunArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    if let Some(path) = args.config.clone() {
        apply_config_file(&mut args, &path)?;
    }
    let operator = args.operator.ok_or("missing --operator")?;
    let signal = args.signal.ok_or("missing --signal")?;
    if args.w.is_empty() {
        return Err("missing --w".into());
    }
    let grid_str = args.grid.ok_or("missing --grid lo,hi,step")?;
    let parts: Vec<f64> = grid_str
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("bad --grid '{grid_str}'"))?;
    let [lo, hi, step] = parts[..] else {
        return Err(format!("--grid needs lo,hi,step, got '{grid_str}'").into());
    };

    let mut config = SweepConfig::new(&operator, &signal, args.w, (lo, hi, step));
    config.kernel = args.kernel;
    config.psi = args.psi;
    config.grid = args.sampling_grid;
    config.phi = args.phi;
    config.lambda_list = args.lambda;
    config.out_dir = args.out;

    let report = harness::run_sweep(&config)?;
    println!("w,sup_error,l1_error,luxemburg_error,certified");
    for row in &report.rows {
        println!(
            "{},{:.6e},{:.6e},{},{}",
            row.w,
            row.sup_error_continuity,
            row.l1_grid_error,
            row.luxemburg_error
                .map_or("-".to_string(), |v| format!("{v:.6e}")),
            row.certified
        );
        for (lambda, m) in &row.modular_errors {
            println!("  modular(lambda={lambda}): {m:.6e}");
        }
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    if report.rows.iter().all(|r| !r.certified) {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

/// Fill unset flags from a flat `key=value` file (one pair per line,
/// `#` comments allowed). Keys match the long flag names.
fn apply_config_file(args: &mut RunArgs, path: &PathBuf) -> Result<(), Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("reading {}: {e}", path.display()))?;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key=value", path.display(), i + 1))?;
        let (key, value) = (key.trim(), value.trim());
        let parse_list = |v: &str| -> Result<Vec<f64>, String> {
            v.split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| e.to_string()))
                .collect()
        };
        match key {
            "operator" => args.operator.get_or_insert_with(|| value.into()),
            "kernel" => args.kernel.get_or_insert_with(|| value.into()),
            "psi" => args.psi.get_or_insert_with(|| value.into()),
            "signal" => args.signal.get_or_insert_with(|| value.into()),
            "grid" => args.grid.get_or_insert_with(|| value.into()),
            "phi" => args.phi.get_or_insert_with(|| value.into()),
            "sampling_grid" => {
                if args.sampling_grid == "regular" {
                    args.sampling_grid = value.into();
                }
                &mut args.sampling_grid
            }
            "w" => {
                if args.w.is_empty() {
                    args.w = parse_list(value)?;
                }
                continue;
            }
            "lambda" => {
                if args.lambda.is_empty() {
                    args.lambda = parse_list(value)?;
                }
                continue;
            }
            "out" => {
                args.out.get_or_insert_with(|| PathBuf::from(value));
                continue;
            }
            other => return Err(format!("unknown config key '{other}'").into()),
        };
    }
    Ok(())
}
