//! Experiment runner: w-sweeps with error metrics, assumption reports, and
//! figure-reproduction commands emitting plot-ready CSV.
//!
//! CSV schema: one header line `# operator=…, kernel=…, w=…, phi=…`, then
//! `x,f,Tf` rows at 17 significant digits. Output is deterministic: identical
//! configurations produce byte-identical files.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::kernels::{check_chi_assumptions, AssumptionReport, Kernel, KernelError};
use crate::operators::{
    check_l_assumptions, LAssumptionReport, OperatorError, OperatorEvaluator, OperatorId,
    OperatorSpec, SamplingGrid,
};
use crate::orlicz::{luxemburg_norm, modular, OrliczError, PhiFunction};
use crate::quadrature::{IntegrationDomain, QuadratureConfig, QuadratureError};
use crate::signals::{self, PiecewiseSignal, SignalError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid sweep config: {0}")]
    BadConfig(String),
    #[error("operator {0} needs --kernel")]
    MissingKernel(String),
    #[error("operator t3 needs --psi")]
    MissingPsi,
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Orlicz(#[from] OrliczError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Everything needed to drive one convergence sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub operator: String,
    pub kernel: Option<String>,
    /// Auxiliary kernel for the Durrmeyer functional (t3 only).
    pub psi: Option<String>,
    pub grid: String,
    pub signal: String,
    pub w_list: Vec<f64>,
    /// `(lo, hi, step)` evaluation grid.
    pub eval_grid: (f64, f64, f64),
    pub phi: Option<String>,
    pub lambda_list: Vec<f64>,
    pub breakpoint_exclusion_radius: f64,
    pub out_dir: Option<PathBuf>,
    /// The Luxemburg error costs a bisection's worth of modulars per row;
    /// modular-table runs can switch it off.
    pub compute_luxemburg: bool,
}

impl SweepConfig {
    pub fn new(operator: &str, signal: &str, w_list: Vec<f64>, eval_grid: (f64, f64, f64)) -> Self {
        Self {
            operator: operator.to_string(),
            kernel: None,
            psi: None,
            grid: "regular".to_string(),
            signal: signal.to_string(),
            w_list,
            eval_grid,
            phi: None,
            lambda_list: Vec::new(),
            breakpoint_exclusion_radius: 0.05,
            out_dir: None,
            compute_luxemburg: true,
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let (lo, hi, step) = self.eval_grid;
        if !(step > 0.0 && lo < hi) {
            return Err(HarnessError::BadConfig(format!(
                "eval grid needs lo < hi and step > 0, got ({lo}, {hi}, {step})"
            )));
        }
        if self.w_list.is_empty() || self.w_list.windows(2).any(|p| p[1] <= p[0]) {
            return Err(HarnessError::BadConfig(
                "w_list must be nonempty and strictly increasing".into(),
            ));
        }
        if self.w_list.iter().any(|&w| w <= 0.0) {
            return Err(HarnessError::BadConfig("w values must be positive".into()));
        }
        if self.breakpoint_exclusion_radius < 0.0 {
            return Err(HarnessError::BadConfig(
                "exclusion radius must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Resolve the catalog names into a ready operator/signal/phi triple.
    pub fn build(
        &self,
    ) -> Result<(OperatorSpec, PiecewiseSignal, Option<PhiFunction>), HarnessError> {
        self.validate()?;
        let signal = signals::catalog(&self.signal)?;
        let phi = self.phi.as_deref().map(PhiFunction::from_spec).transpose()?;
        let id = OperatorId::from_str(&self.operator)?;
        let kernel = || -> Result<Kernel, HarnessError> {
            let name = self
                .kernel
                .as_deref()
                .ok_or_else(|| HarnessError::MissingKernel(self.operator.clone()))?;
            Ok(Kernel::from_name(name)?)
        };
        let grid = || SamplingGrid::from_spec(&self.grid);
        let spec = match id {
            OperatorId::T1 => OperatorSpec::t1(kernel()?, grid()?),
            OperatorId::T2 => OperatorSpec::t2(kernel()?, grid()?),
            OperatorId::T3 => {
                let psi_name = self.psi.as_deref().ok_or(HarnessError::MissingPsi)?;
                OperatorSpec::t3(kernel()?, grid()?, Kernel::from_name(psi_name)?)?
            }
            OperatorId::T4 => OperatorSpec::t4(kernel()?),
            OperatorId::T5 => OperatorSpec::t5(kernel()?),
            OperatorId::T6 => OperatorSpec::t6(),
            OperatorId::T7 => OperatorSpec::t7(),
        };
        Ok((spec, signal, phi))
    }
}

/// Per-w error metrics of one sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub w: f64,
    /// sup of `|T_w f - f|` over grid points away from signal breakpoints.
    pub sup_error_continuity: f64,
    /// Trapezoidal `int |T_w f - f|` over the full grid.
    pub l1_grid_error: f64,
    /// `(lambda, I_phi(lambda (T_w f - f)))`; infinite modulars become +inf.
    pub modular_errors: Vec<(f64, f64)>,
    /// Luxemburg norm of the error, when a phi was configured.
    pub luxemburg_error: Option<f64>,
    pub certified: bool,
}

#[derive(Debug, Clone)]
pub struct ApproximationReport {
    pub rows: Vec<SweepRow>,
    pub files: Vec<PathBuf>,
}

impl ApproximationReport {
    pub fn l1_strictly_decreasing(&self) -> bool {
        self.rows
            .windows(2)
            .all(|p| p[1].l1_grid_error < p[0].l1_grid_error)
    }
}

fn grid_points(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

fn excluded(x: f64, breakpoints: &[f64], radius: f64) -> bool {
    breakpoints.iter().any(|&b| (x - b).abs() <= radius)
}

/// Evaluate `T_w f` on the grid and compute the error metrics per w;
/// emits one CSV per w when `out_dir` is set.
pub fn run_sweep(config: &SweepConfig) -> Result<ApproximationReport, HarnessError> {
    let (spec, signal, phi) = config.build()?;
    let (lo, hi, step) = config.eval_grid;
    let xs = grid_points(lo, hi, step);
    let fs: Vec<f64> = xs.iter().map(|&x| signal.eval(x)).collect();
    let window = IntegrationDomain::finite(lo, hi)?;
    let inner_bps: Vec<f64> = signal
        .breakpoints()
        .iter()
        .copied()
        .filter(|b| *b > lo && *b < hi)
        .collect();

    let mut rows = Vec::new();
    let mut files = Vec::new();
    for &w in &config.w_list {
        let ev = OperatorEvaluator::new(&spec, w, &signal);
        let mut tfs = Vec::with_capacity(xs.len());
        let mut certified = true;
        for &x in &xs {
            let v = ev.eval(x)?;
            certified &= v.certified;
            tfs.push(v.value);
        }

        let mut sup = 0.0f64;
        for ((&x, &f), &tf) in xs.iter().zip(&fs).zip(&tfs) {
            if !excluded(x, signal.breakpoints(), config.breakpoint_exclusion_radius) {
                sup = sup.max((tf - f).abs());
            }
        }
        let mut l1 = 0.0;
        for i in 1..xs.len() {
            let (e0, e1) = ((tfs[i - 1] - fs[i - 1]).abs(), (tfs[i] - fs[i]).abs());
            l1 += 0.5 * (e0 + e1) * (xs[i] - xs[i - 1]);
        }

        let mut modular_errors = Vec::new();
        let mut luxemburg_error = None;
        if let Some(phi) = &phi {
            let diff = |x: f64| ev.eval(x).map(|v| v.value).unwrap_or(f64::NAN) - signal.eval(x);
            let quad = QuadratureConfig::with_tol(1e-7);
            for &lambda in &config.lambda_list {
                let m = modular(diff, phi, lambda, &window, &inner_bps, &quad)?;
                modular_errors.push((lambda, m.finite().unwrap_or(f64::INFINITY)));
            }
            if config.compute_luxemburg {
                luxemburg_error = Some(luxemburg_norm(diff, phi, &window, &inner_bps, &quad)?);
            }
        }

        if let Some(dir) = &config.out_dir {
            let path = dir.join(format!(
                "{}_{}_{}_w{}.csv",
                spec.id().as_str(),
                config.kernel.as_deref().unwrap_or("mellin"),
                signal.name(),
                format_w(w)
            ));
            write_csv(
                &path,
                &csv_header(
                    spec.id().as_str(),
                    config.kernel.as_deref().unwrap_or("mellin"),
                    w,
                    config.phi.as_deref(),
                ),
                xs.iter().zip(&fs).zip(&tfs).map(|((&x, &f), &tf)| (x, f, tf)),
            )?;
            files.push(path);
        }

        rows.push(SweepRow {
            w,
            sup_error_continuity: sup,
            l1_grid_error: l1,
            modular_errors,
            luxemburg_error,
            certified,
        });
    }
    Ok(ApproximationReport { rows, files })
}

fn format_w(w: f64) -> String {
    if w.fract() == 0.0 && w.abs() < 1e15 {
        format!("{}", w as i64)
    } else {
        format!("{w}")
    }
}

fn csv_header(operator: &str, kernel: &str, w: f64, phi: Option<&str>) -> String {
    format!(
        "# operator={operator}, kernel={kernel}, w={}, phi={}",
        format_w(w),
        phi.unwrap_or("none")
    )
}

fn write_csv(
    path: &Path,
    header: &str,
    rows: impl Iterator<Item = (f64, f64, f64)>,
) -> Result<(), HarnessError> {
    let io_err = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    (|| -> std::io::Result<()> {
        writeln!(out, "{header}")?;
        writeln!(out, "x,f,Tf")?;
        for (x, f, tf) in rows {
            writeln!(out, "{x:.16e},{f:.16e},{tf:.16e}")?;
        }
        out.flush()
    })()
    .map_err(io_err)
}

/// Reproduce one of the four reference figures into `out_dir`.
///
/// fig1: the three curve files `M3.csv`, `M4.csv`, `M.csv` on `[-5, 5]`.
/// fig2: Kantorovich sampling sweep, `w in {5,10,15,20,40}` on `[-6, 3]`.
/// fig3: Durrmeyer sampling sweep, `n in {5,10,20}` on `[-3, 4]`.
/// fig4: Mellin-Kantorovich sweep, `w in {5,20,30}` on `[0.2, 8]`.
pub fn reproduce_figure(id: &str, out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    match id {
        "fig1" => {
            let mut files = Vec::new();
            for (name, file) in [
                ("bspline:3", "M3.csv"),
                ("bspline:4", "M4.csv"),
                ("combined-m", "M.csv"),
            ] {
                let k = Kernel::from_name(name)?;
                let path = out_dir.join(file);
                let xs = grid_points(-5.0, 5.0, 1e-3);
                write_csv(
                    &path,
                    &csv_header("none", name, 1.0, None),
                    xs.iter().map(|&x| {
                        let v = k.eval(x);
                        (x, v, v)
                    }),
                )?;
                files.push(path);
            }
            Ok(files)
        }
        "fig2" | "fig3" | "fig4" => {
            let mut config = match id {
                "fig2" => {
                    let mut c = SweepConfig::new(
                        "t2",
                        "fig2",
                        vec![5.0, 10.0, 15.0, 20.0, 40.0],
                        (-6.0, 3.0, 1e-3),
                    );
                    c.kernel = Some("combined-m".into());
                    c
                }
                "fig3" => {
                    let mut c =
                        SweepConfig::new("t3", "fig3", vec![5.0, 10.0, 20.0], (-3.0, 4.0, 1e-3));
                    c.kernel = Some("combined-m".into());
                    c.psi = Some("fejer".into());
                    c
                }
                _ => SweepConfig::new("t7", "fig4", vec![5.0, 20.0, 30.0], (0.2, 8.0, 1e-3)),
            };
            config.out_dir = Some(out_dir.to_path_buf());
            Ok(run_sweep(&config)?.files)
        }
        other => Err(HarnessError::BadConfig(format!(
            "unknown figure id '{other}' (expected fig1..fig4)"
        ))),
    }
}

/// Combined kernel-side and functional-side assumption probe.
#[derive(Debug)]
pub struct AssumptionSummary {
    pub chi: Option<AssumptionReport>,
    pub l: Option<LAssumptionReport>,
    /// `(w, w * ||chi(w .)||_1)` — constant under the scaling convention.
    pub scaling_rows: Vec<(f64, f64)>,
}

impl AssumptionSummary {
    /// Human-readable pass/warn matrix, one finding per line.
    pub fn matrix(&self) -> String {
        let mut lines = Vec::new();
        let verdict = |ok: bool| if ok { "pass" } else { "WARN" };
        if let Some(chi) = &self.chi {
            lines.push(format!(
                "[{}] kernel summability (divergent partial sums flagged invalid)",
                verdict(chi.valid)
            ));
            lines.push(format!(
                "[{}] chi2 partition-of-unity defect = {:.3e}",
                verdict(chi.chi2_partition_defect <= 1e-6),
                chi.chi2_partition_defect
            ));
            lines.push(format!("[info] chi3 moment M = {:.6}", chi.chi3_moment_m));
            lines.push(format!(
                "[{}] chi4 tail profile nonincreasing in w: {:?}",
                verdict(chi.chi4_monotone),
                chi.chi4_tail_profile
            ));
            lines.push(format!(
                "[{}] chi5 concentration radius = {:?} (K = [-{}, {}])",
                verdict(chi.chi5_verified),
                chi.chi5_radius,
                chi.chi5_compact_k,
                chi.chi5_compact_k
            ));
        }
        for &(w, v) in &self.scaling_rows {
            lines.push(format!("[info] w * ||chi_w||_1 at w={}: {v:.12}", format_w(w)));
        }
        if let Some(l) = &self.l {
            lines.push(format!(
                "[{}] L1 uniform bound: empirical {:.6} <= declared {:.6}",
                verdict(l.upsilon_empirical <= l.upsilon_declared + 1e-9),
                l.upsilon_empirical,
                l.upsilon_declared
            ));
            lines.push(format!("[info] L2 continuity deviations: {:?}", l.l2_profile));
            if l.l3_exactly_zero {
                lines.push("[pass] L3 tail vanishes outside the enlarged support".into());
            } else {
                lines.push(format!(
                    "[info] L3 tail (enlargement {}): {:?}",
                    l.l3_enlargement, l.l3_tail
                ));
            }
            if let Some((k, v)) = l.non_locality_witness {
                lines.push(format!(
                    "[info] non-local functional: |L f| = {v:.3e} at node {k} outside support"
                ));
            }
            if l.modular_only {
                lines.push("[note] modular-only convergence (norm convergence on compactly supported continuous signals is not available for this functional)".into());
            }
            lines.push(format!(
                "[{}] L4 modular-continuity rows (w, lhs, rhs): {:?}",
                verdict(l.l4_ok),
                l.l4_rows
            ));
            for n in &l.notes {
                lines.push(format!("[note] {n}"));
            }
        }
        lines.join("\n")
    }
}

/// Run the kernel- and functional-side checkers for one operator/signal pair.
pub fn check_assumptions(
    config: &SweepConfig,
    phi_default: &str,
) -> Result<AssumptionSummary, HarnessError> {
    let (spec, signal, phi) = config.build()?;
    let phi = match phi {
        Some(p) => p,
        None => PhiFunction::from_spec(phi_default)?,
    };
    let grid = spec.grid().cloned().unwrap_or_else(SamplingGrid::regular);

    let mut chi = None;
    let mut scaling_rows = Vec::new();
    if let Some(kernel) = spec.kernel() {
        chi = Some(check_chi_assumptions(kernel, &grid, &config.w_list, 1000)?);
        let quad = QuadratureConfig::with_tol(1e-11);
        for &w in &config.w_list {
            scaling_rows.push((w, w * kernel.scaled_l1(w, &quad)?.value));
        }
    } else {
        // Mellin kernels are normalized per w; their scaled mass is 1 exactly
        for &w in &config.w_list {
            crate::kernels::MellinKernel::new(w)?;
            scaling_rows.push((w, 1.0));
        }
    }

    let l = Some(check_l_assumptions(&spec, &signal, &phi, &config.w_list, 1e-3)?);
    Ok(AssumptionSummary {
        chi,
        l,
        scaling_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut c = SweepConfig::new("t2", "fig2", vec![5.0, 10.0], (-1.0, 1.0, 0.01));
        c.kernel = Some("combined-m".into());
        assert!(c.build().is_ok());

        c.w_list = vec![10.0, 5.0];
        assert!(matches!(c.build(), Err(HarnessError::BadConfig(_))));
        c.w_list = vec![5.0];
        c.eval_grid = (1.0, -1.0, 0.01);
        assert!(matches!(c.build(), Err(HarnessError::BadConfig(_))));

        let c2 = SweepConfig::new("t1", "ramp", vec![5.0], (-1.0, 1.0, 0.1));
        assert!(matches!(c2.build(), Err(HarnessError::MissingKernel(_))));
        let mut c3 = SweepConfig::new("t3", "ramp", vec![5.0], (-1.0, 1.0, 0.1));
        c3.kernel = Some("combined-m".into());
        assert!(matches!(c3.build(), Err(HarnessError::MissingPsi)));
    }

    #[test]
    fn sweep_reports_coherent_errors() {
        let mut c = SweepConfig::new("t2", "ramp", vec![5.0, 20.0], (-1.5, 1.5, 0.01));
        c.kernel = Some("combined-m".into());
        let r = run_sweep(&c).unwrap();
        assert_eq!(r.rows.len(), 2);
        for row in &r.rows {
            assert!(row.sup_error_continuity >= 0.0);
            assert!(row.certified);
            // trapezoid over the grid is bounded by window * sup over the grid
            assert!(row.l1_grid_error <= 3.0 * (row.sup_error_continuity + 1.0) + 1e-9);
        }
        assert!(r.l1_strictly_decreasing(), "{:?}", r.rows);
    }

    #[test]
    fn modular_and_luxemburg_agree_for_power_phi() {
        let mut c = SweepConfig::new("t2", "ramp", vec![8.0], (-1.5, 1.5, 0.01));
        c.kernel = Some("combined-m".into());
        c.phi = Some("power:p=2".into());
        c.lambda_list = vec![1.0];
        let r = run_sweep(&c).unwrap();
        let row = &r.rows[0];
        let lux = row.luxemburg_error.unwrap();
        let modular_root = row.modular_errors[0].1.sqrt();
        assert!(
            (lux - modular_root).abs() <= 1e-4,
            "lux {lux} vs modular^1/2 {modular_root}"
        );
    }

    #[test]
    fn fig1_files_and_center_value() {
        let dir = std::env::temp_dir().join("samplingops_fig1_test");
        let files = reproduce_figure("fig1", &dir).unwrap();
        assert_eq!(files.len(), 3);
        let m = std::fs::read_to_string(dir.join("M.csv")).unwrap();
        let center = m
            .lines()
            .find(|l| l.starts_with("0.0000000000000000e0,"))
            .expect("x = 0 row");
        assert!(center.contains(",1.0000000000000000e0"), "{center}");
    }

    #[test]
    fn csv_output_is_deterministic() {
        let dir1 = std::env::temp_dir().join("samplingops_det1");
        let dir2 = std::env::temp_dir().join("samplingops_det2");
        let mut c = SweepConfig::new("t2", "ramp", vec![5.0], (-1.0, 1.0, 0.05));
        c.kernel = Some("combined-m".into());
        c.out_dir = Some(dir1.clone());
        let f1 = run_sweep(&c).unwrap().files;
        c.out_dir = Some(dir2.clone());
        let f2 = run_sweep(&c).unwrap().files;
        let a = std::fs::read(&f1[0]).unwrap();
        let b = std::fs::read(&f2[0]).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }

    #[test]
    fn assumption_matrix_mentions_modular_only_for_durrmeyer() {
        let mut c = SweepConfig::new("t3", "ramp", vec![10.0], (-1.0, 1.0, 0.1));
        c.kernel = Some("combined-m".into());
        c.psi = Some("fejer".into());
        let s = check_assumptions(&c, "power:p=1").unwrap();
        let m = s.matrix();
        assert!(m.contains("modular-only"), "{m}");
        assert!(s.chi.is_some());
    }
}
