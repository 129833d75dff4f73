//! Orlicz-space layer: phi-functions, the modular functional, the Luxemburg
//! norm, and the Delta-2 classifier.
//!
//! The Luxemburg norm is implemented in its standard form
//! `inf { lam > 0 : I_phi(f / lam) <= 1 }`. Divergent modulars are carried as
//! an explicit infinity flag, never as a sentinel number: exponential-space
//! modulars genuinely diverge for large scalings.

use thiserror::Error;

use crate::quadrature::{
    integrate_with_breakpoints, IntegrationDomain, QuadratureConfig, QuadratureError,
};

#[derive(Debug, Error)]
pub enum OrliczError {
    #[error("phi-function parameter out of range: {0}")]
    BadParameter(String),
    #[error("unknown phi spec '{0}' (expected power:p=.., exp:alpha=.., zygmund:alpha=..,beta=..)")]
    BadSpec(String),
    #[error("negative argument {0} passed to a phi-function")]
    NegativeArgument(f64),
    #[error("function is not in the Orlicz space: modular diverges for every probed scaling")]
    NotInSpace,
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// The three built-in convex phi-function families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiFamily {
    /// `x^p`, `p >= 1`
    Power { p: f64 },
    /// `exp(x^alpha) - 1`, `alpha > 0`
    Exponential { alpha: f64 },
    /// `x^alpha ln^beta(e + x)`, `alpha >= 1`, `beta > 0`
    Zygmund { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiFunction {
    family: PhiFamily,
}

impl PhiFunction {
    pub fn power(p: f64) -> Result<Self, OrliczError> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(OrliczError::BadParameter(format!("power needs p >= 1, got {p}")));
        }
        Self::checked(PhiFamily::Power { p })
    }

    pub fn exponential(alpha: f64) -> Result<Self, OrliczError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(OrliczError::BadParameter(format!(
                "exponential needs alpha > 0, got {alpha}"
            )));
        }
        Self::checked(PhiFamily::Exponential { alpha })
    }

    pub fn zygmund(alpha: f64, beta: f64) -> Result<Self, OrliczError> {
        if !(alpha >= 1.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(OrliczError::BadParameter(format!(
                "zygmund needs alpha >= 1, beta > 0, got ({alpha}, {beta})"
            )));
        }
        Self::checked(PhiFamily::Zygmund { alpha, beta })
    }

    /// Probe-grid sanity check of the phi-function axioms (vanishing at zero,
    /// positivity, monotonicity, midpoint convexity, divergence).
    fn checked(family: PhiFamily) -> Result<Self, OrliczError> {
        let phi = Self { family };
        if phi.eval(0.0) != 0.0 {
            return Err(OrliczError::BadParameter("phi(0) != 0".into()));
        }
        let grid: Vec<f64> = (0..=60).map(|i| 10f64.powf(-6.0 + 8.0 * i as f64 / 60.0)).collect();
        let mut prev = 0.0;
        for &x in &grid {
            let v = phi.eval(x);
            if !(v > 0.0) {
                return Err(OrliczError::BadParameter(format!("phi({x}) not positive")));
            }
            if v + 1e-15 < prev {
                return Err(OrliczError::BadParameter("phi not nondecreasing".into()));
            }
            prev = v;
        }
        for pair in grid.windows(2) {
            let (x, y) = (pair[0], pair[1]);
            let mid = phi.eval(0.5 * (x + y));
            let avg = 0.5 * (phi.eval(x) + phi.eval(y));
            if mid > avg * (1.0 + 1e-12) {
                return Err(OrliczError::BadParameter("phi not convex on probe grid".into()));
            }
        }
        if phi.eval(1e8) < phi.eval(1e2) * 10.0 {
            return Err(OrliczError::BadParameter("phi does not diverge".into()));
        }
        Ok(phi)
    }

    /// Parse a CLI spec string: `power:p=2`, `exp:alpha=1`,
    /// `zygmund:alpha=1,beta=1`.
    pub fn from_spec(spec: &str) -> Result<Self, OrliczError> {
        let bad = || OrliczError::BadSpec(spec.to_string());
        let (family, args) = spec.split_once(':').ok_or_else(bad)?;
        let mut kv = std::collections::HashMap::new();
        for part in args.split(',') {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            let v: f64 = v.trim().parse().map_err(|_| bad())?;
            kv.insert(k.trim().to_string(), v);
        }
        match family {
            "power" => Self::power(*kv.get("p").ok_or_else(bad)?),
            "exp" => Self::exponential(*kv.get("alpha").ok_or_else(bad)?),
            "zygmund" => Self::zygmund(
                *kv.get("alpha").ok_or_else(bad)?,
                *kv.get("beta").ok_or_else(bad)?,
            ),
            _ => Err(bad()),
        }
    }

    pub fn family(&self) -> PhiFamily {
        self.family
    }

    pub fn spec_string(&self) -> String {
        match self.family {
            PhiFamily::Power { p } => format!("power:p={p}"),
            PhiFamily::Exponential { alpha } => format!("exp:alpha={alpha}"),
            PhiFamily::Zygmund { alpha, beta } => format!("zygmund:alpha={alpha},beta={beta}"),
        }
    }

    /// `phi(x)` for `x >= 0`; negative arguments are a caller bug.
    pub fn eval(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0, "phi evaluated at negative {x}");
        match self.family {
            PhiFamily::Power { p } => x.powf(p),
            PhiFamily::Exponential { alpha } => x.powf(alpha).exp() - 1.0,
            PhiFamily::Zygmund { alpha, beta } => {
                x.powf(alpha) * (std::f64::consts::E + x).ln().powf(beta)
            }
        }
    }

    pub fn try_eval(&self, x: f64) -> Result<f64, OrliczError> {
        if x < 0.0 {
            return Err(OrliczError::NegativeArgument(x));
        }
        Ok(self.eval(x))
    }

    /// Whether the family satisfies the Delta-2 condition for every `x > 0`
    /// (analytic fact, independent of any probe grid).
    pub fn delta2_analytic(&self) -> bool {
        !matches!(self.family, PhiFamily::Exponential { .. })
    }
}

/// Value of the modular functional at a given scaling `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModularValue {
    pub outcome: ModularOutcome,
    pub lambda: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModularOutcome {
    Finite(f64),
    Infinite,
}

impl ModularValue {
    pub fn finite(&self) -> Option<f64> {
        match self.outcome {
            ModularOutcome::Finite(v) => Some(v),
            ModularOutcome::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self.outcome, ModularOutcome::Infinite)
    }
}

const OVERFLOW_GUARD: f64 = 1e300;

/// `I_phi(lambda f) = int phi(lambda |f|) dmu` over `domain`. Breakpoints are
/// honored by the quadrature; any panel whose integrand exceeds `1e300` flips
/// the result to the infinity flag.
pub fn modular(
    f: impl Fn(f64) -> f64,
    phi: &PhiFunction,
    lambda: f64,
    domain: &IntegrationDomain,
    breakpoints: &[f64],
    config: &QuadratureConfig,
) -> Result<ModularValue, OrliczError> {
    assert!(lambda > 0.0, "modular scaling must be positive");
    let overflow = std::cell::Cell::new(false);
    let integrand = |x: f64| {
        let v = phi.eval((lambda * f(x)).abs());
        if v > OVERFLOW_GUARD {
            overflow.set(true);
            0.0
        } else {
            v
        }
    };
    let r = integrate_with_breakpoints(integrand, domain, breakpoints, config)?;
    Ok(ModularValue {
        outcome: if overflow.get() {
            ModularOutcome::Infinite
        } else {
            ModularOutcome::Finite(r.value)
        },
        lambda,
        certified: r.certified && !overflow.get(),
    })
}

/// Luxemburg norm `inf { lam > 0 : I_phi(f / lam) <= 1 }`, by bisection in
/// log-space over `[2^-40, 2^40]` to relative width 1e-8.
pub fn luxemburg_norm(
    f: impl Fn(f64) -> f64,
    phi: &PhiFunction,
    domain: &IntegrationDomain,
    breakpoints: &[f64],
    config: &QuadratureConfig,
) -> Result<f64, OrliczError> {
    let lo_probe = 2f64.powi(-40);
    let hi_probe = 2f64.powi(40);
    let m = |lam: f64| modular(&f, phi, 1.0 / lam, domain, breakpoints, config);

    let at_lo = m(lo_probe)?;
    if matches!(at_lo.outcome, ModularOutcome::Finite(v) if v <= 1.0) {
        return Ok(0.0);
    }
    let at_hi = m(hi_probe)?;
    match at_hi.outcome {
        ModularOutcome::Finite(v) if v <= 1.0 => {}
        _ => return Err(OrliczError::NotInSpace),
    }

    let (mut lo, mut hi) = (lo_probe, hi_probe);
    while hi / lo > 1.0 + 1e-8 {
        let mid = (lo * hi).sqrt();
        let ok = matches!(m(mid)?.outcome, ModularOutcome::Finite(v) if v <= 1.0);
        if ok {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Outcome of the Delta-2 probe.
#[derive(Debug, Clone, Copy)]
pub struct Delta2Report {
    pub satisfied: bool,
    /// max over the grid of `phi(2x)/phi(x)`
    pub sup_ratio: f64,
    pub numeric_bounded: bool,
    pub analytic: bool,
    /// True when the grid probe and the per-family analytic flag disagree;
    /// the analytic flag is authoritative, disagreement is surfaced.
    pub disagreement: bool,
}

/// Probe `phi(2x)/phi(x)` on `x_grid` and compare with the family's analytic
/// Delta-2 status. The numeric threshold is 1e6; a grid can only falsify.
pub fn delta2_classify(phi: &PhiFunction, x_grid: &[f64]) -> Delta2Report {
    let mut sup = 0.0f64;
    for &x in x_grid {
        if x <= 0.0 {
            continue;
        }
        let denom = phi.eval(x);
        if denom == 0.0 {
            continue;
        }
        sup = sup.max(phi.eval(2.0 * x) / denom);
    }
    let numeric = sup <= 1e6;
    let analytic = phi.delta2_analytic();
    Delta2Report {
        satisfied: analytic,
        sup_ratio: sup,
        numeric_bounded: numeric,
        analytic,
        disagreement: numeric != analytic,
    }
}

/// Log-spaced grid covering `[lo, hi]`, for the Delta-2 probe.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Matrix of `I_phi(lambda (f_w - f))` over `(lambda, w)`, with each
/// lambda-row tagged "decreasing" when nonincreasing in `w` within 5% slack.
#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub lambdas: Vec<f64>,
    pub w_list: Vec<f64>,
    /// `cells[i][j]` is the modular at `lambdas[i]`, `w_list[j]`.
    pub cells: Vec<Vec<ModularValue>>,
    pub row_decreasing: Vec<bool>,
}

pub fn modular_convergence_table(
    mut family: impl FnMut(f64) -> Box<dyn Fn(f64) -> f64>,
    target: impl Fn(f64) -> f64,
    phi: &PhiFunction,
    lambda_list: &[f64],
    w_list: &[f64],
    domain: &IntegrationDomain,
    breakpoints: &[f64],
    config: &QuadratureConfig,
) -> ConvergenceTable {
    assert!(!lambda_list.is_empty() && !w_list.is_empty());
    let mut cells: Vec<Vec<ModularValue>> = vec![Vec::new(); lambda_list.len()];
    for &w in w_list {
        let fw = family(w);
        for (i, &lam) in lambda_list.iter().enumerate() {
            let cell = modular(
                |x| fw(x) - target(x),
                phi,
                lam,
                domain,
                breakpoints,
                config,
            )
            .unwrap_or(ModularValue {
                outcome: ModularOutcome::Infinite,
                lambda: lam,
                certified: false,
            });
            cells[i].push(cell);
        }
    }
    let row_decreasing = cells
        .iter()
        .map(|row| {
            row.windows(2).all(|p| match (p[0].finite(), p[1].finite()) {
                (Some(a), Some(b)) => b <= 1.05 * a + 1e-12,
                _ => false,
            })
        })
        .collect();
    ConvergenceTable {
        lambdas: lambda_list.to_vec(),
        w_list: w_list.to_vec(),
        cells,
        row_decreasing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::with_tol(1e-10)
    }

    #[test]
    fn phi_values() {
        assert_eq!(PhiFunction::power(2.0).unwrap().eval(3.0), 9.0);
        assert_eq!(PhiFunction::exponential(1.0).unwrap().eval(0.0), 0.0);
        assert_eq!(PhiFunction::zygmund(1.0, 1.0).unwrap().eval(0.0), 0.0);
        assert!(PhiFunction::power(0.5).is_err());
        assert!(PhiFunction::exponential(-1.0).is_err());
        let p = PhiFunction::power(2.0).unwrap();
        assert!(p.try_eval(-1.0).is_err());
    }

    #[test]
    fn phi_spec_parsing() {
        assert_eq!(
            PhiFunction::from_spec("power:p=2").unwrap().family(),
            PhiFamily::Power { p: 2.0 }
        );
        assert_eq!(
            PhiFunction::from_spec("zygmund:alpha=1,beta=1").unwrap().family(),
            PhiFamily::Zygmund { alpha: 1.0, beta: 1.0 }
        );
        assert!(PhiFunction::from_spec("weird:x=1").is_err());
    }

    #[test]
    fn modular_of_indicator() {
        let phi = PhiFunction::power(2.0).unwrap();
        let d = IntegrationDomain::finite(-2.0, 2.0).unwrap();
        let ind = |x: f64| if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 };
        let m = modular(ind, &phi, 3.0, &d, &[0.0, 1.0], &cfg()).unwrap();
        assert!((m.finite().unwrap() - 9.0).abs() < 1e-9);

        let z = modular(|_| 0.0, &phi, 5.0, &d, &[], &cfg()).unwrap();
        assert_eq!(z.finite().unwrap(), 0.0);
    }

    #[test]
    fn modular_fig2_l1_matches_piecewise_oracle() {
        // per-piece antiderivative oracle for int |f| on [-50, 50]
        let f = crate::signals::fig2();
        let oracle = {
            let p40 = 40.0 / 5.0 - 40.0 / 50.0; // int_{-50}^{-5} 40/u^2
            let tails = 0.5 * (1.0 / 2f64.powi(4) - 1.0 / 50f64.powi(4)); // int_2^50 2/u^5
            p40 + 2.0 + 2.0 + 0.5 + 1.5 + 1.0 + 0.5 + tails
        };
        let phi = PhiFunction::power(1.0).unwrap();
        let d = IntegrationDomain::real_line(50.0).unwrap();
        let m = modular(|x| f.eval(x), &phi, 1.0, &d, f.breakpoints(), &cfg()).unwrap();
        assert!(
            (m.finite().unwrap() - oracle).abs() < 1e-6,
            "{} vs {oracle}",
            m.finite().unwrap()
        );
    }

    #[test]
    fn modular_infinite_flag() {
        let phi = PhiFunction::exponential(1.0).unwrap();
        let d = IntegrationDomain::finite(0.0, 1.0).unwrap();
        let m = modular(|_| 800.0, &phi, 1.0, &d, &[], &cfg()).unwrap();
        assert!(m.is_infinite());
    }

    #[test]
    fn luxemburg_norm_indicator() {
        let phi = PhiFunction::power(2.0).unwrap();
        let d = IntegrationDomain::finite(-2.0, 2.0).unwrap();
        let ind = |x: f64| if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 };
        let n = luxemburg_norm(ind, &phi, &d, &[0.0, 1.0], &cfg()).unwrap();
        assert!((n - 1.0).abs() < 1e-6, "{n}");

        let z = luxemburg_norm(|_| 0.0, &phi, &d, &[], &cfg()).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn luxemburg_matches_lp_scaling_law() {
        let d = IntegrationDomain::finite(-2.0, 3.0).unwrap();
        for &p in &[1.0, 2.0, 4.0] {
            let phi = PhiFunction::power(p).unwrap();
            for &c in &[0.5, 2.0] {
                let f = move |x: f64| if (0.0..1.0).contains(&x) { c } else { 0.0 };
                let n = luxemburg_norm(f, &phi, &d, &[0.0, 1.0], &cfg()).unwrap();
                assert!((n - c).abs() < 1e-5, "p={p} c={c} n={n}");
            }
        }
    }

    #[test]
    fn delta2_families() {
        let grid = log_grid(1e-6, 1e2, 400);
        let r = delta2_classify(&PhiFunction::power(2.0).unwrap(), &grid);
        assert!(r.satisfied && !r.disagreement);
        assert!((r.sup_ratio - 4.0).abs() < 1e-9);

        let r = delta2_classify(&PhiFunction::exponential(1.0).unwrap(), &grid);
        assert!(!r.satisfied && !r.disagreement);
        assert!(r.sup_ratio > 1e6);

        let r = delta2_classify(&PhiFunction::zygmund(1.0, 1.0).unwrap(), &grid);
        assert!(r.satisfied && !r.disagreement);
        assert!(r.sup_ratio <= 4.0);
    }

    #[test]
    fn convergence_table_closed_form() {
        let phi = PhiFunction::power(1.0).unwrap();
        let d = IntegrationDomain::finite(0.0, 1.0).unwrap();
        let ws = [5.0, 10.0, 20.0];
        let t = modular_convergence_table(
            |w| Box::new(move |_x| 1.0 / w),
            |_| 0.0,
            &phi,
            &[1.0],
            &ws,
            &d,
            &[],
            &cfg(),
        );
        for (j, &w) in ws.iter().enumerate() {
            let v = t.cells[0][j].finite().unwrap();
            assert!((v - 1.0 / w).abs() < 1e-9, "w={w} v={v}");
        }
        assert!(t.row_decreasing[0]);
    }

    #[test]
    fn modular_monotone_in_lambda() {
        let phi = PhiFunction::zygmund(1.0, 1.0).unwrap();
        let d = IntegrationDomain::real_line(50.0).unwrap();
        let f = crate::signals::fig2();
        let mut prev = -1.0;
        for &lam in &[0.25, 0.5, 1.0, 2.0] {
            let m = modular(|x| f.eval(x), &phi, lam, &d, f.breakpoints(), &cfg())
                .unwrap()
                .finite()
                .unwrap();
            assert!(m + 1e-9 >= prev, "lambda={lam}");
            prev = m;
        }
    }
}
