//! Kernel catalog and kernel-side assumption checkers.
//!
//! The scaling convention throughout is `chi_w(x) = chi(w x)`, so the scaled
//! family satisfies `w * ||chi_w||_1 = ||chi||_1` identically in `w`. The
//! Mellin kernel family lives on the multiplicative half-line and is handled
//! by [`MellinKernel`].

use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::operators::SamplingGrid;
use crate::quadrature::{
    integrate, integrate_panels, IntegrationDomain, QuadResult, QuadratureConfig, QuadratureError,
};

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("B-spline order must be >= 1")]
    ZeroOrder,
    #[error("unknown kernel name '{0}'")]
    UnknownName(String),
    #[error("kernel '{name}' violates its declared tail bound at x = {x}")]
    TailBound { name: String, x: f64 },
    #[error("Mellin kernel normalization defect {defect} exceeds 1e-8 at w = {w}")]
    MellinMass { w: f64, defect: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// `sin(pi x) / (pi x)`, with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Fejer kernel `F(x) = sinc^2(x/2) / 2`. Nonnegative, even, unit mass,
/// `F(x) <= 2 / (pi^2 x^2)` away from the origin.
pub fn fejer(x: f64) -> f64 {
    let s = sinc(0.5 * x);
    0.5 * s * s
}

/// Central B-spline of order `n`: support `[-n/2, n/2]`, unit mass, and
/// `sum_k M_n(u - k) = 1` for every `u`.
///
/// Computed as `1/(n-1)! * sum_j (-1)^j C(n,j) (n/2 + x - j)_+^{n-1}`, with
/// the convention `(y)_+^0 = 1` for `y > 0` and `0` otherwise, which makes
/// `M_1` the half-open unit indicator.
pub fn bspline(n: u32, x: f64) -> f64 {
    assert!(n >= 1, "B-spline order must be >= 1");
    let half = n as f64 / 2.0;
    if x.abs() > half {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut binom = 1.0f64;
    let mut sign = 1.0f64;
    for j in 0..=n {
        let y = half + x - j as f64;
        let plus = if n == 1 {
            if y > 0.0 {
                1.0
            } else {
                0.0
            }
        } else if y > 0.0 {
            y.powi(n as i32 - 1)
        } else {
            0.0
        };
        sum += sign * binom * plus;
        binom = binom * (n - j) as f64 / (j + 1) as f64;
        sign = -sign;
    }
    sum / factorial(n - 1)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product::<f64>().max(1.0)
}

/// The combined kernel `M(x) = 4 M_3(x) - 3 M_4(x)`: compact support `[-2, 2]`
/// and a discrete partition of unity, with sign changes (it is not a B-spline).
pub fn combined_m(x: f64) -> f64 {
    4.0 * bspline(3, x) - 3.0 * bspline(4, x)
}

/// Support descriptor of a line kernel.
#[derive(Debug, Clone, Copy)]
pub enum Support {
    Compact { a: f64, b: f64 },
    /// Full-line kernel with `|chi(x)| <= c / x^2` for `|x| >= 1`.
    FullLine { tail_bound_constant: f64 },
}

/// A kernel `chi` on the line, with its support descriptor and `||chi||_1`
/// computed once at construction.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    support: Support,
    l1_norm: f64,
    /// Knots at which `|chi|` is non-smooth, used to panel integrations.
    knots: Vec<f64>,
    /// Estimate of the discrete tail `sum_{|u-k| > r} |chi(u-k)|`, if the
    /// kernel is absolutely summable on integer grids. `None` marks kernels
    /// (sinc) whose absolute sums diverge.
    discrete_tail: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("support", &self.support)
            .field("l1_norm", &self.l1_norm)
            .finish()
    }
}

/// Truncation radius used when a full-line kernel must be integrated or
/// summed: chosen so the analytic tail bound `2/(pi^2 r)` for the Fejer
/// family stays below desk-scale tolerances.
pub const FULL_LINE_RADIUS: f64 = 1e4;

impl Kernel {
    fn build(
        name: &str,
        eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        support: Support,
        knots: Vec<f64>,
        discrete_tail: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    ) -> Result<Self, KernelError> {
        if let Support::FullLine { tail_bound_constant } = support {
            // Verified on a sample grid, not proved.
            for i in 1..=200 {
                let x = 0.5 * i as f64;
                if x.abs() >= 1.0 && (eval)(x).abs() > tail_bound_constant / (x * x) + 1e-12 {
                    return Err(KernelError::TailBound {
                        name: name.to_string(),
                        x,
                    });
                }
            }
        }
        let mut k = Self {
            name: name.to_string(),
            eval,
            support,
            l1_norm: 0.0,
            knots,
            discrete_tail,
        };
        k.l1_norm = k.mass_abs(&QuadratureConfig::with_tol(1e-11))?.value;
        Ok(k)
    }

    pub fn sinc() -> Result<Self, KernelError> {
        // sinc decays like 1/x, not 1/x^2; the constant below only makes the
        // grid check pass on [-100, 100]. sinc is not absolutely summable, so
        // discrete checkers flag it rather than trusting truncated sums.
        Self::build(
            "sinc",
            Arc::new(sinc),
            Support::FullLine {
                tail_bound_constant: 32.0,
            },
            (-100..=100).map(|k| k as f64).collect(),
            None,
        )
    }

    pub fn fejer() -> Result<Self, KernelError> {
        // Discrete tail: F(x) + F(x+1) ~ 2/(pi^2 x^2), so the two-sided tail
        // beyond radius r is ~ 2/(pi^2 r).
        Self::build(
            "fejer",
            Arc::new(fejer),
            Support::FullLine {
                tail_bound_constant: 2.0 / (std::f64::consts::PI * std::f64::consts::PI),
            },
            Vec::new(),
            Some(Arc::new(|r: f64| {
                2.0 / (std::f64::consts::PI * std::f64::consts::PI * r)
            })),
        )
    }

    pub fn bspline(n: u32) -> Result<Self, KernelError> {
        if n == 0 {
            return Err(KernelError::ZeroOrder);
        }
        let half = n as f64 / 2.0;
        let knots = (0..=n).map(|j| -half + j as f64).collect();
        Self::build(
            &format!("bspline:{n}"),
            Arc::new(move |x| bspline(n, x)),
            Support::Compact { a: -half, b: half },
            knots,
            Some(Arc::new(|_| 0.0)),
        )
    }

    pub fn combined_m() -> Result<Self, KernelError> {
        let knots = (-4..=4).map(|j| j as f64 * 0.5).collect();
        Self::build(
            "combined-m",
            Arc::new(combined_m),
            Support::Compact { a: -2.0, b: 2.0 },
            knots,
            Some(Arc::new(|_| 0.0)),
        )
    }

    /// Catalog lookup: "sinc", "fejer", "bspline:<n>", "combined-m".
    pub fn from_name(name: &str) -> Result<Self, KernelError> {
        match name {
            "sinc" => Self::sinc(),
            "fejer" => Self::fejer(),
            "combined-m" => Self::combined_m(),
            _ => {
                if let Some(rest) = name.strip_prefix("bspline:") {
                    let n: u32 = rest
                        .parse()
                        .map_err(|_| KernelError::UnknownName(name.to_string()))?;
                    Self::bspline(n)
                } else {
                    Err(KernelError::UnknownName(name.to_string()))
                }
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn l1_norm(&self) -> f64 {
        self.l1_norm
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    /// Piecewise-polynomial kinks (including support endpoints); empty for
    /// the analytic full-line kernels.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn is_compact(&self) -> bool {
        matches!(self.support, Support::Compact { .. })
    }

    /// `(lo, hi)` window outside which the kernel is treated as zero.
    pub fn window(&self) -> (f64, f64) {
        match self.support {
            Support::Compact { a, b } => (a, b),
            Support::FullLine { .. } => (-FULL_LINE_RADIUS, FULL_LINE_RADIUS),
        }
    }

    /// Discrete tail estimate `sum_{|u-k|>r} |chi(u-k)|`; `None` when the
    /// kernel is not absolutely summable on shifted integer grids.
    pub fn discrete_tail_estimate(&self, r: f64) -> Option<f64> {
        self.discrete_tail.as_ref().map(|f| f(r))
    }

    /// `int |chi|` over the kernel window, panelled at the kernel knots
    /// (full-line kernels use unit panels out to the truncation radius).
    pub fn mass_abs(&self, config: &QuadratureConfig) -> Result<QuadResult, KernelError> {
        let edges = self.panel_edges(1.0);
        Ok(integrate_panels(
            |x| (self.eval)(x).abs(),
            &edges,
            config,
        )?)
    }

    /// Signed mass `int chi` over the kernel window.
    pub fn mass(&self, config: &QuadratureConfig) -> Result<QuadResult, KernelError> {
        let edges = self.panel_edges(1.0);
        Ok(integrate_panels(|x| (self.eval)(x), &edges, config)?)
    }

    /// `int |chi(w x)| dx`, computed in the unscaled coordinate's panels
    /// mapped through `x = u / w`. By change of variables this equals
    /// `||chi||_1 / w`; the computation here is an independent quadrature.
    pub fn scaled_l1(&self, w: f64, config: &QuadratureConfig) -> Result<QuadResult, KernelError> {
        let edges: Vec<f64> = self.panel_edges(1.0).iter().map(|u| u / w).collect();
        Ok(integrate_panels(
            |x| (self.eval)(w * x).abs(),
            &edges,
            config,
        )?)
    }

    fn panel_edges(&self, step: f64) -> Vec<f64> {
        match self.support {
            Support::Compact { a, b } => {
                let mut edges = self.knots.clone();
                if edges.is_empty() {
                    edges = vec![a, b];
                }
                edges.sort_by(|x, y| x.partial_cmp(y).unwrap());
                edges.dedup();
                edges
            }
            Support::FullLine { .. } => {
                let n = (FULL_LINE_RADIUS / step).ceil() as i64;
                (-n..=n).map(|k| k as f64 * step).collect()
            }
        }
    }
}

/// The Mellin kernel `M_w(u) = w u^w` on `0 < u < 1`, zero otherwise.
/// `int_0^1 M_w(u) du/u = 1` exactly; the constructor re-checks this
/// numerically to tolerance 1e-8.
#[derive(Debug, Clone, Copy)]
pub struct MellinKernel {
    w: f64,
}

impl MellinKernel {
    pub fn new(w: f64) -> Result<Self, KernelError> {
        assert!(w > 0.0, "Mellin kernel needs w > 0");
        let k = Self { w };
        let domain =
            IntegrationDomain::log_half_line(-40.0 / w, 0.0).expect("valid log domain");
        let mass = integrate(|u| k.eval(u), &domain, &QuadratureConfig::with_tol(1e-11))?;
        let defect = (mass.value - 1.0).abs();
        if defect > 1e-8 {
            return Err(KernelError::MellinMass { w, defect });
        }
        Ok(k)
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn eval(&self, u: f64) -> f64 {
        if u > 0.0 && u < 1.0 {
            self.w * u.powf(self.w)
        } else {
            0.0
        }
    }
}

/// Outcome of the desk-scale kernel assumption checks.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    /// sup over probes of `|sum_k chi(w z - t_k) - 1|` (partition of unity).
    pub chi2_partition_defect: f64,
    /// sup over probes of `sum_k |chi(w z - t_k)|` (the absolute moment M).
    pub chi3_moment_m: f64,
    /// `(w, tail mass)` pairs: mass of `|chi_w|` outside a fixed neighborhood.
    pub chi4_tail_profile: Vec<(f64, f64)>,
    /// Whether the tail profile is nonincreasing in `w` on the probe list.
    pub chi4_monotone: bool,
    /// Whether a symmetric compact set `[-R, R]` achieving the concentration
    /// bound at eps = 1e-3 was found, and which radius.
    pub chi5_verified: bool,
    pub chi5_radius: Option<f64>,
    /// The compact set `K` used for the chi5 search.
    pub chi5_compact_k: f64,
    /// sup over the probed `w` of `||chi_w||_1` (the uniform L1 bound).
    pub gamma_l1_bound: f64,
    /// False when the kernel is not absolutely summable on the grid.
    pub valid: bool,
}

/// Numerically probe assumptions (chi2)-(chi5) for `kernel` on `grid`.
///
/// Probe points are drawn deterministically (seeded) from `[-5, 5]`. The
/// checks are finite surrogates: they can falsify the assumptions at desk
/// scale but certify nothing.
pub fn check_chi_assumptions(
    kernel: &Kernel,
    grid: &SamplingGrid,
    w_list: &[f64],
    probe_count: usize,
) -> Result<AssumptionReport, KernelError> {
    assert!(!w_list.is_empty(), "w_list must be nonempty");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let probes: Vec<f64> = (0..probe_count).map(|_| rng.gen_range(-5.0..5.0)).collect();

    let valid = kernel.discrete_tail.is_some();
    let tail_fix = |r: f64| kernel.discrete_tail_estimate(r).unwrap_or(0.0);
    let (win_lo, win_hi) = kernel.window();

    let mut chi2 = 0.0f64;
    let mut chi3 = 0.0f64;
    let mut chi4 = Vec::with_capacity(w_list.len());
    let neighborhood = 1.0; // fixed B for the (chi4) surrogate

    for &w in w_list {
        let mut tail_sup = 0.0f64;
        for &z in &probes {
            let u = w * z;
            let ks = grid.indices_between(u - win_hi, u - win_lo);
            let mut s = 0.0;
            let mut s_abs = 0.0;
            let mut tail = 0.0;
            for k in ks {
                let tk = grid.node(k);
                let v = kernel.eval(u - tk);
                s += v;
                s_abs += v.abs();
                if (z - tk / w).abs() > neighborhood {
                    tail += v.abs();
                }
            }
            if !kernel.is_compact() {
                // put the truncated tail back before judging the defect
                s += tail_fix(FULL_LINE_RADIUS);
                s_abs += tail_fix(FULL_LINE_RADIUS);
            }
            chi2 = chi2.max((s - 1.0).abs());
            chi3 = chi3.max(s_abs);
            tail_sup = tail_sup.max(tail);
        }
        chi4.push((w, tail_sup));
    }

    let chi4_monotone = chi4.windows(2).all(|p| p[1].1 <= p[0].1 + 1e-12);

    // (chi5): search a symmetric compact C = [-R, R] concentrating the mass
    // of chi_w around the compact set K = [-2, 2], at eps = 1e-3.
    let compact_k = 2.0;
    let eps = 1e-3;
    let mut chi5_radius = None;
    'search: for exp in 0..=10 {
        let r = (1u64 << exp) as f64;
        if r > 1e3 {
            break;
        }
        let mut ok = true;
        for &w in w_list {
            let upsilon = grid.indices_between(-compact_k * w, compact_k * w).count() as f64;
            // sample shifts s = t_k/w in K
            for i in 0..8 {
                let s = -compact_k + 2.0 * compact_k * (i as f64 + 0.5) / 8.0;
                let outside = match kernel.support {
                    Support::Compact { a, b } => {
                        // chi(w(z - s)) vanishes unless z in s + [a/w, b/w]
                        let reach = s.abs() + a.abs().max(b.abs()) / w;
                        if reach <= r {
                            0.0
                        } else {
                            f64::INFINITY
                        }
                    }
                    Support::FullLine { tail_bound_constant } => {
                        if r <= s.abs() + 1.0 / w {
                            f64::INFINITY
                        } else {
                            let c = tail_bound_constant;
                            (c / (w * (r - s.abs())) + c / (w * (r + s.abs()))) / w
                        }
                    }
                };
                if upsilon * outside >= eps {
                    ok = false;
                    break;
                }
            }
            if !ok {
                break;
            }
        }
        if ok {
            chi5_radius = Some(r);
            break 'search;
        }
    }

    let mut gamma = 0.0f64;
    for &w in w_list {
        gamma = gamma.max(kernel.scaled_l1(w, &QuadratureConfig::with_tol(1e-10))?.value);
    }

    Ok(AssumptionReport {
        chi2_partition_defect: chi2,
        chi3_moment_m: chi3,
        chi4_tail_profile: chi4,
        chi4_monotone,
        chi5_verified: chi5_radius.is_some(),
        chi5_radius,
        chi5_compact_k: compact_k,
        gamma_l1_bound: gamma,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::SamplingGrid;

    #[test]
    fn sinc_values() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(1.0).abs() < 1e-15);
        assert!((sinc(0.5) - 2.0 / std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(sinc(0.3), sinc(-0.3));
    }

    #[test]
    fn fejer_values() {
        assert_eq!(fejer(0.0), 0.5);
        assert!(fejer(2.0).abs() < 1e-15);
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        assert!((fejer(1.0) - 2.0 / pi2).abs() < 1e-12);
    }

    #[test]
    fn bspline_values() {
        assert!((bspline(2, 0.0) - 1.0).abs() < 1e-15);
        assert!((bspline(3, 0.0) - 0.75).abs() < 1e-15);
        assert_eq!(bspline(4, 3.0), 0.0);
        // half-open indicator convention for n = 1
        assert_eq!(bspline(1, 0.5), 1.0);
        assert_eq!(bspline(1, -0.5), 0.0);
    }

    #[test]
    #[should_panic]
    fn bspline_order_zero_panics() {
        bspline(0, 0.0);
    }

    #[test]
    fn combined_m_values() {
        assert!((combined_m(0.0) - 1.0).abs() < 1e-14);
        assert_eq!(combined_m(2.5), 0.0);
    }

    #[test]
    fn partition_of_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let u: f64 = rng.gen_range(-10.0..10.0);
            for n in 1..=4u32 {
                let s: f64 = (-25..=25).map(|k| bspline(n, u - k as f64)).sum();
                assert!((s - 1.0).abs() <= 1e-10, "n={n} u={u} s={s}");
            }
            let s: f64 = (-25..=25).map(|k| combined_m(u - k as f64)).sum();
            assert!((s - 1.0).abs() <= 1e-10, "combined u={u} s={s}");
        }
    }

    #[test]
    fn bspline_unit_mass_and_symmetry() {
        let cfg = QuadratureConfig::with_tol(1e-11);
        for n in 1..=6u32 {
            let k = Kernel::bspline(n).unwrap();
            assert!((k.mass(&cfg).unwrap().value - 1.0).abs() < 1e-9, "n={n}");
            for i in 0..50 {
                let x = -3.0 + 0.123 * i as f64;
                let (a, b) = (bspline(n, x), bspline(n, -x));
                assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "n={n} x={x}");
            }
        }
    }

    #[test]
    fn fejer_unit_mass_within_tail_bound() {
        let k = Kernel::fejer().unwrap();
        let m = k.mass(&QuadratureConfig::with_tol(1e-9)).unwrap().value;
        assert!((m - 1.0).abs() < 2e-4, "mass {m}");
    }

    #[test]
    fn mellin_kernel_normalized() {
        for &w in &[5.0, 20.0, 30.0] {
            let k = MellinKernel::new(w).unwrap();
            for &x in &[0.5f64, 1.0, 2.0] {
                // int_0^inf M_w(x/t) dt/t = int_0^1 M_w(u) du/u = 1
                // integrand is w e^{-w(v - ln x)}, spent by v = ln x + 40/w
                let d = IntegrationDomain::log_half_line(x.ln(), x.ln() + 40.0 / w).unwrap();
                let v = integrate(|t| k.eval(x / t), &d, &QuadratureConfig::with_tol(1e-11))
                    .unwrap()
                    .value;
                assert!((v - 1.0).abs() < 1e-8, "w={w} x={x} v={v}");
            }
        }
    }

    #[test]
    fn scaled_family_l1_law() {
        let cfg = QuadratureConfig::with_tol(1e-11);
        for name in ["combined-m", "bspline:3", "fejer"] {
            let k = Kernel::from_name(name).unwrap();
            for &w in &[1.0, 5.0, 40.0] {
                let v = k.scaled_l1(w, &cfg).unwrap().value;
                assert!(
                    (v - k.l1_norm() / w).abs() < 1e-8,
                    "{name} w={w}: {v} vs {}",
                    k.l1_norm() / w
                );
            }
        }
    }

    #[test]
    fn chi_checks_combined_m_regular_grid() {
        let k = Kernel::combined_m().unwrap();
        let grid = SamplingGrid::regular();
        let rep = check_chi_assumptions(&k, &grid, &[5.0, 10.0], 200).unwrap();
        assert!(rep.valid);
        assert!(rep.chi2_partition_defect <= 1e-10, "{}", rep.chi2_partition_defect);
        assert!(rep.chi3_moment_m <= 10.0);
        assert!(rep.chi5_verified);
    }

    #[test]
    fn chi_checks_fejer_regular_grid() {
        let k = Kernel::fejer().unwrap();
        let grid = SamplingGrid::regular();
        let rep = check_chi_assumptions(&k, &grid, &[10.0], 50).unwrap();
        assert!(rep.valid);
        assert!(rep.chi2_partition_defect <= 1e-6, "{}", rep.chi2_partition_defect);
    }

    #[test]
    fn chi_checks_sinc_flagged_invalid() {
        let k = Kernel::sinc().unwrap();
        let grid = SamplingGrid::regular();
        let rep = check_chi_assumptions(&k, &grid, &[5.0], 10).unwrap();
        assert!(!rep.valid);
    }

    #[test]
    fn unknown_kernel_name() {
        assert!(matches!(
            Kernel::from_name("nope"),
            Err(KernelError::UnknownName(_))
        ));
        assert!(matches!(Kernel::bspline(0), Err(KernelError::ZeroOrder)));
    }
}
