//! Sampling grids, sample functionals, and the operator family T1..T7.
//!
//! The discrete operators (T1 generalized sampling, T2 Kantorovich sampling,
//! T3 Durrmeyer sampling) sum kernel-weighted sample functionals over a grid;
//! the integral operators are the convolution (T4), its Kantorovich version
//! (T5), the Mellin convolution (T6) and its Kantorovich version (T7).
//!
//! Kernel scaling: discrete operators use `chi_w(x) = chi(w x)`; the
//! continuous-parameter operators T4/T5 use the mass-preserving scaling
//! `chi_w(x) = w chi(w x)`, which is the unique choice giving the continuous
//! partition condition `int chi_w = 1`. The Mellin kernel family needs no
//! extra scaling.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::kernels::{Kernel, KernelError, Support};
use crate::orlicz::PhiFunction;
use crate::quadrature::{
    integrate_panels, integrate_with_breakpoints, IntegrationDomain, QuadratureConfig,
    QuadratureError,
};
use crate::signals::PiecewiseSignal;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("operator {id:?} requires a sampling grid")]
    MissingGrid { id: OperatorId },
    #[error("operator {id:?} is incompatible with functional kind {kind}")]
    KindMismatch { id: OperatorId, kind: &'static str },
    #[error("jittered evaluation requires a jittered grid")]
    NoJitter,
    #[error("Mellin operators require x > 0, got {x}")]
    NonPositivePoint { x: f64 },
    #[error("Durrmeyer auxiliary kernel must have unit mass; defect {defect} > 1e-6")]
    PsiMass { defect: f64 },
    #[error("non-finite sample for {kind} at node {at} (w = {w})")]
    NonFiniteSample { kind: &'static str, at: f64, w: f64 },
    #[error("unknown operator id '{0}' (expected t1..t7)")]
    UnknownId(String),
    #[error("invalid sampling grid: {0}")]
    BadGrid(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// The sample sequence `(t_k)` with gap bounds `delta < t_{k+1}-t_k < Delta`,
/// plus an optional time-jitter `j_k(w)`.
#[derive(Clone)]
pub struct SamplingGrid {
    node: Arc<dyn Fn(i64) -> f64 + Send + Sync>,
    jitter: Option<Arc<dyn Fn(i64, f64) -> f64 + Send + Sync>>,
    gap_min: f64,
    gap_max: f64,
    name: String,
}

impl std::fmt::Debug for SamplingGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SamplingGrid")
            .field("name", &self.name)
            .field("gap_min", &self.gap_min)
            .field("gap_max", &self.gap_max)
            .field("jittered", &self.jitter.is_some())
            .finish()
    }
}

impl SamplingGrid {
    /// `t_k = k`, gap bounds `(1/2, 3/2)`.
    pub fn regular() -> Self {
        Self {
            node: Arc::new(|k| k as f64),
            jitter: None,
            gap_min: 0.5,
            gap_max: 1.5,
            name: "regular".into(),
        }
    }

    /// Irregular grid with declared gap bounds; monotonicity and the bounds
    /// are probed on `|k| <= 1000` at construction.
    pub fn irregular(
        name: &str,
        node: Arc<dyn Fn(i64) -> f64 + Send + Sync>,
        gap_min: f64,
        gap_max: f64,
    ) -> Result<Self, OperatorError> {
        let g = Self {
            node,
            jitter: None,
            gap_min,
            gap_max,
            name: name.into(),
        };
        for k in -1000..1000 {
            let gap = g.node(k + 1) - g.node(k);
            if !(gap > g.gap_min && gap < g.gap_max) {
                return Err(OperatorError::BadGrid(format!(
                    "gap t_{}-t_{} = {gap} outside ({}, {})",
                    k + 1,
                    k,
                    g.gap_min,
                    g.gap_max
                )));
            }
        }
        Ok(g)
    }

    /// The built-in irregular example `t_k = k + 0.3 sin k`.
    pub fn perturbed() -> Self {
        Self::irregular(
            "irregular:perturbed",
            Arc::new(|k| k as f64 + 0.3 * (k as f64).sin()),
            0.3,
            1.7,
        )
        .expect("perturbed grid satisfies its gap bounds")
    }

    /// Attach a jitter `j_k(w)`; the vanishing-in-w requirement is probed by
    /// the grid checker, not enforced here.
    pub fn with_jitter(mut self, jitter: Arc<dyn Fn(i64, f64) -> f64 + Send + Sync>) -> Self {
        self.jitter = Some(jitter);
        self.name = format!("{}+jitter", self.name);
        self
    }

    /// Grid spec strings: `regular`, `irregular:perturbed`, `jitter:<eta>`
    /// (regular grid with `j_k(w) = eta sin(k)/w`).
    pub fn from_spec(spec: &str) -> Result<Self, OperatorError> {
        match spec {
            "regular" => Ok(Self::regular()),
            "irregular:perturbed" => Ok(Self::perturbed()),
            _ => {
                if let Some(rest) = spec.strip_prefix("jitter:") {
                    let eta: f64 = rest
                        .parse()
                        .map_err(|_| OperatorError::BadGrid(format!("bad jitter '{spec}'")))?;
                    Ok(Self::regular()
                        .with_jitter(Arc::new(move |k, w| eta * (k as f64).sin() / w)))
                } else {
                    Err(OperatorError::BadGrid(format!("unknown grid spec '{spec}'")))
                }
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn gap_min(&self) -> f64 {
        self.gap_min
    }

    pub fn gap_max(&self) -> f64 {
        self.gap_max
    }

    pub fn node(&self, k: i64) -> f64 {
        (self.node)(k)
    }

    pub fn gap(&self, k: i64) -> f64 {
        self.node(k + 1) - self.node(k)
    }

    pub fn jitter(&self, k: i64, w: f64) -> f64 {
        self.jitter.as_ref().map_or(0.0, |j| j(k, w))
    }

    pub fn is_jittered(&self) -> bool {
        self.jitter.is_some()
    }

    /// Smallest `k` with `t_k >= x` (exponential then binary search).
    fn lower_index(&self, x: f64) -> i64 {
        let (mut lo, mut hi);
        if self.node(0) >= x {
            let mut step = 1i64;
            hi = 0;
            while self.node(hi - step) >= x {
                step *= 2;
                if step > 1 << 40 {
                    break;
                }
            }
            lo = hi - step;
        } else {
            let mut step = 1i64;
            lo = 0;
            while self.node(lo + step) < x {
                step *= 2;
                if step > 1 << 40 {
                    break;
                }
            }
            hi = lo + step;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.node(mid) >= x {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Indices `k` with `lo <= t_k <= hi` (possibly empty).
    pub fn indices_between(&self, lo: f64, hi: f64) -> std::ops::RangeInclusive<i64> {
        let k0 = self.lower_index(lo);
        let kh = self.lower_index(hi);
        let k1 = if self.node(kh) <= hi { kh } else { kh - 1 };
        k0..=k1
    }

    /// Probe `sup_k |j_k(w)|` over `|k| <= 200` for each `w`; used by the
    /// grid checker to confirm the jitter vanishes uniformly.
    pub fn jitter_profile(&self, w_list: &[f64]) -> Vec<(f64, f64)> {
        w_list
            .iter()
            .map(|&w| {
                let sup = (-200..=200)
                    .map(|k| self.jitter(k, w).abs())
                    .fold(0.0f64, f64::max);
                (w, sup)
            })
            .collect()
    }
}

/// The family of sample functionals `L_{h_w(t)}`.
#[derive(Clone)]
pub enum FunctionalKind {
    /// `L f = f(t_k / w)`
    Point,
    /// `L f = w/(t_{k+1}-t_k) int_{t_k/w}^{t_{k+1}/w} f`
    Average,
    /// `L f = w int psi(w u - t_k) f(u) du`
    Durrmeyer(Kernel),
    /// `L f = f(t)` on the half-line
    MellinPoint,
    /// `L f = 1/(2 ln(1+1/w)) int_{t w/(w+1)}^{t (w+1)/w} f(u) du/u`
    MellinAverage,
}

impl FunctionalKind {
    fn label(&self) -> &'static str {
        match self {
            Self::Point => "point",
            Self::Average => "average",
            Self::Durrmeyer(_) => "durrmeyer",
            Self::MellinPoint => "mellin-point",
            Self::MellinAverage => "mellin-average",
        }
    }
}

#[derive(Clone)]
pub struct SampleFunctional {
    kind: FunctionalKind,
    upsilon: f64,
}

impl SampleFunctional {
    pub fn point() -> Self {
        Self {
            kind: FunctionalKind::Point,
            upsilon: 1.0,
        }
    }

    pub fn average() -> Self {
        Self {
            kind: FunctionalKind::Average,
            upsilon: 1.0,
        }
    }

    /// The Durrmeyer functional with auxiliary kernel `psi`; requires
    /// `int psi = 1` (tolerance 1e-6). Its operator norm is `||psi||_1`.
    pub fn durrmeyer(psi: Kernel) -> Result<Self, OperatorError> {
        let mass = psi.mass(&QuadratureConfig::with_tol(1e-9))?.value;
        let defect = (mass - 1.0).abs();
        // full-line psi carries truncated mass; allow the analytic tail on top
        let slack = match psi.support() {
            Support::Compact { .. } => 1e-6,
            Support::FullLine { .. } => 1e-6 + 3e-4,
        };
        if defect > slack {
            return Err(OperatorError::PsiMass { defect });
        }
        let upsilon = psi.l1_norm();
        Ok(Self {
            kind: FunctionalKind::Durrmeyer(psi),
            upsilon,
        })
    }

    pub fn mellin_point() -> Self {
        Self {
            kind: FunctionalKind::MellinPoint,
            upsilon: 1.0,
        }
    }

    pub fn mellin_average() -> Self {
        Self {
            kind: FunctionalKind::MellinAverage,
            upsilon: 1.0,
        }
    }

    pub fn kind(&self) -> &FunctionalKind {
        &self.kind
    }

    /// The declared uniform bound on `|L f| / ||f||_inf`.
    pub fn upsilon_bound(&self) -> f64 {
        self.upsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorId {
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
    T7,
}

impl OperatorId {
    pub fn from_str(s: &str) -> Result<Self, OperatorError> {
        match s {
            "t1" => Ok(Self::T1),
            "t2" => Ok(Self::T2),
            "t3" => Ok(Self::T3),
            "t4" => Ok(Self::T4),
            "t5" => Ok(Self::T5),
            "t6" => Ok(Self::T6),
            "t7" => Ok(Self::T7),
            _ => Err(OperatorError::UnknownId(s.to_string())),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::T1 => "t1",
            Self::T2 => "t2",
            Self::T3 => "t3",
            Self::T4 => "t4",
            Self::T5 => "t5",
            Self::T6 => "t6",
            Self::T7 => "t7",
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Self::T1 | Self::T2 | Self::T3)
    }

    pub fn is_mellin(&self) -> bool {
        matches!(self, Self::T6 | Self::T7)
    }
}

/// Per-evaluation truncation windows.
#[derive(Debug, Clone, Copy)]
pub struct Truncation {
    /// Summation radius for full-line kernels in scaled coordinates.
    pub full_line_radius: f64,
    /// Integration radius for a full-line Durrmeyer psi, scaled coordinates.
    pub psi_radius: f64,
    /// The Mellin integrand is cut where `w (x/t)^w` falls below this.
    pub mellin_floor: f64,
    /// Relative discarded-mass target; exceeding it clears `certified`.
    pub tail_tol: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            full_line_radius: crate::kernels::FULL_LINE_RADIUS,
            psi_radius: 1e4,
            mellin_floor: 1e-16,
            tail_tol: 1e-8,
        }
    }
}

/// A fully specified operator: id, kernel, grid (discrete ids only),
/// functional, truncation windows.
#[derive(Clone)]
pub struct OperatorSpec {
    id: OperatorId,
    kernel: Option<Kernel>,
    grid: Option<SamplingGrid>,
    functional: SampleFunctional,
    pub truncation: Truncation,
    /// Replace the exact T7 prefactor `1/(2 ln(1+1/w))` by `w/2`.
    pub t7_simple_prefactor: bool,
}

impl OperatorSpec {
    pub fn t1(kernel: Kernel, grid: SamplingGrid) -> Self {
        Self::discrete(OperatorId::T1, kernel, grid, SampleFunctional::point())
    }

    pub fn t2(kernel: Kernel, grid: SamplingGrid) -> Self {
        Self::discrete(OperatorId::T2, kernel, grid, SampleFunctional::average())
    }

    pub fn t3(kernel: Kernel, grid: SamplingGrid, psi: Kernel) -> Result<Self, OperatorError> {
        Ok(Self::discrete(
            OperatorId::T3,
            kernel,
            grid,
            SampleFunctional::durrmeyer(psi)?,
        ))
    }

    fn discrete(
        id: OperatorId,
        kernel: Kernel,
        grid: SamplingGrid,
        functional: SampleFunctional,
    ) -> Self {
        Self {
            id,
            kernel: Some(kernel),
            grid: Some(grid),
            functional,
            truncation: Truncation::default(),
            t7_simple_prefactor: false,
        }
    }

    pub fn t4(kernel: Kernel) -> Self {
        Self {
            id: OperatorId::T4,
            kernel: Some(kernel),
            grid: None,
            functional: SampleFunctional::point(),
            truncation: Truncation::default(),
            t7_simple_prefactor: false,
        }
    }

    pub fn t5(kernel: Kernel) -> Self {
        Self {
            id: OperatorId::T5,
            kernel: Some(kernel),
            grid: None,
            functional: SampleFunctional::average(),
            truncation: Truncation::default(),
            t7_simple_prefactor: false,
        }
    }

    pub fn t6() -> Self {
        Self {
            id: OperatorId::T6,
            kernel: None,
            grid: None,
            functional: SampleFunctional::mellin_point(),
            truncation: Truncation::default(),
            t7_simple_prefactor: false,
        }
    }

    pub fn t7() -> Self {
        Self {
            id: OperatorId::T7,
            kernel: None,
            grid: None,
            functional: SampleFunctional::mellin_average(),
            truncation: Truncation::default(),
            t7_simple_prefactor: false,
        }
    }

    pub fn id(&self) -> OperatorId {
        self.id
    }

    pub fn kernel(&self) -> Option<&Kernel> {
        self.kernel.as_ref()
    }

    pub fn grid(&self) -> Option<&SamplingGrid> {
        self.grid.as_ref()
    }

    pub fn functional(&self) -> &SampleFunctional {
        &self.functional
    }
}

/// Operator output plus a truncation/quadrature certification flag.
#[derive(Debug, Clone, Copy)]
pub struct OpValue {
    pub value: f64,
    pub certified: bool,
}

/// Evaluates one operator at fixed `(w, f)`, caching the discrete sample
/// functionals (they do not depend on the evaluation point).
pub struct OperatorEvaluator<'a> {
    spec: &'a OperatorSpec,
    w: f64,
    f: &'a PiecewiseSignal,
    use_jitter: bool,
    cache: RefCell<HashMap<i64, (f64, bool)>>,
    quad: QuadratureConfig,
}

impl<'a> OperatorEvaluator<'a> {
    pub fn new(spec: &'a OperatorSpec, w: f64, f: &'a PiecewiseSignal) -> Self {
        assert!(w > 0.0, "operator parameter w must be positive");
        Self {
            spec,
            w,
            f,
            use_jitter: false,
            cache: RefCell::new(HashMap::new()),
            quad: QuadratureConfig::with_tol(1e-10),
        }
    }

    pub fn with_jitter(mut self) -> Result<Self, OperatorError> {
        let grid = self.spec.grid().ok_or(OperatorError::MissingGrid {
            id: self.spec.id(),
        })?;
        if !grid.is_jittered() {
            return Err(OperatorError::NoJitter);
        }
        self.use_jitter = true;
        Ok(self)
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn eval(&self, x: f64) -> Result<OpValue, OperatorError> {
        match self.spec.id {
            OperatorId::T1 | OperatorId::T2 | OperatorId::T3 => self.eval_discrete(x),
            OperatorId::T4 | OperatorId::T5 => self.eval_convolution(x),
            OperatorId::T6 | OperatorId::T7 => self.eval_mellin(x),
        }
    }

    /// The discrete sample functional at node `k` (cached).
    pub fn sample(&self, k: i64) -> Result<(f64, bool), OperatorError> {
        if let Some(&v) = self.cache.borrow().get(&k) {
            return Ok(v);
        }
        let grid = self.spec.grid().ok_or(OperatorError::MissingGrid {
            id: self.spec.id(),
        })?;
        let w = self.w;
        let tk = grid.node(k);
        let v = match self.spec.functional.kind() {
            FunctionalKind::Point => {
                let shift = if self.use_jitter { grid.jitter(k, w) } else { 0.0 };
                (self.f.eval(tk / w + shift), true)
            }
            FunctionalKind::Average => {
                let tk1 = grid.node(k + 1);
                let avg = w / (tk1 - tk) * self.f.integral(tk / w, tk1 / w);
                (avg, true)
            }
            FunctionalKind::Durrmeyer(psi) => self.durrmeyer_sample(psi, tk)?,
            other => {
                return Err(OperatorError::KindMismatch {
                    id: self.spec.id,
                    kind: other.label(),
                })
            }
        };
        if !v.0.is_finite() {
            return Err(OperatorError::NonFiniteSample {
                kind: self.spec.functional.kind().label(),
                at: tk,
                w,
            });
        }
        self.cache.borrow_mut().insert(k, v);
        Ok(v)
    }

    /// `w int psi(w u - t_k) f(u) du`, computed in the scaled variable
    /// `v = w u - t_k` as `int psi(v) f((v + t_k)/w) dv`.
    fn durrmeyer_sample(&self, psi: &Kernel, tk: f64) -> Result<(f64, bool), OperatorError> {
        let w = self.w;
        let map_bp = |bp: f64| w * bp - tk;
        match psi.support() {
            Support::Compact { a, b } => {
                let bps: Vec<f64> = self.f.breakpoints().iter().map(|&bp| map_bp(bp)).collect();
                let d = IntegrationDomain::finite(a, b).expect("compact support");
                let r = integrate_with_breakpoints(
                    |v| psi.eval(v) * self.f.eval((v + tk) / w),
                    &d,
                    &bps,
                    &self.quad,
                )?;
                Ok((r.value, r.certified))
            }
            Support::FullLine { tail_bound_constant } => {
                let radius = self.spec.truncation.psi_radius;
                let n = radius.ceil() as i64;
                let mut edges: Vec<f64> = (-n..=n).map(|k| k as f64).collect();
                for &bp in self.f.breakpoints() {
                    let v = map_bp(bp);
                    if v > -radius && v < radius {
                        edges.push(v);
                    }
                }
                edges.sort_by(|x, y| x.partial_cmp(y).unwrap());
                edges.dedup();
                // the truncation error (~1e-4 for the Fejer tail) dominates,
                // so a tight quadrature tolerance would be wasted effort here
                let r = integrate_panels(
                    |v| psi.eval(v) * self.f.eval((v + tk) / w),
                    &edges,
                    &QuadratureConfig::with_tol(1e-6),
                )?;
                // discarded mass <= ||f||_inf * 2c/radius
                let tail = 2.0 * tail_bound_constant / radius * self.f.sup_norm();
                Ok((r.value, r.certified && tail <= self.spec.truncation.tail_tol))
            }
        }
    }

    fn eval_discrete(&self, x: f64) -> Result<OpValue, OperatorError> {
        let kernel = self.spec.kernel().expect("discrete operators carry a kernel");
        let grid = self.spec.grid().ok_or(OperatorError::MissingGrid {
            id: self.spec.id(),
        })?;
        let w = self.w;
        let u = w * x;
        let (lo, hi) = match kernel.support() {
            Support::Compact { a, b } => (a, b),
            Support::FullLine { .. } => (
                -self.spec.truncation.full_line_radius,
                self.spec.truncation.full_line_radius,
            ),
        };
        let mut acc = 0.0;
        let mut certified = true;
        for k in grid.indices_between(u - hi, u - lo) {
            let chi = kernel.eval(u - grid.node(k));
            if chi == 0.0 {
                continue;
            }
            let (s, cert) = self.sample(k)?;
            acc += chi * s;
            certified &= cert;
        }
        if !kernel.is_compact() {
            let tail = kernel
                .discrete_tail_estimate(self.spec.truncation.full_line_radius)
                .unwrap_or(f64::INFINITY)
                * self.f.sup_norm()
                * self.spec.functional.upsilon_bound();
            certified &= tail <= self.spec.truncation.tail_tol;
        }
        Ok(OpValue {
            value: acc,
            certified,
        })
    }

    /// T4/T5 in the scaled variable `v = w (x - t)`:
    /// `int w chi(w(x-t)) L_t f dt = int chi(v) L_{x - v/w} f dv`.
    fn eval_convolution(&self, x: f64) -> Result<OpValue, OperatorError> {
        let kernel = self.spec.kernel().expect("convolution operators carry a kernel");
        let w = self.w;
        let is_avg = matches!(self.spec.functional.kind(), FunctionalKind::Average);
        let integrand = |v: f64| {
            let t = x - v / w;
            let sample = if is_avg {
                0.5 * w * self.f.integral(t - 1.0 / w, t + 1.0 / w)
            } else {
                self.f.eval(t)
            };
            kernel.eval(v) * sample
        };
        let mut edges: Vec<f64> = kernel.knots().to_vec();
        let (lo, hi) = kernel.window();
        if edges.is_empty() {
            let n = hi.ceil() as i64;
            edges = (-n..=n).map(|k| k as f64).collect();
        }
        for &bp in self.f.breakpoints() {
            // v where the sample point (or its averaging window) crosses bp
            let base = w * (x - bp);
            let candidates: &[f64] = if is_avg {
                &[base - 1.0, base, base + 1.0]
            } else {
                &[base]
            };
            for &v in candidates {
                if v > lo && v < hi {
                    edges.push(v);
                }
            }
        }
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        edges.dedup();
        let r = integrate_panels(integrand, &edges, &self.quad)?;
        let mut certified = r.certified;
        if let Support::FullLine { tail_bound_constant } = kernel.support() {
            let tail = 2.0 * tail_bound_constant / hi * self.f.sup_norm();
            certified &= tail <= self.spec.truncation.tail_tol;
        }
        Ok(OpValue {
            value: r.value,
            certified,
        })
    }

    /// T6/T7 in the log variable `t = x e^s`:
    /// `int_0^inf M_w(x/t) L_t f dt/t = int_0^{s_max} w e^{-w s} L_{x e^s} f ds`.
    fn eval_mellin(&self, x: f64) -> Result<OpValue, OperatorError> {
        if x <= 0.0 {
            return Err(OperatorError::NonPositivePoint { x });
        }
        let w = self.w;
        let s_max = (w / self.spec.truncation.mellin_floor).ln() / w;
        let is_avg = matches!(self.spec.functional.kind(), FunctionalKind::MellinAverage);
        let prefactor = if self.spec.t7_simple_prefactor {
            0.5 * w
        } else {
            1.0 / (2.0 * (1.0 + 1.0 / w).ln())
        };
        let window_lo = w / (w + 1.0);
        let window_hi = (w + 1.0) / w;
        let integrand = |s: f64| {
            let t = x * s.exp();
            let sample = if is_avg {
                prefactor * self.f.integral_log(t * window_lo, t * window_hi)
            } else {
                self.f.eval(t)
            };
            w * (-w * s).exp() * sample
        };
        let mut edges = vec![0.0, s_max];
        for &bp in self.f.breakpoints() {
            if bp <= 0.0 {
                continue;
            }
            let base = (bp / x).ln();
            let candidates: &[f64] = if is_avg {
                // window edge hits bp when t * window = bp
                &[base, base - window_lo.ln(), base - window_hi.ln()]
            } else {
                &[base]
            };
            for &s in candidates {
                if s > 0.0 && s < s_max {
                    edges.push(s);
                }
            }
        }
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        edges.dedup();
        let r = integrate_panels(integrand, &edges, &self.quad)?;
        Ok(OpValue {
            value: r.value,
            certified: r.certified,
        })
    }
}

/// One-shot evaluation; sweeps should hold an [`OperatorEvaluator`] to reuse
/// its sample cache.
pub fn apply_operator(
    spec: &OperatorSpec,
    w: f64,
    f: &PiecewiseSignal,
    x: f64,
) -> Result<OpValue, OperatorError> {
    OperatorEvaluator::new(spec, w, f).eval(x)
}

/// T1 with time-jittered samples `f(t_k/w + j_k(w))`; requires the spec's
/// grid to carry a jitter.
pub fn jittered_operator(
    spec: &OperatorSpec,
    w: f64,
    f: &PiecewiseSignal,
    x: f64,
) -> Result<OpValue, OperatorError> {
    if spec.id() != OperatorId::T1 {
        return Err(OperatorError::KindMismatch {
            id: spec.id(),
            kind: "jitter (T1 only)",
        });
    }
    OperatorEvaluator::new(spec, w, f).with_jitter()?.eval(x)
}

/// Desk-scale probe of the functional-side assumptions.
#[derive(Debug, Clone)]
pub struct LAssumptionReport {
    pub upsilon_declared: f64,
    /// max over probed nodes of `|L f| / ||f||_inf`
    pub upsilon_empirical: f64,
    /// `(w, sup |L f - f(z)|)` over probe pairs with `|z - h_w(t)|` below the
    /// measured continuity radius
    pub l2_profile: Vec<(f64, f64)>,
    /// `(w, tail)` of `sum/int phi(|L f|)` outside the enlarged support
    pub l3_tail: Vec<(f64, f64)>,
    /// the support enlargement used for the L3 window
    pub l3_enlargement: f64,
    /// the tail vanishes identically (point/average functionals on compact f)
    pub l3_exactly_zero: bool,
    /// a witness `(k, |L_{t_k/w} f|)` outside the enlarged support, when the
    /// functional is non-local (Durrmeyer)
    pub non_locality_witness: Option<(i64, f64)>,
    /// `(w, lhs, rhs)` of the modular-continuity inequality
    pub l4_rows: Vec<(f64, f64, f64)>,
    pub l4_ok: bool,
    /// Durrmeyer only reaches modular convergence; norm convergence on
    /// compactly supported continuous signals is not available
    pub modular_only: bool,
    pub notes: Vec<String>,
}

pub fn check_l_assumptions(
    spec: &OperatorSpec,
    f: &PiecewiseSignal,
    phi: &PhiFunction,
    w_list: &[f64],
    _epsilon: f64,
) -> Result<LAssumptionReport, OperatorError> {
    assert!(!w_list.is_empty());
    let sup_f = f.sup_norm().max(1e-300);
    let upsilon = spec.functional().upsilon_bound();
    let mut notes = Vec::new();

    let is_durrmeyer = matches!(spec.functional().kind(), FunctionalKind::Durrmeyer(_));
    let discrete = spec.id().is_discrete();

    // (L1): empirical operator norm on the probe set
    let mut upsilon_emp = 0.0f64;
    for &w in w_list {
        if discrete {
            let ev = OperatorEvaluator::new(spec, w, f);
            let grid = spec.grid().unwrap();
            for k in grid.indices_between(-10.0 * w, 10.0 * w) {
                upsilon_emp = upsilon_emp.max(ev.sample(k)?.0.abs() / sup_f);
            }
        } else {
            for i in 0..200 {
                let t = if spec.id().is_mellin() {
                    0.05 + 10.0 * i as f64 / 200.0
                } else {
                    -10.0 + 20.0 * i as f64 / 200.0
                };
                let v = continuous_sample(spec, w, f, t);
                upsilon_emp = upsilon_emp.max(v.abs() / sup_f);
            }
        }
    }

    // (L2): continuity preservation at probe points inside continuity intervals
    let radius = 0.25;
    let mut l2 = Vec::new();
    for &w in w_list {
        let mut dev = 0.0f64;
        for &(a, b) in f.continuity_intervals() {
            let z = probe_point(a, b, spec.id().is_mellin());
            let Some(z) = z else { continue };
            if discrete {
                let ev = OperatorEvaluator::new(spec, w, f);
                let grid = spec.grid().unwrap();
                for k in grid.indices_between(w * (z - radius), w * (z + radius)) {
                    dev = dev.max((ev.sample(k)?.0 - f.eval(z)).abs());
                }
            } else {
                for i in 0..20 {
                    let t = z - radius + 2.0 * radius * i as f64 / 19.0;
                    if spec.id().is_mellin() && t <= 0.0 {
                        continue;
                    }
                    dev = dev.max((continuous_sample(spec, w, f, t) - f.eval(z)).abs());
                }
            }
        }
        l2.push((w, dev));
    }

    // (L3): tail of phi(|L f|) outside the enlarged support (compact f only)
    let mut l3 = Vec::new();
    let mut l3_zero = true;
    let mut witness = None;
    let enlargement = match spec.functional().kind() {
        FunctionalKind::Point => 0.0,
        FunctionalKind::Average if discrete => spec.grid().map_or(0.0, |g| g.gap_max()),
        FunctionalKind::Average => 2.0,
        FunctionalKind::Durrmeyer(_) => 1.0,
        _ => 0.0,
    };
    if let Some((slo, shi)) = f.support() {
        let (klo, khi) = (slo - enlargement, shi + enlargement);
        for &w in w_list {
            let mut tail = 0.0;
            if discrete {
                let ev = OperatorEvaluator::new(spec, w, f);
                let grid = spec.grid().unwrap();
                // cap the scan; Durrmeyer samples decay like the psi tail
                let span = 50.0f64.max(khi.abs().max(klo.abs()) + 50.0);
                for k in grid.indices_between(-span * w, span * w) {
                    let node = grid.node(k) / w;
                    if node >= klo && node <= khi {
                        continue;
                    }
                    let s = ev.sample(k)?.0;
                    tail += phi.eval(s.abs());
                    if s.abs() > 1e-4 && witness.is_none() {
                        witness = Some((k, s.abs()));
                    }
                }
            } else {
                let d = IntegrationDomain::finite(klo - 50.0, khi + 50.0).expect("window");
                let r = integrate_with_breakpoints(
                    |t| {
                        if t >= klo && t <= khi {
                            0.0
                        } else {
                            phi.eval(continuous_sample(spec, w, f, t).abs())
                        }
                    },
                    &d,
                    &[klo, khi],
                    &QuadratureConfig::with_tol(1e-9),
                )?;
                tail = r.value;
            }
            if tail > 1e-12 {
                l3_zero = false;
            }
            l3.push((w, tail));
        }
    } else {
        notes.push("L3 skipped: signal has no declared compact support".into());
        l3_zero = false;
    }

    // (L4): ||chi_w||_1 * (sum or integral of phi(|L f|)) against the
    // modular of the signal itself
    let mut l4 = Vec::new();
    let mut l4_ok = true;
    if !spec.id().is_mellin() {
        let r_f = f.truncation_radius(1e-8).min(1e3);
        let d = IntegrationDomain::real_line(r_f + 5.0).expect("window");
        let modular_f = integrate_with_breakpoints(
            |x| phi.eval(f.eval(x).abs()),
            &d,
            f.breakpoints(),
            &QuadratureConfig::with_tol(1e-9),
        )?
        .value;
        for &w in w_list {
            let (lhs, rhs) = if discrete {
                let kernel = spec.kernel().unwrap();
                let grid = spec.grid().unwrap();
                let l1w = kernel.l1_norm() / w;
                let ev = OperatorEvaluator::new(spec, w, f);
                let mut sum = 0.0;
                for k in grid.indices_between(-(r_f + 5.0) * w, (r_f + 5.0) * w) {
                    sum += phi.eval(ev.sample(k)?.0.abs());
                }
                let (c, beta) = match spec.functional().kind() {
                    FunctionalKind::Durrmeyer(psi) => (kernel.l1_norm(), psi.l1_norm()),
                    _ => (kernel.l1_norm() / grid.gap_min(), 1.0),
                };
                let rhs_modular = if beta == 1.0 {
                    modular_f
                } else {
                    integrate_with_breakpoints(
                        |x| phi.eval((beta * f.eval(x)).abs()),
                        &d,
                        f.breakpoints(),
                        &QuadratureConfig::with_tol(1e-9),
                    )?
                    .value
                };
                (l1w * sum, c * rhs_modular)
            } else {
                // T5: mass-preserving scaling keeps ||chi_w||_1 = ||chi||_1
                let kernel = spec.kernel().unwrap();
                let dd = IntegrationDomain::real_line(r_f + 5.0).expect("window");
                let int_phi = integrate_with_breakpoints(
                    |t| phi.eval(continuous_sample(spec, w, f, t).abs()),
                    &dd,
                    f.breakpoints(),
                    &QuadratureConfig::with_tol(1e-8),
                )?
                .value;
                (kernel.l1_norm() * int_phi, kernel.l1_norm() * modular_f)
            };
            l4_ok &= lhs <= rhs * 1.05 + 1e-9;
            l4.push((w, lhs, rhs));
        }
    } else {
        notes.push("L4 probe limited to line operators; Mellin kinds report Upsilon only".into());
    }

    Ok(LAssumptionReport {
        upsilon_declared: upsilon,
        upsilon_empirical: upsilon_emp,
        l2_profile: l2,
        l3_tail: l3,
        l3_enlargement: enlargement,
        l3_exactly_zero: l3_zero,
        non_locality_witness: witness,
        l4_rows: l4,
        l4_ok,
        modular_only: is_durrmeyer,
        notes,
    })
}

/// The continuous-parameter sample functional at `t` (T4-T7 kinds).
fn continuous_sample(spec: &OperatorSpec, w: f64, f: &PiecewiseSignal, t: f64) -> f64 {
    match spec.functional().kind() {
        FunctionalKind::Point => f.eval(t),
        FunctionalKind::Average => 0.5 * w * f.integral(t - 1.0 / w, t + 1.0 / w),
        FunctionalKind::MellinPoint => f.eval(t),
        FunctionalKind::MellinAverage => {
            let pref = 1.0 / (2.0 * (1.0 + 1.0 / w).ln());
            pref * f.integral_log(t * w / (w + 1.0), t * (w + 1.0) / w)
        }
        FunctionalKind::Durrmeyer(_) => f64::NAN,
    }
}

fn probe_point(a: f64, b: f64, mellin: bool) -> Option<f64> {
    let lo = if a.is_finite() { a } else { -5.0 };
    let hi = if b.is_finite() { b } else { 5.0 };
    if hi <= lo {
        return None;
    }
    let z = 0.5 * (lo + hi);
    if mellin && z <= 0.5 {
        None
    } else {
        Some(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals;

    fn combined() -> Kernel {
        Kernel::combined_m().unwrap()
    }

    #[test]
    fn grid_indices() {
        let g = SamplingGrid::regular();
        let r = g.indices_between(-2.5, 3.1);
        assert_eq!(r, -2..=3);
        let empty = g.indices_between(0.2, 0.8);
        assert!(empty.is_empty());

        let p = SamplingGrid::perturbed();
        for k in -50..50 {
            assert!(p.node(k + 1) > p.node(k));
        }
    }

    #[test]
    fn t2_constant_sample_is_exact() {
        let spec = OperatorSpec::t2(combined(), SamplingGrid::regular());
        let c = signals::constant(3.0);
        let ev = OperatorEvaluator::new(&spec, 7.0, &c);
        let (s, _) = ev.sample(4).unwrap();
        assert!((s - 3.0).abs() < 1e-14);
    }

    #[test]
    fn t5_and_t7_constants() {
        let c = signals::constant(1.0);
        let t5 = OperatorSpec::t5(combined());
        for &t in &[-3.0, 0.0, 2.5] {
            let v = continuous_sample(&t5, 9.0, &c, t);
            assert!((v - 1.0).abs() < 1e-12, "t={t}");
        }
        let t7 = OperatorSpec::t7();
        for &t in &[0.5, 1.0, 4.0] {
            let v = continuous_sample(&t7, 9.0, &c, t);
            assert!((v - 1.0).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn t1_reproduces_constants() {
        let spec = OperatorSpec::t1(combined(), SamplingGrid::regular());
        let c = signals::constant(2.0);
        for i in 0..20 {
            let x = -4.0 + 8.0 * i as f64 / 19.0;
            let v = apply_operator(&spec, 10.0, &c, x).unwrap();
            assert!((v.value - 2.0).abs() < 1e-12, "x={x} v={}", v.value);
            assert!(v.certified);
        }
    }

    #[test]
    fn t4_reproduces_constants_with_mass_scaling() {
        let spec = OperatorSpec::t4(combined());
        let c = signals::constant(1.0);
        for i in 0..10 {
            let x = -3.0 + 6.0 * i as f64 / 9.0;
            let v = apply_operator(&spec, 5.0, &c, x).unwrap();
            assert!((v.value - 1.0).abs() < 1e-8, "x={x} v={}", v.value);
        }
    }

    #[test]
    fn t6_t7_reproduce_constants() {
        let c = signals::constant(2.0);
        for spec in [OperatorSpec::t6(), OperatorSpec::t7()] {
            for &x in &[0.3, 1.0, 5.0] {
                for &w in &[5.0, 40.0] {
                    let v = apply_operator(&spec, w, &c, x).unwrap();
                    assert!(
                        (v.value - 2.0).abs() < 1e-8,
                        "{} x={x} w={w} v={}",
                        spec.id().as_str(),
                        v.value
                    );
                }
            }
        }
    }

    #[test]
    fn mellin_requires_positive_point() {
        let spec = OperatorSpec::t6();
        let c = signals::constant(1.0);
        assert!(matches!(
            apply_operator(&spec, 5.0, &c, -1.0),
            Err(OperatorError::NonPositivePoint { .. })
        ));
    }

    #[test]
    fn t2_converges_on_fig2_interior_point() {
        // brute-force dense oracle is the partition sum itself at high w
        let spec = OperatorSpec::t2(combined(), SamplingGrid::regular());
        let f = signals::fig2();
        let v = apply_operator(&spec, 40.0, &f, -4.0).unwrap();
        assert!((v.value + 1.0).abs() < 0.02, "{}", v.value);
    }

    #[test]
    fn jitter_zero_matches_plain_t1() {
        let grid = SamplingGrid::regular().with_jitter(Arc::new(|_, _| 0.0));
        let spec = OperatorSpec::t1(combined(), grid);
        let f = signals::ramp();
        for &x in &[-0.7, 0.1, 0.9] {
            let a = apply_operator(&spec, 8.0, &f, x).unwrap().value;
            let b = jittered_operator(&spec, 8.0, &f, x).unwrap().value;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn jitter_bounded_by_lipschitz_bound() {
        let eta = 0.01;
        let grid =
            SamplingGrid::regular().with_jitter(Arc::new(move |k, w| eta * (k as f64).sin() / w));
        let spec = OperatorSpec::t1(combined(), grid);
        let f = signals::ramp(); // Lipschitz constant 1
        let w = 10.0;
        let chi3_m = 10.0; // coarse moment bound for combined-m on the regular grid
        for &x in &[-0.5, 0.0, 0.5] {
            let a = apply_operator(&spec, w, &f, x).unwrap().value;
            let b = jittered_operator(&spec, w, &f, x).unwrap().value;
            assert!((a - b).abs() <= chi3_m * 1.0 * (eta / w) + 1e-12);
        }
    }

    #[test]
    fn jitter_invariant_on_constants() {
        let grid =
            SamplingGrid::regular().with_jitter(Arc::new(|k, w| 0.2 * (k as f64).cos() / w));
        let spec = OperatorSpec::t1(combined(), grid);
        let c = signals::constant(5.0);
        let v = jittered_operator(&spec, 6.0, &c, 1.3).unwrap().value;
        assert!((v - 5.0).abs() < 1e-12);
    }

    #[test]
    fn positivity_with_nonnegative_kernel() {
        let b2 = Kernel::bspline(2).unwrap();
        let f = signals::indicator(0.0, 1.0);
        for spec in [
            OperatorSpec::t1(b2.clone(), SamplingGrid::regular()),
            OperatorSpec::t2(b2.clone(), SamplingGrid::regular()),
            OperatorSpec::t4(b2.clone()),
            OperatorSpec::t5(b2),
        ] {
            for i in 0..30 {
                let x = -1.0 + 3.0 * i as f64 / 29.0;
                let v = apply_operator(&spec, 7.0, &f, x).unwrap().value;
                assert!(v >= -1e-12, "{} x={x} v={v}", spec.id().as_str());
            }
        }
    }

    #[test]
    fn linearity_and_homogeneity() {
        let spec = OperatorSpec::t2(combined(), SamplingGrid::regular());
        let f = signals::ramp();
        let g = signals::indicator(-0.5, 0.5);
        let sum = signals::custom(
            "f+g",
            Arc::new({
                let (f, g) = (f.clone(), g.clone());
                move |x| f.eval(x) + g.eval(x)
            }),
            vec![-1.0, -0.5, 0.0, 0.5, 1.0],
        );
        let scaled = signals::custom(
            "-2f",
            Arc::new({
                let f = f.clone();
                move |x| -2.0 * f.eval(x)
            }),
            vec![-1.0, 0.0, 1.0],
        );
        for &x in &[-0.6, 0.2, 0.8] {
            let tf = apply_operator(&spec, 9.0, &f, x).unwrap().value;
            let tg = apply_operator(&spec, 9.0, &g, x).unwrap().value;
            let tsum = apply_operator(&spec, 9.0, &sum, x).unwrap().value;
            let tscaled = apply_operator(&spec, 9.0, &scaled, x).unwrap().value;
            assert!((tsum - (tf + tg)).abs() < 1e-9, "x={x}");
            assert!((tscaled + 2.0 * tf).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn l_report_t2_upsilon_and_locality() {
        let spec = OperatorSpec::t2(combined(), SamplingGrid::regular());
        let f = signals::ramp();
        let phi = PhiFunction::power(1.0).unwrap();
        let rep = check_l_assumptions(&spec, &f, &phi, &[5.0, 10.0], 1e-3).unwrap();
        assert!(rep.upsilon_empirical <= 1.0 + 1e-12);
        assert!(rep.l3_exactly_zero, "{:?}", rep.l3_tail);
        assert!(!rep.modular_only);
        assert!(rep.l4_ok, "{:?}", rep.l4_rows);
    }

    #[test]
    fn l_report_t1_tail_exactly_zero() {
        let spec = OperatorSpec::t1(combined(), SamplingGrid::regular());
        let f = signals::indicator(-1.0, 1.0);
        let phi = PhiFunction::power(2.0).unwrap();
        let rep = check_l_assumptions(&spec, &f, &phi, &[5.0], 1e-3).unwrap();
        assert!(rep.l3_exactly_zero);
        for (_, t) in &rep.l3_tail {
            assert_eq!(*t, 0.0);
        }
    }

    #[test]
    fn durrmeyer_is_non_local() {
        let spec = OperatorSpec::t3(
            combined(),
            SamplingGrid::regular(),
            Kernel::fejer().unwrap(),
        )
        .unwrap();
        let f = signals::ramp();
        let phi = PhiFunction::power(1.0).unwrap();
        let rep = check_l_assumptions(&spec, &f, &phi, &[10.0], 1e-3).unwrap();
        assert!(rep.modular_only);
        assert!(!rep.l3_exactly_zero);
        let (k, v) = rep.non_locality_witness.expect("witness");
        assert!(v > 1e-4, "k={k} v={v}");
    }

    #[test]
    fn t5_approaches_t4() {
        let t4 = OperatorSpec::t4(combined());
        let t5 = OperatorSpec::t5(combined());
        let f = signals::fig3();
        let dist = |w: f64| {
            let e4 = OperatorEvaluator::new(&t4, w, &f);
            let e5 = OperatorEvaluator::new(&t5, w, &f);
            let mut d = 0.0f64;
            for i in 0..60 {
                let x = -2.5 + 5.5 * i as f64 / 59.0;
                d = d.max((e4.eval(x).unwrap().value - e5.eval(x).unwrap().value).abs());
            }
            d
        };
        assert!(dist(40.0) < dist(5.0));
    }
}
