//! Adaptive numerical integration.
//!
//! One engine serves every integral in the crate: adaptive Simpson panels
//! (local order 4 with Richardson correction), driven by an absolute error
//! target. Three domains are supported: finite intervals, the real line
//! truncated at a caller-supplied radius, and the multiplicative half-line
//! with measure `du/u`, which is always handled through the substitution
//! `u = e^v` so the singularity at 0 never enters the integrator.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
    #[error("invalid integration domain: {0}")]
    InvalidDomain(String),
    #[error("invalid quadrature config: {0}")]
    InvalidConfig(String),
}

/// Where an integral lives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntegrationDomain {
    /// `[a, b]` with `a < b`.
    Finite { a: f64, b: f64 },
    /// The real line, truncated to `[-r, r]`.
    RealLine { truncation_radius: f64 },
    /// `int_0^inf g(u) du/u`, computed as `int_{v_min}^{v_max} g(e^v) dv`.
    LogHalfLine { v_min: f64, v_max: f64 },
}

impl IntegrationDomain {
    pub fn finite(a: f64, b: f64) -> Result<Self, QuadratureError> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(QuadratureError::InvalidDomain(format!(
                "finite domain requires a < b, got [{a}, {b}]"
            )));
        }
        Ok(Self::Finite { a, b })
    }

    pub fn real_line(truncation_radius: f64) -> Result<Self, QuadratureError> {
        if !(truncation_radius.is_finite() && truncation_radius > 0.0) {
            return Err(QuadratureError::InvalidDomain(format!(
                "truncation radius must be positive, got {truncation_radius}"
            )));
        }
        Ok(Self::RealLine { truncation_radius })
    }

    pub fn log_half_line(v_min: f64, v_max: f64) -> Result<Self, QuadratureError> {
        if !(v_min.is_finite() && v_max.is_finite() && v_min < v_max) {
            return Err(QuadratureError::InvalidDomain(format!(
                "log half-line requires v_min < v_max, got [{v_min}, {v_max}]"
            )));
        }
        Ok(Self::LogHalfLine { v_min, v_max })
    }

    /// Interval of the actual integration variable.
    pub fn interval(&self) -> (f64, f64) {
        match *self {
            Self::Finite { a, b } => (a, b),
            Self::RealLine { truncation_radius } => (-truncation_radius, truncation_radius),
            Self::LogHalfLine { v_min, v_max } => (v_min, v_max),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub max_subdivisions: u64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            max_subdivisions: 1 << 20,
        }
    }
}

impl QuadratureConfig {
    pub fn new(abs_tol: f64, max_subdivisions: u64) -> Result<Self, QuadratureError> {
        if !(abs_tol > 0.0 && abs_tol.is_finite()) {
            return Err(QuadratureError::InvalidConfig(format!(
                "abs_tol must be positive, got {abs_tol}"
            )));
        }
        if max_subdivisions == 0 {
            return Err(QuadratureError::InvalidConfig(
                "max_subdivisions must be >= 1".into(),
            ));
        }
        Ok(Self {
            abs_tol,
            max_subdivisions,
        })
    }

    pub fn with_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }
}

/// Integral value plus a flag telling whether the error target was met
/// before the subdivision budget ran out.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub certified: bool,
}

/// Integrate `f` over `domain`. For `LogHalfLine` the callback receives the
/// original variable `u > 0`, not `v = ln u`.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    domain: &IntegrationDomain,
    config: &QuadratureConfig,
) -> Result<QuadResult, QuadratureError> {
    integrate_with_breakpoints(f, domain, &[], config)
}

/// Same as [`integrate`], but panels never straddle any of the listed
/// breakpoints (given in the caller's variable: `u`-space for `LogHalfLine`).
pub fn integrate_with_breakpoints(
    f: impl Fn(f64) -> f64,
    domain: &IntegrationDomain,
    breakpoints: &[f64],
    config: &QuadratureConfig,
) -> Result<QuadResult, QuadratureError> {
    let (lo, hi) = domain.interval();
    let log_domain = matches!(domain, IntegrationDomain::LogHalfLine { .. });

    let mut edges: Vec<f64> = Vec::with_capacity(breakpoints.len() + 2);
    edges.push(lo);
    for &bp in breakpoints {
        let v = if log_domain {
            if bp <= 0.0 {
                continue;
            }
            bp.ln()
        } else {
            bp
        };
        if v > lo && v < hi {
            edges.push(v);
        }
    }
    edges.push(hi);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup();

    let g = |v: f64| -> Result<f64, QuadratureError> {
        let x = if log_domain { v.exp() } else { v };
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadratureError::NonFinite { x })
        }
    };

    let total_len = hi - lo;
    let mut budget = config.max_subdivisions;
    let mut value = 0.0;
    let mut certified = true;
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let tol = config.abs_tol * ((b - a) / total_len);
        let r = adaptive_segment(&g, a, b, tol.max(f64::MIN_POSITIVE), &mut budget)?;
        value += r.value;
        certified &= r.certified;
    }
    Ok(QuadResult { value, certified })
}

/// Integrate a pre-panelled integrand: each `[edges[i], edges[i+1]]` is an
/// independent adaptive segment with a proportional share of `abs_tol`.
/// Used for long oscillatory ranges (Fejer tails) where panel boundaries at
/// the kernel's knots are essential.
pub fn integrate_panels(
    f: impl Fn(f64) -> f64,
    edges: &[f64],
    config: &QuadratureConfig,
) -> Result<QuadResult, QuadratureError> {
    assert!(edges.len() >= 2, "need at least one panel");
    let g = |v: f64| -> Result<f64, QuadratureError> {
        let y = f(v);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadratureError::NonFinite { x: v })
        }
    };
    let total_len = edges[edges.len() - 1] - edges[0];
    let mut budget = config.max_subdivisions;
    let mut value = 0.0;
    let mut certified = true;
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let tol = config.abs_tol * ((b - a) / total_len);
        let r = adaptive_segment(&g, a, b, tol.max(f64::MIN_POSITIVE), &mut budget)?;
        value += r.value;
        certified &= r.certified;
    }
    Ok(QuadResult { value, certified })
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Adaptive Simpson on one segment. The segment is first cut into four equal
/// starter panels so that symmetric integrands cannot fool the initial
/// estimate; each panel is then refined until `|S_fine - S_coarse| <= 15 tol`.
fn adaptive_segment(
    g: &impl Fn(f64) -> Result<f64, QuadratureError>,
    a: f64,
    b: f64,
    tol: f64,
    budget: &mut u64,
) -> Result<QuadResult, QuadratureError> {
    const STARTERS: usize = 4;
    const MIN_DEPTH: u32 = 1;

    let mut stack: Vec<Panel> = Vec::with_capacity(64);
    let h = (b - a) / STARTERS as f64;
    for i in 0..STARTERS {
        let pa = a + i as f64 * h;
        let pb = if i == STARTERS - 1 { b } else { pa + h };
        let pm = 0.5 * (pa + pb);
        let (fa, fm, fb) = (g(pa)?, g(pm)?, g(pb)?);
        stack.push(Panel {
            a: pa,
            b: pb,
            fa,
            fm,
            fb,
            whole: simpson(pa, pb, fa, fm, fb),
            tol: tol / STARTERS as f64,
            depth: 0,
        });
    }

    let width_floor = (b.abs().max(a.abs()) + 1.0) * 1e-15;
    let mut sum = 0.0;
    let mut certified = true;
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let (flm, frm) = (g(lm)?, g(rm)?);
        let left = simpson(p.a, m, p.fa, flm, p.fm);
        let right = simpson(m, p.b, p.fm, frm, p.fb);
        let delta = left + right - p.whole;
        let converged = delta.abs() <= 15.0 * p.tol && p.depth >= MIN_DEPTH;
        if converged || (p.b - p.a) < width_floor {
            sum += left + right + delta / 15.0;
        } else if *budget == 0 {
            sum += left + right;
            certified = false;
        } else {
            *budget -= 1;
            stack.push(Panel {
                a: p.a,
                b: m,
                fa: p.fa,
                fm: flm,
                fb: p.fm,
                whole: left,
                tol: 0.5 * p.tol,
                depth: p.depth + 1,
            });
            stack.push(Panel {
                a: m,
                b: p.b,
                fa: p.fm,
                fm: frm,
                fb: p.fb,
                whole: right,
                tol: 0.5 * p.tol,
                depth: p.depth + 1,
            });
        }
    }
    Ok(QuadResult {
        value: sum,
        certified,
    })
}
