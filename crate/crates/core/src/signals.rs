//! Piecewise test signals.
//!
//! The catalog holds the three piecewise figures-of-merit signals plus the
//! standard property-test signals (constants, half-open indicators, a compact
//! Lipschitz ramp, a Gaussian). Pieces are half-open `[lo, hi)`, so evaluation
//! at a breakpoint uses the right-closed piece.
//!
//! Pieces built from `const` / `linear` / `power` formulas carry exact
//! antiderivatives, which the operator layer uses for its inner averages.

use std::sync::Arc;

use thiserror::Error;

use crate::quadrature::{integrate, IntegrationDomain, QuadratureConfig};

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("unknown signal name '{0}'")]
    UnknownName(String),
    #[error("x = {x} outside the domain of signal '{name}'")]
    OutOfDomain { name: String, x: f64 },
    #[error("bad signal CSV at line {line}: {msg}")]
    BadCsv { line: usize, msg: String },
    #[error("I/O error reading signal file: {0}")]
    Io(#[from] std::io::Error),
}

/// Formula of one piece.
#[derive(Clone)]
pub enum PieceFormula {
    Const(f64),
    /// `slope * x + intercept`
    Linear { slope: f64, intercept: f64 },
    /// `coeff * x^exponent` (integer exponent, possibly negative)
    Power { coeff: f64, exponent: i32 },
    Zero,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl PieceFormula {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Const(c) => *c,
            Self::Linear { slope, intercept } => slope * x + intercept,
            Self::Power { coeff, exponent } => coeff * x.powi(*exponent),
            Self::Zero => 0.0,
            Self::Custom(f) => f(x),
        }
    }

    /// Antiderivative at `x`, valid within a piece that does not cross 0 for
    /// negative exponents. `None` for custom formulas.
    fn antiderivative(&self, x: f64) -> Option<f64> {
        match self {
            Self::Const(c) => Some(c * x),
            Self::Linear { slope, intercept } => Some(0.5 * slope * x * x + intercept * x),
            Self::Power { coeff, exponent } => Some(if *exponent == -1 {
                coeff * x.abs().ln()
            } else {
                coeff * x.powi(exponent + 1) / (*exponent + 1) as f64
            }),
            Self::Zero => Some(0.0),
            Self::Custom(_) => None,
        }
    }

    /// Antiderivative of `f(u)/u`, for the logarithmic measure. Valid on
    /// pieces with `x > 0`. `None` for custom formulas.
    fn antiderivative_log(&self, x: f64) -> Option<f64> {
        match self {
            Self::Const(c) => Some(c * x.ln()),
            Self::Linear { slope, intercept } => Some(slope * x + intercept * x.ln()),
            Self::Power { coeff, exponent } => Some(if *exponent == 0 {
                coeff * x.ln()
            } else {
                coeff * x.powi(*exponent) / *exponent as f64
            }),
            Self::Zero => Some(0.0),
            Self::Custom(_) => None,
        }
    }
}

#[derive(Clone)]
struct Piece {
    lo: f64, // inclusive
    hi: f64, // exclusive
    formula: PieceFormula,
}

/// A piecewise signal on the line (or on the positive half-line).
#[derive(Clone)]
pub struct PiecewiseSignal {
    name: String,
    pieces: Vec<Piece>,
    breakpoints: Vec<f64>,
    /// Compact support `[lo, hi]` when declared; `None` for unbounded tails.
    support: Option<(f64, f64)>,
    /// Exclusive lower domain bound (the Mellin signal lives on x > 0).
    domain_min: Option<f64>,
    continuity_intervals: Vec<(f64, f64)>,
    sup_norm: f64,
}

impl std::fmt::Debug for PiecewiseSignal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PiecewiseSignal")
            .field("name", &self.name)
            .field("breakpoints", &self.breakpoints)
            .field("support", &self.support)
            .finish()
    }
}

impl PiecewiseSignal {
    fn new(
        name: &str,
        pieces: Vec<Piece>,
        support: Option<(f64, f64)>,
        domain_min: Option<f64>,
    ) -> Self {
        let breakpoints: Vec<f64> = pieces
            .iter()
            .map(|p| p.lo)
            .filter(|lo| lo.is_finite())
            .collect();
        let mut s = Self {
            name: name.to_string(),
            pieces,
            breakpoints,
            support,
            domain_min,
            continuity_intervals: Vec::new(),
            sup_norm: 0.0,
        };
        s.continuity_intervals = s.compute_continuity_intervals();
        s.sup_norm = s.compute_sup_norm();
        s
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        self.support
    }

    pub fn domain_min(&self) -> Option<f64> {
        self.domain_min
    }

    pub fn continuity_intervals(&self) -> &[(f64, f64)] {
        &self.continuity_intervals
    }

    /// Grid-measured sup norm (exact for the built-in piece formulas at desk
    /// scale; used for truncation heuristics and the boundedness check).
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    fn piece_index(&self, x: f64) -> usize {
        // pieces are sorted; last piece with lo <= x
        self.pieces
            .partition_point(|p| p.lo <= x)
            .saturating_sub(1)
    }

    /// Evaluate, assuming `x` lies in the domain. For out-of-domain points
    /// (e.g. `x <= 0` for the Mellin signal) use [`Self::try_eval`].
    pub fn eval(&self, x: f64) -> f64 {
        if let Some(m) = self.domain_min {
            if x <= m {
                return 0.0;
            }
        }
        self.pieces[self.piece_index(x)].formula.eval(x)
    }

    pub fn try_eval(&self, x: f64) -> Result<f64, SignalError> {
        if let Some(m) = self.domain_min {
            if x <= m {
                return Err(SignalError::OutOfDomain {
                    name: self.name.clone(),
                    x,
                });
            }
        }
        Ok(self.eval(x))
    }

    /// `int_a^b f`, exact per piece where the formula has a closed
    /// antiderivative, adaptive quadrature otherwise.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        if b < a {
            return -self.integral(b, a);
        }
        let a = match self.domain_min {
            Some(m) => a.max(m),
            None => a,
        };
        if b <= a {
            return 0.0;
        }
        let mut total = 0.0;
        for piece in &self.pieces {
            let lo = piece.lo.max(a);
            let hi = piece.hi.min(b);
            if hi <= lo {
                continue;
            }
            total += match (piece.formula.antiderivative(hi), piece.formula.antiderivative(lo)) {
                (Some(fh), Some(fl)) => fh - fl,
                _ => {
                    let d = IntegrationDomain::finite(lo, hi).expect("lo < hi");
                    integrate(|x| piece.formula.eval(x), &d, &QuadratureConfig::with_tol(1e-11))
                        .map(|r| r.value)
                        .unwrap_or(f64::NAN)
                }
            };
        }
        total
    }

    /// `int_a^b f(u) du/u` for `0 < a <= b` (logarithmic measure).
    pub fn integral_log(&self, a: f64, b: f64) -> f64 {
        assert!(a > 0.0 && b > 0.0, "log integral needs positive bounds");
        if a == b {
            return 0.0;
        }
        if b < a {
            return -self.integral_log(b, a);
        }
        let mut total = 0.0;
        for piece in &self.pieces {
            let lo = piece.lo.max(a);
            let hi = piece.hi.min(b);
            if hi <= lo {
                continue;
            }
            total += match (
                piece.formula.antiderivative_log(hi),
                piece.formula.antiderivative_log(lo),
            ) {
                (Some(fh), Some(fl)) => fh - fl,
                _ => {
                    let d = IntegrationDomain::log_half_line(lo.ln(), hi.ln()).expect("lo < hi");
                    integrate(|u| piece.formula.eval(u), &d, &QuadratureConfig::with_tol(1e-11))
                        .map(|r| r.value)
                        .unwrap_or(f64::NAN)
                }
            };
        }
        total
    }

    /// Radius beyond which `|f| < tol` (for harness truncation). Signals with
    /// compact support return the support radius.
    pub fn truncation_radius(&self, tol: f64) -> f64 {
        if let Some((lo, hi)) = self.support {
            return lo.abs().max(hi.abs());
        }
        let mut r: f64 = 1.0;
        for &bp in &self.breakpoints {
            r = r.max(bp.abs() + 1.0);
        }
        while r < 1e9 {
            let probes = [r, 1.5 * r, 2.0 * r, 5.0 * r, -r, -2.0 * r, -5.0 * r];
            let in_domain = |x: f64| self.domain_min.map_or(true, |m| x > m);
            if probes
                .iter()
                .filter(|&&x| in_domain(x))
                .all(|&x| self.eval(x).abs() < tol)
            {
                return r;
            }
            r *= 2.0;
        }
        r
    }

    fn compute_continuity_intervals(&self) -> Vec<(f64, f64)> {
        // open intervals between breakpoints, merged where the limits agree
        let mut pts: Vec<f64> = Vec::new();
        let lo_edge = self.domain_min.unwrap_or(f64::NEG_INFINITY);
        pts.push(lo_edge);
        for &bp in &self.breakpoints {
            if bp > lo_edge {
                pts.push(bp);
            }
        }
        pts.push(f64::INFINITY);
        let mut intervals: Vec<(f64, f64)> = Vec::new();
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let joined = if a.is_finite() {
                let left = self.pieces[self.piece_index(a - 1e-12)].formula.eval(a);
                let right = self.eval(a);
                (left - right).abs() < 1e-9
            } else {
                false
            };
            match intervals.last_mut() {
                Some(last) if joined => last.1 = b,
                _ => intervals.push((a, b)),
            }
        }
        intervals
    }

    fn compute_sup_norm(&self) -> f64 {
        let lo_edge = self.domain_min.unwrap_or(-50.0);
        let mut m = 0.0f64;
        let n = 20_000;
        let (a, b) = (lo_edge.max(-50.0) + 1e-9, 50.0);
        for i in 0..=n {
            let x = a + (b - a) * i as f64 / n as f64;
            m = m.max(self.eval(x).abs());
        }
        for &bp in &self.breakpoints {
            if bp > lo_edge {
                m = m.max(self.eval(bp).abs());
                m = m.max(self.eval(bp - 1e-9).abs());
            }
        }
        m
    }

    /// Pointwise difference `self - other` sampled through closures is what
    /// the harness uses; signals themselves stay immutable.
    pub fn as_fn(&self) -> impl Fn(f64) -> f64 + '_ {
        move |x| self.eval(x)
    }
}

fn pieces(spec: &[(f64, f64, PieceFormula)]) -> Vec<Piece> {
    spec.iter()
        .map(|(lo, hi, f)| Piece {
            lo: *lo,
            hi: *hi,
            formula: f.clone(),
        })
        .collect()
}

/// The discontinuous signal of the Kantorovich sweep (figure 2 of the runs):
/// `40/u^2` below -5, then constants on `[-5,-3), [-3,-2), [-2,-1), [-1,0),
/// [0,1), [1,2)`, then `-2/u^5` from 2 on.
pub fn fig2() -> PiecewiseSignal {
    use PieceFormula::*;
    PiecewiseSignal::new(
        "fig2",
        pieces(&[
            (f64::NEG_INFINITY, -5.0, Power { coeff: 40.0, exponent: -2 }),
            (-5.0, -3.0, Const(-1.0)),
            (-3.0, -2.0, Const(2.0)),
            (-2.0, -1.0, Const(-0.5)),
            (-1.0, 0.0, Const(1.5)),
            (0.0, 1.0, Const(1.0)),
            (1.0, 2.0, Const(-0.5)),
            (2.0, f64::INFINITY, Power { coeff: -2.0, exponent: -5 }),
        ]),
        None,
        None,
    )
}

/// The Durrmeyer sweep signal: `1/x^2` below -1, `-1` on `[-1,0)`, `2` on
/// `[0,2)`, `-3/x^3` from 2 on.
pub fn fig3() -> PiecewiseSignal {
    use PieceFormula::*;
    PiecewiseSignal::new(
        "fig3",
        pieces(&[
            (f64::NEG_INFINITY, -1.0, Power { coeff: 1.0, exponent: -2 }),
            (-1.0, 0.0, Const(-1.0)),
            (0.0, 2.0, Const(2.0)),
            (2.0, f64::INFINITY, Power { coeff: -3.0, exponent: -3 }),
        ]),
        None,
        None,
    )
}

/// The Mellin sweep signal on the positive half-line: `2x` on `(0,2)`, `1` on
/// `[2,4)`, `-25/x^3` from 4 on.
pub fn fig4() -> PiecewiseSignal {
    use PieceFormula::*;
    PiecewiseSignal::new(
        "fig4",
        pieces(&[
            (0.0, 2.0, Linear { slope: 2.0, intercept: 0.0 }),
            (2.0, 4.0, Const(1.0)),
            (4.0, f64::INFINITY, Power { coeff: -25.0, exponent: -3 }),
        ]),
        None,
        Some(0.0),
    )
}

pub fn constant(c: f64) -> PiecewiseSignal {
    PiecewiseSignal::new(
        &format!("const:{c}"),
        pieces(&[(f64::NEG_INFINITY, f64::INFINITY, PieceFormula::Const(c))]),
        None,
        None,
    )
}

/// Half-open indicator of `[a, b)`.
pub fn indicator(a: f64, b: f64) -> PiecewiseSignal {
    use PieceFormula::*;
    PiecewiseSignal::new(
        &format!("indicator:{a},{b}"),
        pieces(&[
            (f64::NEG_INFINITY, a, Zero),
            (a, b, Const(1.0)),
            (b, f64::INFINITY, Zero),
        ]),
        Some((a, b)),
        None,
    )
}

/// Compact Lipschitz hat: `x+1` on `[-1,0)`, `1-x` on `[0,1)`, zero outside.
pub fn ramp() -> PiecewiseSignal {
    use PieceFormula::*;
    PiecewiseSignal::new(
        "ramp",
        pieces(&[
            (f64::NEG_INFINITY, -1.0, Zero),
            (-1.0, 0.0, Linear { slope: 1.0, intercept: 1.0 }),
            (0.0, 1.0, Linear { slope: -1.0, intercept: 1.0 }),
            (1.0, f64::INFINITY, Zero),
        ]),
        Some((-1.0, 1.0)),
        None,
    )
}

/// `exp(-x^2)`, continuous, no compact support.
pub fn gauss() -> PiecewiseSignal {
    PiecewiseSignal::new(
        "gauss",
        pieces(&[(
            f64::NEG_INFINITY,
            f64::INFINITY,
            PieceFormula::Custom(Arc::new(|x: f64| (-x * x).exp())),
        )]),
        None,
        None,
    )
}

/// Arbitrary closure as a signal; inner averages fall back to quadrature.
/// `breakpoints` should list the kinks so operator panelling can respect them.
pub fn custom(
    name: &str,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    breakpoints: Vec<f64>,
) -> PiecewiseSignal {
    let mut s = PiecewiseSignal::new(
        name,
        pieces(&[(f64::NEG_INFINITY, f64::INFINITY, PieceFormula::Custom(f))]),
        None,
        None,
    );
    s.breakpoints = breakpoints;
    s
}

/// Catalog lookup by spec string: `fig2`, `fig3`, `fig4`, `const:<c>`,
/// `indicator:<a>,<b>`, `ramp`, `gauss`.
pub fn catalog(name: &str) -> Result<PiecewiseSignal, SignalError> {
    match name {
        "fig2" => Ok(fig2()),
        "fig3" => Ok(fig3()),
        "fig4" => Ok(fig4()),
        "ramp" => Ok(ramp()),
        "gauss" => Ok(gauss()),
        _ => {
            if let Some(rest) = name.strip_prefix("const:") {
                let c: f64 = rest
                    .parse()
                    .map_err(|_| SignalError::UnknownName(name.to_string()))?;
                Ok(constant(c))
            } else if let Some(rest) = name.strip_prefix("indicator:") {
                let parts: Vec<&str> = rest.split(',').collect();
                if parts.len() != 2 {
                    return Err(SignalError::UnknownName(name.to_string()));
                }
                let a: f64 = parts[0]
                    .trim()
                    .parse()
                    .map_err(|_| SignalError::UnknownName(name.to_string()))?;
                let b: f64 = parts[1]
                    .trim()
                    .parse()
                    .map_err(|_| SignalError::UnknownName(name.to_string()))?;
                Ok(indicator(a, b))
            } else {
                Err(SignalError::UnknownName(name.to_string()))
            }
        }
    }
}

/// Load a user signal from CSV rows `breakpoint,formula-id,params...`.
///
/// Row `i` defines the piece on `[breakpoint_i, breakpoint_{i+1})`; the last
/// row extends to infinity and the first breakpoint may be `-inf`. Formula
/// ids: `const,c` takes one parameter, `linear,a,b` is `a*x+b`, `power,c,p`
/// is `c*x^p` (integer `p`), `none` is zero.
pub fn from_csv(path: &std::path::Path) -> Result<PiecewiseSignal, SignalError> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<(f64, PieceFormula)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
        if fields.len() < 2 {
            return Err(SignalError::BadCsv {
                line: i + 1,
                msg: "expected breakpoint,formula-id[,params]".into(),
            });
        }
        let bp = if fields[0] == "-inf" {
            f64::NEG_INFINITY
        } else {
            fields[0].parse().map_err(|_| SignalError::BadCsv {
                line: i + 1,
                msg: format!("bad breakpoint '{}'", fields[0]),
            })?
        };
        let parse = |s: &str| -> Result<f64, SignalError> {
            s.parse().map_err(|_| SignalError::BadCsv {
                line: i + 1,
                msg: format!("bad parameter '{s}'"),
            })
        };
        let formula = match fields[1] {
            "const" if fields.len() == 3 => PieceFormula::Const(parse(fields[2])?),
            "linear" if fields.len() == 4 => PieceFormula::Linear {
                slope: parse(fields[2])?,
                intercept: parse(fields[3])?,
            },
            "power" if fields.len() == 4 => PieceFormula::Power {
                coeff: parse(fields[2])?,
                exponent: parse(fields[3])? as i32,
            },
            "none" => PieceFormula::Zero,
            other => {
                return Err(SignalError::BadCsv {
                    line: i + 1,
                    msg: format!("unknown formula-id '{other}' or wrong arity"),
                })
            }
        };
        rows.push((bp, formula));
    }
    if rows.is_empty() {
        return Err(SignalError::BadCsv {
            line: 0,
            msg: "empty signal file".into(),
        });
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv-signal".into());
    let mut ps = Vec::new();
    for (i, (bp, formula)) in rows.iter().enumerate() {
        let hi = rows.get(i + 1).map(|r| r.0).unwrap_or(f64::INFINITY);
        if hi <= *bp {
            return Err(SignalError::BadCsv {
                line: i + 1,
                msg: "breakpoints must be strictly increasing".into(),
            });
        }
        ps.push(Piece {
            lo: *bp,
            hi,
            formula: formula.clone(),
        });
    }
    Ok(PiecewiseSignal::new(&stem, ps, None, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fig_signal_values() {
        assert_eq!(fig2().eval(-4.0), -1.0);
        assert_eq!(fig3().eval(1.0), 2.0);
        assert!((fig4().eval(5.0) + 0.2).abs() < 1e-15);
    }

    #[test]
    fn fig2_breakpoints() {
        assert_eq!(fig2().breakpoints(), &[-5.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn catalog_lookup() {
        assert_eq!(catalog("const:2").unwrap().eval(17.3), 2.0);
        let ind = catalog("indicator:0,1").unwrap();
        assert_eq!(ind.eval(0.5), 1.0);
        assert_eq!(ind.eval(1.0), 0.0); // half-open
        assert_eq!(ind.eval(0.0), 1.0);
        assert!(matches!(catalog("nope"), Err(SignalError::UnknownName(_))));
    }

    #[test]
    fn fig4_domain_error() {
        let s = fig4();
        assert!(s.try_eval(-1.0).is_err());
        assert!(s.try_eval(0.0).is_err());
        assert!(s.try_eval(0.5).is_ok());
    }

    #[test]
    fn exact_integrals() {
        let f = fig2();
        // constant piece on [-3,-2]
        assert!((f.integral(-3.0, -2.0) - 2.0).abs() < 1e-12);
        // 40/u^2 on [-10,-5]: antiderivative -40/u
        assert!((f.integral(-10.0, -5.0) - 4.0).abs() < 1e-10);
        // zero signal
        assert_eq!(indicator(0.0, 1.0).integral(2.0, 5.0), 0.0);
    }

    #[test]
    fn log_integral_matches_quadrature() {
        let f = fig4();
        let d = IntegrationDomain::log_half_line(0.5f64.ln(), 6.0f64.ln()).unwrap();
        let q = integrate(|u| f.eval(u), &d, &QuadratureConfig::with_tol(1e-11))
            .unwrap()
            .value;
        assert!((f.integral_log(0.5, 6.0) - q).abs() < 1e-6);
    }

    #[test]
    fn bounded_transcriptions() {
        assert!(fig2().sup_norm() <= 2.0 + 1e-9);
        assert!(fig3().sup_norm() <= 2.0 + 1e-9);
        assert!(fig4().sup_norm() <= 4.0 + 1e-9);
    }

    #[test]
    fn compact_support_outside_zero() {
        let r = ramp();
        assert_eq!(r.eval(1.5), 0.0);
        assert_eq!(r.eval(-1.5), 0.0);
        let (a, b) = r.support().unwrap();
        assert_eq!((a, b), (-1.0, 1.0));
    }

    #[test]
    fn csv_roundtrip() {
        let dir = std::env::temp_dir().join("samplingops-signal-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sig.csv");
        std::fs::write(&path, "-inf,none\n0,linear,1,0\n1,const,1\n2,power,8,-3\n").unwrap();
        let s = from_csv(&path).unwrap();
        assert_eq!(s.eval(-1.0), 0.0);
        assert_eq!(s.eval(0.5), 0.5);
        assert_eq!(s.eval(1.5), 1.0);
        assert_eq!(s.eval(2.0), 1.0);
        assert!((s.eval(4.0) - 0.125).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn piecewise_eval_matches_formula(x in -20.0f64..20.0) {
            // fig2 evaluation matches the formula of the piece containing x
            let f = fig2();
            let expected = if x < -5.0 { 40.0 / (x * x) }
                else if x < -3.0 { -1.0 }
                else if x < -2.0 { 2.0 }
                else if x < -1.0 { -0.5 }
                else if x < 0.0 { 1.5 }
                else if x < 1.0 { 1.0 }
                else if x < 2.0 { -0.5 }
                else { -2.0 / x.powi(5) };
            // powi(-2) and 1/(x*x) may differ in the last ulp
            prop_assert!((f.eval(x) - expected).abs() <= 1e-14 * (1.0 + expected.abs()));
        }
    }
}
