//! Discrete and integral operators of sampling type (generalized, Kantorovich and
//! Durrmeyer sampling series, classical and Mellin convolutions and their
//! Kantorovich versions), evaluated through a single adaptive quadrature engine,
//! together with an Orlicz-space layer (modular functional, Luxemburg norm,
//! Delta-2 classification) and an experiment harness producing CSV sweeps.
//!
//! Module map:
//!
//! - [`quadrature`]: adaptive integration on finite intervals, the truncated
//!   real line, and the multiplicative half-line with logarithmic measure.
//! - [`kernels`]: kernel catalog (sinc, Fejer, central B-splines, the combined
//!   kernel `M = 4*M3 - 3*M4`, the Mellin kernel family) and numerical checkers
//!   for the kernel-side assumptions.
//! - [`orlicz`]: phi-functions, modular functional, Luxemburg norm, Delta-2.
//! - [`signals`]: piecewise test-signal catalog.
//! - [`operators`]: sampling grids, sample functionals, the operators T1..T7
//!   and their checkers.
//! - [`harness`]: w-sweeps, error metrics, figure reproduction, CSV output.

pub mod harness;
pub mod kernels;
pub mod operators;
pub mod orlicz;
pub mod quadrature;
pub mod signals;
