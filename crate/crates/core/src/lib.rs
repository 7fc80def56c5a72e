//! Spectral toolkit for a conformable-derivative diffusion pencil.
//!
//! The object of study is the quadratic eigenvalue problem
//!
//! ```text
//!   -D^a D^a y + (2 lambda p(x) + q(x)) y = lambda^2 y   on (0, pi),
//!   D^a y(0) - h y(0) = 0,      D^a y(pi) + H y(pi) = 0,
//! ```
//!
//! where `D^a f(x) = x^(1-a) f'(x)` is the conformable derivative of order
//! `a` in (0, 1]. The crate computes the characteristic function
//! `Delta(lambda)` by shooting in the substituted variable `u = x^a / a`,
//! enumerates the real eigenvalue sequence with argument-principle
//! certification on circles around the origin, and evaluates both sides of
//! the two regularized trace identities satisfied by the spectrum.
//!
//! Everything is deterministic: identical inputs produce bit-identical
//! results regardless of thread count (parallel reductions are
//! index-ordered).

pub mod check;
pub mod conformable;
pub mod error;
pub mod expr;
pub mod problem;
pub mod quad;
pub mod rng;
pub mod scaled;
pub mod solver;
pub mod spectrum;
pub mod tables;
pub mod trace;

pub use check::CheckResult;
pub use conformable::{CoordinateMap, FractionalOrder, PencilState, SmoothFunction};
pub use error::{CfdoError, Result};
pub use expr::{ExprAst, ParseError};
pub use problem::{CoefficientSeqTerm, NumericalSettings, PencilConstants, ProblemSpec, ShiftMode};
pub use solver::{CharacteristicValue, Trajectory};
pub use spectrum::{ContourSpec, EigenDetail, Spectrum};
pub use trace::{PartialSumSeries, TraceFormula, TraceReport};
