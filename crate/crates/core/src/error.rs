//! Error taxonomy shared by every module.
//!
//! Validation problems (bad expressions, out-of-range parameters) are kept
//! distinct from numerical failures (tolerance breaches, lost roots) so the
//! CLI can map them to different exit codes.

use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T> = std::result::Result<T, CfdoError>;

#[derive(Debug, Clone, Error)]
pub enum CfdoError {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    /// Input outside the domain of an operation (for example a non-finite
    /// derivative value at a named point).
    #[error("domain error: {0}")]
    Domain(String),

    /// A quadrature or winding computation stopped short of its tolerance.
    #[error("accuracy error in {context}: requested {requested:.3e}, achieved {achieved:.3e}")]
    Accuracy {
        context: String,
        requested: f64,
        achieved: f64,
    },

    /// Adaptive integrator step-size collapse.
    #[error("integration failure at u = {location:.6}: {message}")]
    Integration { location: f64, message: String },

    /// The two independent evaluations of the characteristic function
    /// disagree beyond tolerance.
    #[error(
        "characteristic-value consistency breach at lambda = {lambda_re}+{lambda_im}i: \
         discrepancy {discrepancy:.3e} >= {limit:.3e}"
    )]
    Consistency {
        lambda_re: f64,
        lambda_im: f64,
        discrepancy: f64,
        limit: f64,
    },

    /// Eigenvalue certification failed: the winding count and the located
    /// root multiset disagree.
    #[error("completeness error: winding count {expected} but {found} roots stored; suspect window {window}")]
    Completeness {
        expected: i64,
        found: i64,
        window: String,
    },

    /// Bracketing failed to trap a sign change after all expansions.
    #[error(
        "root search error for index {index}: no sign change in [{lo:.9}, {hi:.9}] after expansion"
    )]
    Search { index: i64, lo: f64, hi: f64 },

    /// A closed-form constant involves a fractional power of a negative
    /// base and is therefore undefined for the given data.
    #[error("undefined constant {name}: term {term} takes a fractional power of a negative base")]
    UndefinedConstant { name: String, term: String },

    /// Operation not defined for the given node or mode.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Configuration invalid before any computation started.
    #[error("validation error: {0}")]
    Validation(String),
}

impl CfdoError {
    /// True for errors that indicate bad input rather than a numerical
    /// breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            CfdoError::Parse(_) | CfdoError::Validation(_) | CfdoError::Domain(_)
        )
    }
}
