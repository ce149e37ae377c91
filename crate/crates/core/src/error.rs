use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("grid too coarse: need at least {required} subintervals, got {actual}")]
    GridTooCoarse { required: usize, actual: usize },

    #[error("problem is non-resonant: ker(I - xi^(alpha-1) A) is trivial")]
    NonResonant,

    #[error("right-hand side returned a non-finite value at node {node} (t = {t})")]
    NonFiniteRhs { node: usize, t: f64 },

    #[error("no bound certified: lambda2 * mu1 = {0} >= 1")]
    NoBound(f64),

    #[error("not applicable: {0}")]
    NotApplicable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
