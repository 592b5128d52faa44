use thiserror::Error;

/// Errors raised by the disc, norm, summing, and molecule operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlochError {
    #[error("point {re}+{im}i is not inside the open unit disc")]
    OutsideDisc { re: f64, im: f64 },

    #[error("rotation has modulus {modulus}, expected 1")]
    NotUnimodular { modulus: f64 },

    #[error("taylor node trusted only for |z| <= {radius}, evaluated at |z| = {modulus}")]
    OutOfValidity { radius: f64, modulus: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid expression: {0}")]
    InvalidExpr(String),

    #[error("certification failure: {0}")]
    CertificationFailure(String),

    #[error("exponent {0} is not admissible here")]
    InvalidExponent(f64),

    #[error("pietsch program infeasible: point {point} has no family member with nonzero derivative")]
    Infeasible { point: usize },

    #[error("linear program failed: {0}")]
    LpFailure(String),

    #[error("factorization images inconsistent on the span (residual {residual:e})")]
    RankDeficiency { residual: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, BlochError>;

impl From<serde_json::Error> for BlochError {
    fn from(err: serde_json::Error) -> Self {
        BlochError::Parse(err.to_string())
    }
}
