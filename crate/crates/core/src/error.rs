use thiserror::Error;

pub type Result<T> = std::result::Result<T, KrrError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KrrError {
    #[error("spectrum is empty: every coefficient is zero")]
    EmptySpectrum,

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("feature dimension {dim} exceeds the cap of {cap}")]
    FeatureCapExceeded { dim: u128, cap: u128 },

    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),

    #[error("closed form is not available for this weight geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("quantity is undefined: {0}")]
    Undefined(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("no admissible k for the given (N, lambda)")]
    EmptyAdmissibleSet,

    #[error("k*_(b, lambda) is infinite for N = {n}, b = {b}")]
    InfiniteIndex { n: usize, b: f64 },

    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },
}

impl KrrError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        KrrError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        KrrError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            KrrError::NonFinite(_) | KrrError::Undefined(_) | KrrError::Overflow(_)
        )
    }
}
