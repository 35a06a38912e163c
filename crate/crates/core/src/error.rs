use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The operation needs a non-zero field.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// `circular_fraction` is the signed share of intensity in circular
    /// polarization, `2 Im(ex conj(ey)) / I`, in `[-1, 1]`.
    #[error("beam is not linearly polarized (circular fraction {circular_fraction:.3e})")]
    NotLinear { circular_fraction: f64 },

    #[error("posterior undefined: both channel likelihoods vanish")]
    UndefinedPosterior,

    #[error("configuration error: {0}")]
    Config(String),
}
