use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate speed: vx = {vx} m/s is at or below the {floor} m/s floor")]
    DegenerateSpeed { vx: f64, floor: f64 },

    #[error("point is {distance:.3} m from the curve, beyond the {cutoff} m projection cutoff")]
    ProjectionFailed { distance: f64, cutoff: f64 },

    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for {len} lanes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("plant delay mismatch: {0}")]
    DelayMismatch(String),

    #[error("no gain in the sweep stabilizes every design speed")]
    NoStabilizingGain,

    #[error("degenerate transfer function: {0}")]
    DegenerateTransferFunction(String),

    #[error("non-finite loss at iteration {iteration}: {detail}")]
    NonFiniteLoss { iteration: u64, detail: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
