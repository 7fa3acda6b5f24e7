use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("coincident particle centers (zero pair distance)")]
    CoincidentCenters,

    #[error("invalid particle state: {0}")]
    InvalidState(String),

    #[error("displacement {displacement} exceeds box length {length} on the {axis} axis; reduce the step size")]
    StepTooLarge {
        axis: char,
        displacement: f64,
        length: f64,
    },

    #[error("setup failed at density {density:.4} (N = {n}): {reason}")]
    Setup {
        n: usize,
        density: f64,
        reason: String,
    },

    #[error("undefined input: {0}")]
    UndefinedInput(String),

    #[error("power-law fit: {0}")]
    Fit(String),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
