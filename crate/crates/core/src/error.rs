use thiserror::Error;

/// Failures raised by the core models.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteError {
    /// The sensor sits on the source, where the plume model is singular.
    #[error("concentration is singular at the source (distance {distance:e} m)")]
    Singularity { distance: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Bellman loss became NaN or infinite.
    #[error("training diverged at update {update}: loss = {loss}")]
    Divergence { update: u64, loss: f64 },

    #[error("network architecture mismatch: {left:?} vs {right:?}")]
    ArchitectureMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = SteError> = std::result::Result<T, E>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(SteError::Config(msg.into()))
}
