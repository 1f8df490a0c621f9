use thiserror::Error;

/// Errors shared by the computational modules.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A kernel or curvature was evaluated at (or too close to) a singular
    /// configuration: zero displacement or coincident points.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid construction input (empty cloud, nonpositive weight, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A generator specification failed validation.
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    /// A requested quantity does not exist for this configuration.
    #[error("empty selection: {0}")]
    Empty(String),

    /// File or serialization failure.
    #[error("i/o error: {0}")]
    Io(String),

    /// A resource guard (memory, generation span, exact-sum cap) tripped.
    #[error("resource limit: {0}")]
    ResourceLimit(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
