use thiserror::Error;

/// Errors raised by the operator-algebra and verification layers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An index (mode, table position, level) is out of range.
    #[error("range error: {0}")]
    Range(String),

    /// The requested Fock space would exceed the configured dimension cap.
    #[error("capacity error: dimension {requested} exceeds cap {cap}")]
    Capacity { requested: String, cap: usize },

    /// Inputs violate a precondition of the operation.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The block capacity condition n_modes * m <= min(d_a, d_b) fails.
    #[error("empty solution set: {modes} modes of rank {m} do not fit into min(d_a, d_b) = {capacity}")]
    EmptySolution { modes: usize, m: usize, capacity: usize },

    /// No closed form is known for the requested coefficient pattern.
    #[error("no closed form for P_{n}^{{{k}{l}}}({j})")]
    NotCovered { n: u32, k: u32, l: u32, j: u32 },

    /// A run configuration is inconsistent or incomplete.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
