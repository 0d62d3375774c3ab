use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("index ({m}, {n}) outside the array")]
    IndexOutOfRange { m: i32, n: i32 },
    #[error("lag {tau} must be smaller than the slot count {slots}")]
    LagTooLarge { tau: usize, slots: usize },
    #[error("slot count mismatch: expected {expected}, got {actual}")]
    SlotMismatch { expected: usize, actual: usize },
    #[error("subspace dimension insufficient: dimension {dimension} for {sources} sources")]
    SubspaceDimension { dimension: usize, sources: usize },
    #[error("insufficient snapshots: covariance rank {rank} below {required}")]
    InsufficientSnapshots { rank: usize, required: usize },
    #[error("near-collinear geometry (condition number {condition:.3e})")]
    NearCollinear { condition: f64 },
    #[error("ill-conditioned refinement: {0}")]
    Conditioning(String),
    #[error("singular Fisher information matrix")]
    SingularFim,
    #[error("solver did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed table: {0}")]
    MalformedTable(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
