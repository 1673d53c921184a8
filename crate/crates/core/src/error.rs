use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("measure is not normalized: total mass {mass}")]
    NotNormalized { mass: f64 },

    #[error("index {index} out of range for {len} particles")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("every grid cell is below the mass floor {floor}")]
    EmptySupport { floor: f64 },

    #[error("explicit step violates the stability bound: dt = {dt} > {bound}")]
    Cfl { dt: f64, bound: f64 },

    #[error("non-finite state at step {step}: {what}")]
    NonFinite { step: usize, what: String },

    #[error("mean-field oracle has no data for step {step} (last step {last})")]
    OracleOutOfRange { step: usize, last: usize },

    #[error("{mass} of sample mass lies outside the reference support")]
    SupportLeakage { mass: f64 },

    #[error("problem size {size} exceeds the limit {limit}")]
    TooLarge { size: usize, limit: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
