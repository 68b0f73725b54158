use thiserror::Error;

/// Errors produced by the aggregation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("score at index {index} is not finite ({value})")]
    NonFiniteScore { index: usize, value: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid ranking: {0}")]
    InvalidRanking(String),

    #[error("invalid concave spec: {0}")]
    InvalidConcaveSpec(String),

    #[error("invalid set function: {0}")]
    InvalidSetFunction(String),

    #[error("invalid relevance grades: {0}")]
    InvalidGrades(String),

    #[error("invalid discount: {0}")]
    InvalidDiscount(String),

    #[error("bound undefined: normalizer Z = {z} is not positive")]
    BoundUndefined { z: f64 },

    #[error("empty data set")]
    EmptyData,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("training diverged at epoch {epoch}: objective became non-finite (last good objective {last_objective})")]
    Diverged { epoch: usize, last_objective: f64 },

    #[error("activation domain violation for candidate {candidate}: input {input} outside domain of {activation}")]
    ActivationDomain {
        candidate: usize,
        input: f64,
        activation: String,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid record '{id}': {reason}")]
    InvalidRecord { id: String, reason: String },

    #[error("duplicate query id '{id}'")]
    DuplicateId { id: String },

    #[error("model has K = {model_k} scorers but data has K = {data_k}")]
    IncompatibleModel { model_k: usize, data_k: usize },

    #[error("unsupported format version {found} (supported: {supported})")]
    FormatVersion { found: u32, supported: u32 },

    #[error("prediction set does not cover query id '{id}'")]
    MissingPrediction { id: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
