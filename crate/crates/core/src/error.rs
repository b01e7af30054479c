use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("edge list line {line}: {reason}")]
    EdgeListParse { line: usize, reason: String },

    #[error("edge list contains no edges")]
    EmptyEdgeList,

    #[error("response csv line {line}: {reason}")]
    ResponseCsv { line: usize, reason: String },

    #[error("length mismatch: expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("design matrix is rank deficient in the {column} column")]
    SingularDesign { column: &'static str },

    #[error("fisher information is singular or indefinite along the {column} column")]
    SingularInformation { column: &'static str },

    #[error(
        "saturated exposure class is empty (treated-saturated: {treated_saturated}, \
         control-saturated: {control_saturated})"
    )]
    EmptyExposureClass {
        treated_saturated: usize,
        control_saturated: usize,
    },

    #[error("treatment arm is empty (treated: {treated}, control: {control})")]
    EmptyArm { treated: usize, control: usize },

    #[error("response vector has a single class; a binary fit needs both outcomes")]
    DegenerateResponse,

    #[error("response vector is not binary at index {index} (value {value})")]
    NonBinaryResponse { index: usize, value: f64 },

    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("covariance matrix is not symmetric")]
    AsymmetricCovariance,

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("report json: {0}")]
    Json(#[from] serde_json::Error),
}
