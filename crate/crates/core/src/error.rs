use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("objects of mixed dataset style: {0}")]
    StyleMix(String),
    #[error("scenes have different dataset styles: {gt} vs {pred}")]
    StyleMismatch { gt: String, pred: String },
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("duplicate token `{0}`")]
    DuplicateToken(String),
    #[error("expected 512 shape codes, got {0}")]
    ShapeCodeLength(usize),
    #[error("grammar error at token {position}: {message}")]
    Grammar { position: usize, message: String },
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("embedding dimension must be even and >= 2, got {0}")]
    OddDimension(usize),
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch { expected: (usize, usize), actual: (usize, usize) },
    #[error("expected {expected} image tokens, got {actual}")]
    ImageLength { expected: usize, actual: usize },
    #[error("could not place object after {0} attempts")]
    PlacementInfeasible(usize),
    #[error("no object matches `{0}`")]
    TargetNotFound(String),
    #[error("reference `{0}` matches {1} objects")]
    AmbiguousReference(String, usize),
    #[error("ragged input: sequence {index} has length {actual}, expected {expected}")]
    RaggedInput { index: usize, expected: usize, actual: usize },
    #[error("value {value} outside [{min}, {max})")]
    OutOfRange { value: i64, min: i64, max: i64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed stream: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short code, printed by the CLI next to the message.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Schema(_) => "E_SCHEMA",
            Error::StyleMix(_) => "E_STYLE_MIX",
            Error::StyleMismatch { .. } => "E_STYLE_MISMATCH",
            Error::NonFinite(_) => "E_NON_FINITE",
            Error::UnknownToken(_) => "E_UNKNOWN_TOKEN",
            Error::DuplicateToken(_) => "E_DUPLICATE_TOKEN",
            Error::ShapeCodeLength(_) => "E_SHAPE_CODE_LENGTH",
            Error::Grammar { .. } => "E_GRAMMAR",
            Error::EmptyInput => "E_EMPTY_INPUT",
            Error::LengthMismatch { .. } => "E_LENGTH_MISMATCH",
            Error::OddDimension(_) => "E_ODD_DIMENSION",
            Error::ShapeMismatch { .. } => "E_SHAPE_MISMATCH",
            Error::ImageLength { .. } => "E_IMAGE_LENGTH",
            Error::PlacementInfeasible(_) => "E_PLACEMENT",
            Error::TargetNotFound(_) => "E_TARGET_NOT_FOUND",
            Error::AmbiguousReference(..) => "E_AMBIGUOUS_REFERENCE",
            Error::RaggedInput { .. } => "E_RAGGED_INPUT",
            Error::OutOfRange { .. } => "E_OUT_OF_RANGE",
            Error::InvalidConfig(_) => "E_CONFIG",
            Error::Format(_) => "E_FORMAT",
            Error::Io(_) => "E_IO",
            Error::Json(_) => "E_JSON",
        }
    }
}
