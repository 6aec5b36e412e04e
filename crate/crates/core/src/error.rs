use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFiniteInput(String),
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("modality mismatch: {0}")]
    ModalityMismatch(String),
    #[error("empty group: {0}")]
    EmptyGroup(String),
    #[error("invalid layer index {index} (network has {len} layers)")]
    InvalidLayer { index: usize, len: usize },
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },
    #[error("kernel {kernel:?} does not fit input of shape {shape:?}")]
    KernelTooLarge {
        kernel: Vec<usize>,
        shape: Vec<usize>,
    },
    #[error("invalid parameters: {0}")]
    InvalidSpec(String),
    #[error("surrogate fit is singular: {0}")]
    SingularFit(String),
    #[error("model has no gradient capability")]
    NoGradientCapability,
    #[error("model has no convolutional activation capability")]
    NoActivationCapability,
    #[error("model has no representation capability")]
    NoRepresentationCapability,
    #[error("baseline pool is empty")]
    EmptyPool,
    #[error("operation not supported for modality {0}")]
    WrongModality(String),
    #[error("requested {requested} segments for {elements} elements")]
    TooManySegments { requested: usize, elements: usize },
    #[error("requested {k} clusters for {points} points")]
    TooFewPoints { k: usize, points: usize },
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),
    #[error("batch of {size} is too small (need at least {min})")]
    BatchTooSmall { size: usize, min: usize },
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("all cells missing for metric {metric}, method {method}")]
    AllMissing { metric: String, method: String },
    #[error("method universe is empty")]
    MethodUniverseEmpty,
    #[error("incomplete rank cube: {0}")]
    IncompleteCube(String),
    #[error("degenerate groups: {0}")]
    DegenerateGroups(String),
    #[error("all values tied")]
    AllTied,
    #[error("malformed array header: {0}")]
    MalformedHeader(String),
    #[error("unsupported dtype {0:?}; only '<f8' and '<i8' are accepted (convert with arr.astype('<f8') before saving)")]
    UnsupportedDtype(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("missing stage input: {0}")]
    MissingStageInput(String),
    #[error("config hash mismatch: output directory holds {found}, current config is {expected} (use --force to overwrite)")]
    ConfigHashMismatch { expected: String, found: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable reason code, used by the CLI exit line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonFiniteInput(_) => "NonFiniteInput",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::ModalityMismatch(_) => "ModalityMismatch",
            Error::EmptyGroup(_) => "EmptyGroup",
            Error::InvalidLayer { .. } => "InvalidLayer",
            Error::Divergence { .. } => "Divergence",
            Error::KernelTooLarge { .. } => "KernelTooLarge",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::SingularFit(_) => "SingularFit",
            Error::NoGradientCapability => "NoGradientCapability",
            Error::NoActivationCapability => "NoActivationCapability",
            Error::NoRepresentationCapability => "NoRepresentationCapability",
            Error::EmptyPool => "EmptyPool",
            Error::WrongModality(_) => "WrongModality",
            Error::TooManySegments { .. } => "TooManySegments",
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::DegenerateCurve(_) => "DegenerateCurve",
            Error::BatchTooSmall { .. } => "BatchTooSmall",
            Error::DegenerateSample(_) => "DegenerateSample",
            Error::AllMissing { .. } => "AllMissing",
            Error::MethodUniverseEmpty => "MethodUniverseEmpty",
            Error::IncompleteCube(_) => "IncompleteCube",
            Error::DegenerateGroups(_) => "DegenerateGroups",
            Error::AllTied => "AllTied",
            Error::MalformedHeader(_) => "MalformedHeader",
            Error::UnsupportedDtype(_) => "UnsupportedDtype",
            Error::TruncatedPayload { .. } => "TruncatedPayload",
            Error::MissingStageInput(_) => "MissingStageInput",
            Error::ConfigHashMismatch { .. } => "ConfigHashMismatch",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }
}
