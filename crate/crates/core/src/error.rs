use std::path::PathBuf;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed file {file}: {reason}")]
    MalformedFile { file: String, reason: String },

    #[error("missing metadata field `{field}` for {file}")]
    MissingMetadata { file: String, field: String },

    #[error("non-finite sample in {file}, channel {channel}, index {index}")]
    NonFiniteSample {
        file: String,
        channel: String,
        index: usize,
    },

    #[error("at least 2 files are required for a split, found {found}")]
    InsufficientFiles { found: usize },

    #[error("largest scale 2^{j} exceeds segment length {l_seq}")]
    InvalidScale { j: u32, l_seq: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeError { expected: usize, found: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("k = {k} is invalid for {n} training points")]
    InvalidK { k: usize, n: usize },

    #[error("label `{0}` is not part of the task's label set")]
    UnknownLabel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("feature layout fingerprint mismatch: model expects {expected}, data has {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with a location such as a file or segment id.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by the run configuration rather than the data.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::InvalidConfig(_) | Error::InvalidScale { .. } | Error::InvalidK { .. } => true,
            Error::Context { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}
