use std::path::PathBuf;

/// Errors raised across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("block pattern mismatch: {0}")]
    PatternMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("the block pattern has no global block")]
    NoGlobalBlock,

    #[error("index {index} out of range for {len} latent blocks")]
    LatentIndex { index: usize, len: usize },

    #[error("operation requires a {expected} pattern")]
    WrongPatternKind { expected: &'static str },

    #[error("all mixture components underflow at this point")]
    Underflow,

    #[error("optimization diverged at iteration {iteration} in {parameter}")]
    Divergence { iteration: usize, parameter: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data at row {row}: {message}")]
    Data { row: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record: {0}")]
    Format(String),
}

impl Error {
    /// Short machine-readable tag used in structured error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::PatternMismatch(_) => "pattern_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::NoGlobalBlock => "no_global_block",
            Error::LatentIndex { .. } => "latent_index",
            Error::WrongPatternKind { .. } => "wrong_pattern_kind",
            Error::Underflow => "underflow",
            Error::Divergence { .. } => "divergence",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Data { .. } => "data",
            Error::Io { .. } => "io",
            Error::Format(_) => "format",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

pub(crate) fn check_finite(context: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context.to_string()))
    }
}
