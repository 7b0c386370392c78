use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown config key(s): {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("label out of range: {label} (classes: {classes})")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("unknown token surface `{0}`")]
    UnknownToken(String),

    #[error("token {0} is a special token")]
    SpecialToken(usize),

    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),

    #[error("requested sample of {requested} from {available} examples")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("expected {expected} dataset, found {found}")]
    Provenance {
        expected: &'static str,
        found: &'static str,
    },

    #[error("sequence of {len} positions exceeds max-positions {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("K = {k} exceeds the {eligible} eligible tokens")]
    KTooLarge { k: usize, eligible: usize },

    #[error("non-finite value in tensor `{0}`")]
    NonFinite(String),

    #[error("shape mismatch in tensor `{tensor}`: expected {expected}, found {found}")]
    Shape {
        tensor: String,
        expected: String,
        found: String,
    },

    #[error("unrecognized model file")]
    BadMagic,

    #[error("planting failed: {0}")]
    Planting(String),

    #[error("training diverged ({method}) at epoch {epoch}")]
    Divergence { method: String, epoch: usize },

    #[error("gradient check failed for {method}: max relative error {error:.3e}")]
    GradientMismatch { method: String, error: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-parsable code used by the CLI error line and the C ABI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::UnknownKeys(_) => "config",
            Error::Parse { .. } | Error::LabelOutOfRange { .. } | Error::UnknownToken(_) => "parse",
            Error::SpecialToken(_) | Error::KTooLarge { .. } | Error::SequenceTooLong { .. } => {
                "argument"
            }
            Error::EmptyDataset(_) | Error::SampleTooLarge { .. } | Error::Provenance { .. } => {
                "dataset"
            }
            Error::NonFinite(_) | Error::Divergence { .. } | Error::GradientMismatch { .. } => "numeric",
            Error::Shape { .. } | Error::BadMagic => "model-file",
            Error::Planting(_) => "planting",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
