use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("loss became non-finite at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("record not found: {0}")]
    Lookup(String),

    #[error("format error in {context}: {reason}")]
    Format { context: String, reason: String },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("unsupported {what} version {found} (expected {expected})")]
    Version {
        what: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("checkpoint holds a {found} model, expected {expected}")]
    ModelKindMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error(
        "audio synchronization needs manual validation: {reason} (confidence {confidence:.3})"
    )]
    LowConfidenceSync { reason: String, confidence: f64 },

    #[error("cannot balance test set: {positives} positive / {negatives} negative samples")]
    Balancing { positives: usize, negatives: usize },

    #[error("ROC-AUC undefined: {positives} positive / {negatives} negative samples")]
    UndefinedAuc { positives: usize, negatives: usize },

    #[error("{path}:{line}: {reason}")]
    Row {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("run with seed {seed} failed: {source}")]
    SeedRun {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("missing artifact {path}; run `gazefuse {producer}` first")]
    MissingArtifact { path: PathBuf, producer: &'static str },

    #[error("{failed} of {total} sessions failed: {sessions:?}")]
    PartialFailure {
        total: usize,
        failed: usize,
        sessions: Vec<String>,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn format(context: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Self {
        let context = context.into();
        move |source| Error::Io { context, source }
    }
}
