use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("index {index} out of range (valid: {valid})")]
    IndexOutOfRange { index: usize, valid: String },

    /// No state can emit the observation at frame `t` (0-based).
    #[error("observation at frame {t} has zero probability under every reachable state")]
    ImpossibleObservation { t: usize },

    #[error("emission type does not match observations: {0}")]
    EmissionMismatch(String),

    #[error("utterance {utterance} has {frames} frames, at least {required} required")]
    UtteranceTooShort {
        utterance: usize,
        frames: usize,
        required: usize,
    },

    #[error("training failed on utterance {utterance}, frame {frame}")]
    Training { utterance: usize, frame: usize },

    #[error("model fails validation: {0}")]
    InvalidModel(String),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("signal has {samples} samples, one analysis window needs {window}")]
    SignalTooShort { samples: usize, window: usize },

    #[error("degenerate frame: zero autocorrelation energy")]
    DegenerateFrame,

    #[error("every frame of the signal is degenerate (silence)")]
    AllFramesDegenerate,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("model already enrolled for speaker {speaker}, word {word}, variant {variant}")]
    DuplicateEnrollment {
        speaker: String,
        word: String,
        variant: String,
    },

    #[error("no enrolled models for word {word}, variant {variant}")]
    NoModels { word: String, variant: String },

    #[error("results were computed on different test sets: {0}")]
    ManifestMismatch(String),

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("audio decode: {0}")]
    Audio(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            reason: reason.into(),
        }
    }
}
