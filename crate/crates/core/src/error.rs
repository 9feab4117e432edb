use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error kinds raised across the pipeline.
///
/// The message strings are part of the public contract; callers (and the CLI
/// exit-code mapping) match on the variants, not on the text.
#[derive(Error, Debug)]
pub enum Error {
    #[error("insufficient signal: {0}")]
    InsufficientSignal(String),

    #[error("non-monotone beats at index {0}")]
    NonMonotoneBeats(usize),

    #[error("insufficient beats: need at least {needed}, got {got}")]
    InsufficientBeats { needed: usize, got: usize },

    #[error("invalid band: {0}")]
    InvalidBand(String),

    #[error("no training data")]
    NoTrainingData,

    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate representation (zero norm)")]
    DegenerateRepresentation,

    #[error("expected unit representation (norm {0})")]
    ExpectedUnitRepresentation(f64),

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("unnormalized point (norm {0})")]
    UnnormalizedPoint(f64),

    #[error("time went backwards: {now} < {last}")]
    TimeWentBackwards { now: f64, last: f64 },

    #[error("calibration failed: no dense normal region")]
    CalibrationFailed,

    #[error("AUC undefined: {0}")]
    AucUndefined(String),

    #[error("no negative regions")]
    NoNegativeRegions,

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("incompatible model: {0}")]
    IncompatibleModel(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Coarse grouping used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Incompatible,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::IncompatibleModel(_) => ErrorClass::Incompatible,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn parse(line: u64, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
