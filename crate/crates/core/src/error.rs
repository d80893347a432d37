use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("trajectory already terminated")]
    AlreadyTerminated,

    #[error("unparsed verdict")]
    UnparsedVerdict,

    #[error("unparseable verification: no recognizable conclusion in {0:?}")]
    UnparseableVerification(String),

    #[error("action {index} is not a {expected} action")]
    WrongActionKind { index: usize, expected: &'static str },

    #[error("action index {index} out of range for trajectory of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("expected a solve action")]
    ExpectedSolve,

    #[error("trajectory has no solve action")]
    NoSolveAction,

    #[error("action {index} is impossible under the action grammar: {reason}")]
    Grammar { index: usize, reason: &'static str },

    #[error("trajectory text malformed at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("verification label mismatch at round {round}")]
    LabelMismatch { round: usize },

    #[error("answers not distinct")]
    AnswersNotDistinct,

    #[error("leave-one-out requires at least two samples")]
    TooFewSamples,

    #[error("empty group")]
    EmptyGroup,

    #[error("empty position group")]
    EmptyPositionGroup,

    #[error("no training data after filtering")]
    NoTrainingData,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Data { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
