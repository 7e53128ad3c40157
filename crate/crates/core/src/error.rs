use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid feasible set: {0}")]
    InvalidSet(String),

    #[error("step size must be positive and finite, got {0}")]
    InvalidStepSize(f64),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("posterior normalizer vanished at gap {gap}")]
    PosteriorUnderflow { gap: u64 },

    #[error("observation at round {round} carries no disclosed probability")]
    MissingDisclosure { round: u64 },

    #[error("invalid probability {value} ({context})")]
    InvalidProbability { value: f64, context: &'static str },

    #[error("observation round {round} does not follow the previous observation at {last}")]
    NonIncreasingRound { round: u64, last: u64 },

    #[error("gap must be a positive number of rounds")]
    InvalidGap,

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("at least {needed} trials are required, got {found}")]
    InsufficientTrials { needed: usize, found: usize },

    #[error("csv row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("config `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
