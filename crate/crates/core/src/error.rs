use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("timestamps must be strictly increasing (violation at index {index})")]
    NonMonotonicTimestamps { index: usize },

    #[error("timestamp {got} s is not after the previous frame at {previous} s")]
    NonMonotonicTimestamp { previous: f64, got: f64 },

    #[error("signal is empty")]
    EmptySignal,

    #[error("invalid band {low_hz}..{high_hz} Hz (order {order}) for Nyquist {nyquist_hz} Hz")]
    InvalidBand {
        low_hz: f64,
        high_hz: f64,
        order: usize,
        nyquist_hz: f64,
    },

    #[error("signal too short: need more than {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },

    #[error("chunk starts at {got} s but the stream expects {expected} s")]
    OutOfOrderChunk { expected: f64, got: f64 },

    #[error("chunk sample rate {got} Hz does not match stream rate {expected} Hz")]
    SampleRateMismatch { expected: f64, got: f64 },

    #[error("no valid inter-beat intervals")]
    NoValidIbis,

    #[error("need at least {needed} valid inter-beat intervals, got {got}")]
    TooFewIbis { needed: usize, got: usize },

    #[error("input is empty")]
    EmptyInput,

    #[error("degenerate window: all intervals identical (SDNN = 0)")]
    DegenerateWindow,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("target value at index {index} is zero")]
    ZeroTarget { index: usize },

    #[error("need at least 2 points, got {got}")]
    TooFewPoints { got: usize },

    #[error("the verified-peaks protocol needs a verified peak list")]
    MissingVerifiedPeaks,

    #[error("the protocol needs a ground-truth pulse signal")]
    MissingGroundTruthPulse,

    #[error("trace is empty")]
    EmptyTrace,

    #[error("need at least {needed} timed frames, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid synthesis spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for malformed or unreadable input files, as opposed to inputs
    /// that parse but violate an operation's preconditions.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Format { .. } | Error::Io { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
