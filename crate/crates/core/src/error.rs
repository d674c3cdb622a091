use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("batch of {0} cannot be normalized in train mode (need at least 2)")]
    BatchTooSmall(usize),
    #[error("unsupported resampling ratio {from_hz} Hz -> {to_hz} Hz")]
    UnsupportedRatio { from_hz: f64, to_hz: f64 },
    #[error("invalid band {low_hz}..{high_hz} Hz at sample rate {fs} Hz")]
    InvalidBand { low_hz: f64, high_hz: f64, fs: f64 },
    #[error("degenerate polynomial fit: {points} points for order {order}")]
    DegenerateFit { points: usize, order: usize },
    #[error("tolerance is zero for a constant sequence")]
    ZeroTolerance,
    #[error("sequence of length {len} too short (need at least {min})")]
    TooShort { len: usize, min: usize },
    #[error("labels contain a single class")]
    SingleClass,
    #[error("class {class} has {count} members, fewer than {k} folds")]
    ClassTooSmall { class: usize, count: usize, k: usize },
    #[error("empty domain: {0}")]
    EmptyDomain(&'static str),
    #[error("segment is tagged corrupted; run the quality gate first")]
    CorruptedInput,
    #[error("checkpoint layout mismatch: {0}")]
    Checkpoint(String),
}

pub type Result<T> = core::result::Result<T, Error>;
