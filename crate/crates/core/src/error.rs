use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("hitting rate is undefined at t = {0} s (requires t > 0)")]
    Domain(f64),

    #[error("bit history of length {needed} exceeds channel profile of length {available}")]
    InsufficientMemory { needed: usize, available: usize },

    #[error("symbol index {index} exceeds the enumeration cap of {cap}; use the fitted threshold curve instead")]
    EnumerationCap { index: usize, cap: usize },

    #[error("hitting probabilities are not strictly descending (p_{index} <= p_{next})", next = .index + 1)]
    NotDescending { index: usize },

    #[error("the two weighted densities never cross (discriminant {0})")]
    NoCrossing(f64),

    #[error("no likelihood crossing inside bracket [{lo}, {hi}]")]
    BracketViolation { lo: f64, hi: f64 },

    #[error("threshold sequence is not strictly increasing at index {0}")]
    NonMonotone(usize),

    #[error("curve fit needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("threshold schedule covers {available} symbols, frame has {needed}")]
    ScheduleTooShort { needed: usize, available: usize },

    #[error("memory length K = {k} exceeds channel profile of length {available}")]
    MemoryTooLong { k: usize, available: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
