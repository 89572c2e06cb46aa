use thiserror::Error;

/// Which rank condition of the pilot/combiner design was not met.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankCondition {
    /// Too few independent transmit precoders (`K`).
    Precoders,
    /// Too few independent receive combiner outputs (`L`).
    Combiners,
}

impl core::fmt::Display for RankCondition {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RankCondition::Precoders => f.write_str("K (transmit precoders)"),
            RankCondition::Combiners => f.write_str("L (receive combiners)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("operation requires the {expected} architecture")]
    UnsupportedArchitecture { expected: &'static str },
    #[error("unsupported partition: {0}")]
    UnsupportedPartition(&'static str),
    #[error("hardware response is singular at index {index}")]
    SingularHardware { index: usize },
    #[error("calibration coefficient is zero at index {index}")]
    SingularCalibration { index: usize },
    #[error("underdetermined channel estimate: {condition} has rank {rank}, need {required}")]
    Underdetermined {
        condition: RankCondition,
        rank: usize,
        required: usize,
    },
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("contract violation: {0}")]
    ContractViolation(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
