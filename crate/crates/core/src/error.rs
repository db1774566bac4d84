use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum McmError {
    #[error("division is not exact")]
    DivisionNotExact,
    #[error("ring mismatch: {0}")]
    RingMismatch(String),
    #[error("invalid grade: {0}")]
    InvalidGrade(String),
    #[error("polynomial is not homogeneous")]
    NotHomogeneous,
    #[error("arity error: {0}")]
    ArityError(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid ring: {0}")]
    InvalidRing(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("mode error: {0}")]
    ModeError(String),
    #[error("invalid selection: {0}")]
    InvalidSelection(String),
    #[error("characteristic {q} does not exceed the largest exponent {max_exponent}")]
    CharacteristicTooSmall { q: u64, max_exponent: u64 },
    #[error("shape error: {0}")]
    ShapeError(String),
    #[error("sampling failed: {0}")]
    SamplingFailed(String),
    #[error("enumeration budget exceeded: {needed} > {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("pivot entry is zero")]
    PivotRejected,
    #[error("invalid jet: {0}")]
    InvalidJet(String),
}

pub type Result<T> = std::result::Result<T, McmError>;
