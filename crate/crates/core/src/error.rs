use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("counterfunction value {value} at argument {argument} exceeds budget {budget}")]
    CounterfunctionBudget { argument: u64, value: u64, budget: u64 },
    #[error("index {index} is beyond the evaluation budget {budget}")]
    IndexBeyondBudget { index: u64, budget: u64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("growth witness failed: weight at index {index} does not reach {target}")]
    GrowthWitness { index: u64, target: String },
    #[error("weights are not positive and nondecreasing at index {0}")]
    WeightsNotMonotone(u64),
    #[error("bound sequence is not nondecreasing at index {0}")]
    BoundsNotMonotone(u64),
    #[error("rate is not declared independent of its counterfunction")]
    NotFunctionIndependent,
    #[error("product space has more than {limit} outcomes")]
    EnumerationBudget { limit: u64 },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid enumeration: {0}")]
    InvalidEnumeration(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),
    #[error("realizer output changed under a perturbation beyond index {modulus}")]
    ContinuityViolation { modulus: u64 },
    #[error("function family failed certification at n={n}: {reason}")]
    CertificationFailed { n: u64, reason: String },
    #[error("norm comparison could not be decided from the enclosure")]
    Undecided,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
