use thiserror::Error;

/// Errors raised by the arithmetic, lattice and group layers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("element cap of {cap} exceeded")]
    CapExceeded { cap: u64 },
    #[error("no fixed point after {iterations} iterations")]
    NonConvergence { iterations: u64 },
    #[error("hypothesis unmet: {0}")]
    HypothesisUnmet(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("lemma violation: {0}")]
    LemmaViolation(String),
    #[error("subgroup could not be classified")]
    Unclassifiable,
    #[error("elements of prime-power order do not form a subgroup")]
    NotNormalSylow,
    #[error("construction failed: {0}")]
    ConstructionFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
