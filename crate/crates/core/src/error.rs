use alloc::string::String;

use crate::GoodId;

/// Everything that can go wrong when building or evaluating a market model.
///
/// Variants carry enough context to point at the offending object; callers
/// that need a witness (e.g. a monotonicity violation) get it in the message.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("cost schedule is not convex: marginal #{index} decreases")]
    NonConvexSchedule { index: usize },
    #[error("cost schedule has a negative marginal at #{index}")]
    NegativeMarginal { index: usize },
    #[error("good id {0} is not part of the instance")]
    UnknownGood(GoodId),
    #[error("no price posted for available good {0}")]
    MissingPrice(GoodId),
    #[error("operation requires clause-structured (additive or XoS) valuations")]
    NotClauseStructured,
    #[error("invalid valuation: {0}")]
    InvalidValuation(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid price plan: {0}")]
    InvalidPlan(String),
    #[error("arrival order must be a permutation of the buyers")]
    InvalidOrder,
    #[error("{what} needs {needed} combinations, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        needed: u128,
        cap: u128,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("expected a finite value in {0}")]
    NotFinite(&'static str),
}
