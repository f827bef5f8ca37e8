//! Monte-Carlo experiments behind the chain's security and cost claims:
//! composition statistics of random functions, online inversion attacks on
//! same-function and independent-function chains, and checkpoint schemes
//! under Poisson login traffic.
//!
//! Trial `i` of an experiment seeded with `s` uses its own generator seeded
//! with `s ^ i`, so results do not depend on scheduling.

pub mod attacks;
pub mod family;
pub mod lemmas;
pub mod logins;
pub mod stats;

pub use stats::StatReport;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("collision test needs two distinct points, got {0} twice")]
    SamePoint(u32),
}
