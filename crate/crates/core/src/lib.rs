//! Exact-arithmetic toolkit for posted-price mechanisms in combinatorial
//! markets with convex production costs.
//!
//! The crate models markets where a seller posts a static price and a supply
//! cap per good, buyers arrive in some order, and each buyer purchases a
//! utility-maximizing bundle of whatever is still available. Production is
//! governed by convex marginal-cost schedules (a finite schedule encodes a
//! hard supply limit). On top of that sit:
//!
//! * a greedy combinatorial allocation for XoS (fractionally subadditive)
//!   valuations together with a brute-force welfare oracle,
//! * pricing rules that turn a benchmark allocation into posted prices with
//!   provable welfare guarantees (pay-as-sold and committed-production
//!   variants, a reduction for general subadditive valuations, and a
//!   randomized guess-the-price rule needing no prior),
//! * an exact expectation engine over valuation profiles, supply
//!   realizations, and arrival orders, plus verifiers that check each
//!   guarantee empirically at desk scale.
//!
//! All arithmetic is exact: probabilities, prices, and welfare are
//! `BigRational`, extended with infinities where the model needs them
//! (unproducible copies, infeasible allocations). Nothing here does IO; the
//! companion CLI crate handles files and formats.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod allocation;
mod error;
pub mod mechanism;
pub mod model;
pub mod pricing;
pub mod rational;
pub mod set;
pub mod valuation;

pub use error::Error;
pub use rational::{ExtRat, Rat};
pub use set::GoodSet;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Goods are indexed `0..M` within an instance.
pub type GoodId = usize;

/// Buyers are indexed `0..N` within an instance.
pub type BuyerId = usize;
