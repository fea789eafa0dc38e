//! File formats, generators, and harness plumbing around
//! `posted-market-core`.
//!
//! The core crate is pure and IO-free; everything that touches JSON, CSV,
//! randomness specs, or the filesystem lives here. The `posted-market`
//! binary is a thin clap wrapper over these modules.

pub mod format;
pub mod generator;
pub mod report;
pub mod sweep;

/// Default ceiling on exhaustive enumeration work (mechanism runs, support
/// points); override with the `POSTED_MARKET_CAP` environment variable.
pub const DEFAULT_CAP: u128 = 1_000_000;

/// The enumeration cap, honoring `POSTED_MARKET_CAP` when set.
pub fn work_cap() -> u128 {
    std::env::var("POSTED_MARKET_CAP")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_CAP)
}
