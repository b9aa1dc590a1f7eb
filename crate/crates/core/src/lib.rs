//! Randomized candidate filtering for auctions with interdependent values.
//!
//! Bidders hold private signals and private valuation functions over the
//! joint signal profile. The mechanisms here round values down to a randomly
//! shifted power-of-two grid, mark as candidates the bidders whose rounded
//! value beats every rival's rounded low estimate (ties broken by a random
//! priority), and allocate in proportion to the probability of being a
//! candidate. The exact closed forms make the single-item mechanism run with
//! `O(n^2)` value queries; the multi-unit variant rounds the fractional
//! allocation through a matching decomposition.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod diagnostics;
pub mod error;
pub mod generate;
pub mod instance;
pub mod matching;
pub mod multi_unit;
pub mod numeric;
pub mod oracle;
pub mod properties;
pub mod signal;
pub mod single_item;
pub mod valuations;

pub use error::{Error, Result};
pub use instance::{lex_greater, AuctionInstance, MechanismOutcome, Priority, Reports};
pub use numeric::{draw_seed, RoundingSeed, SeedStream};
pub use oracle::{QueryCounts, Valuation, ValuationOracle};
pub use signal::{SignalProfile, SignalSpace};
pub use valuations::{build_valuation, ValuationFamily};
