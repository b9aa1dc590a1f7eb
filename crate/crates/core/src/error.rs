use thiserror::Error;

/// Errors reported by the mechanism primitives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bidder index {index} out of range for {n} bidders")]
    BidderOutOfRange { index: usize, n: usize },
    #[error("signal grid for bidder {bidder} is empty")]
    EmptyGrid { bidder: usize },
    #[error("signal grid for bidder {bidder} is not strictly increasing")]
    GridNotIncreasing { bidder: usize },
    #[error("signal {value} of bidder {bidder} is not a grid point")]
    SignalNotOnGrid { bidder: usize, value: f64 },
    #[error("profile has length {got}, expected {expected}")]
    ProfileLength { expected: usize, got: usize },
    #[error("expected a non-negative finite value, got {0}")]
    NegativeValue(f64),
    #[error("expected a positive value, got {0}")]
    NonPositiveValue(f64),
    #[error("invalid valuation descriptor: {0}")]
    InvalidDescriptor(&'static str),
    #[error("grid product has {size} profiles, above the cap of {cap}")]
    GridTooLarge { size: u128, cap: u128 },
    #[error("normalization factor {0} is below 1")]
    InvalidEta(f64),
    #[error("item count {m} must satisfy 1 <= m < n = {n}")]
    ItemCountOutOfRange { m: usize, n: usize },
    #[error("mechanism needs at least {min} bidders, got {n}")]
    TooFewBidders { n: usize, min: usize },
    #[error("allocation sums to {sum}, above the supply of {supply}")]
    Infeasible { sum: f64, supply: f64 },
    #[error("marginal vector is invalid: {0}")]
    InvalidMarginals(&'static str),
    #[error("matrix is not in the class of row/column sub-stochastic matrices: {0}")]
    NotSubStochastic(&'static str),
    #[error("graph has no edges")]
    NoEdges,
    #[error("numeric integration did not converge")]
    IntegrationDiverged,
}

pub type Result<T> = core::result::Result<T, Error>;
