//! Value-query access to bidders' private valuation functions.

use alloc::boxed::Box;
use alloc::sync::Arc;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::signal::SignalSpace;

/// A valuation over signal profiles.
pub trait Valuation: Send + Sync {
    /// `v(s)`, finite and non-negative.
    fn value(&self, signals: &[f64]) -> f64;

    /// Closed-form `inf_{o_i} v(o_i, s_-i)`, when the family has one.
    fn low_estimate(&self, _bidder: usize, _signals: &[f64], _space: &SignalSpace) -> Option<f64> {
        None
    }
}

/// Adapts a closure into a [`Valuation`] without a closed-form low estimate.
pub struct FnValuation<F>(pub F);

impl<F> Valuation for FnValuation<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn value(&self, signals: &[f64]) -> f64 {
        (self.0)(signals)
    }
}

/// Minimum of `v` over bidder `i`'s grid with the other signals fixed.
/// Uncounted; used by property checkers and as the fallback for oracles.
pub fn enumerate_low(v: &dyn Valuation, space: &SignalSpace, i: usize, signals: &[f64]) -> f64 {
    let mut s = signals.to_vec();
    let mut low = f64::INFINITY;
    for &o in space.grid(i) {
        s[i] = o;
        low = low.min(v.value(&s));
    }
    low
}

/// Query counts of one oracle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryCounts {
    pub value: u64,
    pub low: u64,
}

impl QueryCounts {
    pub fn total(&self) -> u64 {
        self.value + self.low
    }
}

impl core::ops::Add for QueryCounts {
    type Output = QueryCounts;

    fn add(self, rhs: QueryCounts) -> QueryCounts {
        QueryCounts {
            value: self.value + rhs.value,
            low: self.low + rhs.low,
        }
    }
}

impl core::iter::Sum for QueryCounts {
    fn sum<I: Iterator<Item = QueryCounts>>(iter: I) -> QueryCounts {
        iter.fold(QueryCounts::default(), |a, b| a + b)
    }
}

/// One bidder's valuation behind a counting query interface.
pub struct ValuationOracle {
    valuation: Box<dyn Valuation>,
    space: Arc<SignalSpace>,
    reported_d: Option<u32>,
    value_queries: AtomicU64,
    low_queries: AtomicU64,
}

impl fmt::Debug for ValuationOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ValuationOracle")
            .field("reported_d", &self.reported_d)
            .field("counts", &self.counts())
            .finish_non_exhaustive()
    }
}

impl ValuationOracle {
    pub fn new(valuation: Box<dyn Valuation>, space: Arc<SignalSpace>) -> Self {
        Self {
            valuation,
            space,
            reported_d: None,
            value_queries: AtomicU64::new(0),
            low_queries: AtomicU64::new(0),
        }
    }

    /// Attaches the bidder's reported self-bounding parameter.
    pub fn with_reported_d(mut self, d: u32) -> Self {
        self.reported_d = Some(d);
        self
    }

    pub fn reported_d(&self) -> Option<u32> {
        self.reported_d
    }

    pub fn space(&self) -> &SignalSpace {
        &self.space
    }

    /// The wrapped valuation, for uncounted evaluation.
    pub fn valuation(&self) -> &dyn Valuation {
        self.valuation.as_ref()
    }

    /// Counted value query `v(s)`.
    pub fn value(&self, signals: &[f64]) -> f64 {
        self.value_queries.fetch_add(1, Ordering::Relaxed);
        self.valuation.value(signals)
    }

    /// Counted low-estimate query: one query regardless of how it is answered.
    pub fn low_estimate(&self, i: usize, signals: &[f64]) -> Result<f64> {
        let n = self.space.n();
        if i >= n {
            return Err(Error::BidderOutOfRange { index: i, n });
        }
        self.low_queries.fetch_add(1, Ordering::Relaxed);
        Ok(self
            .valuation
            .low_estimate(i, signals, &self.space)
            .unwrap_or_else(|| enumerate_low(self.valuation.as_ref(), &self.space, i, signals)))
    }

    pub fn counts(&self) -> QueryCounts {
        QueryCounts {
            value: self.value_queries.load(Ordering::Relaxed),
            low: self.low_queries.load(Ordering::Relaxed),
        }
    }

    pub fn reset_counts(&self) {
        self.value_queries.store(0, Ordering::Relaxed);
        self.low_queries.store(0, Ordering::Relaxed);
    }
}

/// `min_{o_i} v(o_i, s_-i)` through counted value queries, one per grid point.
pub fn low_estimate_by_enumeration(oracle: &ValuationOracle, i: usize, signals: &[f64]) -> Result<f64> {
    let space = oracle.space();
    let n = space.n();
    if i >= n {
        return Err(Error::BidderOutOfRange { index: i, n });
    }
    space.check_profile(signals)?;
    let grid = space.grid(i);
    if grid.is_empty() {
        return Err(Error::EmptyGrid { bidder: i });
    }
    let mut s = signals.to_vec();
    let mut low = f64::INFINITY;
    for &o in grid {
        s[i] = o;
        low = low.min(oracle.value(&s));
    }
    Ok(low)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn oracle<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(n: usize, f: F) -> ValuationOracle {
        ValuationOracle::new(Box::new(FnValuation(f)), Arc::new(SignalSpace::binary(n)))
    }

    #[test]
    fn enumeration_examples() {
        let add = oracle(2, |s| s[0] + s[1]);
        assert_eq!(low_estimate_by_enumeration(&add, 0, &[1.0, 1.0]).unwrap(), 1.0);
        let max = oracle(2, |s| s[0].max(s[1]));
        assert_eq!(low_estimate_by_enumeration(&max, 0, &[1.0, 1.0]).unwrap(), 1.0);
        let eps = 0.1;
        let ex31 = oracle(2, move |s| 2.0 * (1.0 + eps) / 2.0 * (s[0] + s[1]));
        assert!((low_estimate_by_enumeration(&ex31, 0, &[1.0, 1.0]).unwrap() - 1.1).abs() < 1e-12);
    }

    #[test]
    fn enumeration_counts_one_query_per_grid_point() {
        let space = Arc::new(SignalSpace::new(vec![vec![0.0, 1.0, 2.0, 5.0], vec![0.0, 1.0]]).unwrap());
        let o = ValuationOracle::new(Box::new(FnValuation(|s: &[f64]| s[0] * s[1])), space);
        low_estimate_by_enumeration(&o, 0, &[2.0, 1.0]).unwrap();
        assert_eq!(o.counts(), QueryCounts { value: 4, low: 0 });
        o.low_estimate(0, &[2.0, 1.0]).unwrap();
        assert_eq!(o.counts(), QueryCounts { value: 4, low: 1 });
        o.reset_counts();
        assert_eq!(o.counts().total(), 0);
    }

    #[test]
    fn enumeration_errors() {
        let o = oracle(2, |s| s[0]);
        assert!(matches!(
            low_estimate_by_enumeration(&o, 2, &[1.0, 1.0]),
            Err(Error::BidderOutOfRange { index: 2, n: 2 })
        ));
        assert!(low_estimate_by_enumeration(&o, 0, &[0.5, 1.0]).is_err());
    }
}
