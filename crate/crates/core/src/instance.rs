//! Auction instances, elicited reports, tie-breaking orders and outcomes.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::oracle::{QueryCounts, ValuationOracle};
use crate::signal::{SignalProfile, SignalSpace};

/// A tie-breaking order: `rank(i)` is `pi(i)`; higher ranks win ties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Priority(Vec<usize>);

impl Priority {
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// Validates that `ranks` is a permutation of `0..n`.
    pub fn from_ranks(ranks: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; ranks.len()];
        for &r in &ranks {
            if r >= ranks.len() || seen[r] {
                return Err(Error::InvalidDescriptor("priority is not a permutation"));
            }
            seen[r] = true;
        }
        Ok(Self(ranks))
    }

    pub(crate) fn from_ranks_unchecked(ranks: Vec<usize>) -> Self {
        Self(ranks)
    }

    pub fn rank(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn into_ranks(self) -> Vec<usize> {
        self.0
    }

    pub fn ranks(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `a` (held by bidder `i`) beats `b` (held by bidder `j`) under `pi`:
/// `a > b`, or `a == b` and `pi(i) > pi(j)`.
///
/// # Panics
///
/// If `i == j`; the order is only defined between distinct bidders.
#[inline]
pub fn lex_greater<T: PartialOrd>(a: T, i: usize, b: T, j: usize, pi: &Priority) -> bool {
    assert_ne!(i, j, "lexicographic comparison needs two distinct bidders");
    if a > b {
        true
    } else if a == b {
        pi.rank(i) > pi.rank(j)
    } else {
        false
    }
}

/// An auction: signal space, one oracle per bidder, reported profile.
#[derive(Debug)]
pub struct AuctionInstance {
    space: Arc<SignalSpace>,
    oracles: Vec<ValuationOracle>,
    profile: SignalProfile,
    items: usize,
    known_d: Option<u32>,
}

impl AuctionInstance {
    pub fn new(
        space: Arc<SignalSpace>,
        oracles: Vec<ValuationOracle>,
        profile: SignalProfile,
        items: usize,
    ) -> Result<Self> {
        let n = space.n();
        if n == 0 {
            return Err(Error::TooFewBidders { n, min: 1 });
        }
        if oracles.len() != n {
            return Err(Error::ProfileLength {
                expected: n,
                got: oracles.len(),
            });
        }
        space.check_profile(&profile)?;
        if items == 0 || (items > 1 && items >= n) {
            return Err(Error::ItemCountOutOfRange { m: items, n });
        }
        Ok(Self {
            space,
            oracles,
            profile,
            items,
            known_d: None,
        })
    }

    /// Declares a public bound `d` on every bidder's self-bounding parameter.
    pub fn with_known_d(mut self, d: u32) -> Self {
        self.known_d = Some(d);
        self
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn known_d(&self) -> Option<u32> {
        self.known_d
    }

    pub fn space(&self) -> &SignalSpace {
        &self.space
    }

    pub fn shared_space(&self) -> Arc<SignalSpace> {
        self.space.clone()
    }

    pub fn oracles(&self) -> &[ValuationOracle] {
        &self.oracles
    }

    pub fn oracle(&self, i: usize) -> &ValuationOracle {
        &self.oracles[i]
    }

    pub fn profile(&self) -> &SignalProfile {
        &self.profile
    }

    /// Reported self-bounding parameters; missing reports default to `n`.
    pub fn d_reports(&self) -> Vec<u32> {
        let n = self.n() as u32;
        self.oracles
            .iter()
            .map(|o| o.reported_d().unwrap_or(n))
            .collect()
    }

    /// `max_i d_i`, from the known bound if present.
    pub fn effective_d(&self) -> u32 {
        self.known_d
            .unwrap_or_else(|| self.d_reports().into_iter().max().unwrap_or(0))
    }

    pub fn query_counts(&self) -> QueryCounts {
        self.oracles.iter().map(ValuationOracle::counts).sum()
    }

    pub fn reset_counts(&self) {
        self.oracles.iter().for_each(ValuationOracle::reset_counts);
    }

    /// Uncounted `v_i(s)` at the reported profile.
    pub fn true_values(&self) -> Vec<f64> {
        self.oracles
            .iter()
            .map(|o| o.valuation().value(&self.profile))
            .collect()
    }
}

/// The scalars a mechanism elicits: `values[i] = v_i(s)` and
/// `lows[i][j] = inf_{o_i} v_j(o_i, s_-i)` for `j != i`.
///
/// Row `i` holds the rivals' low estimates that bidder `i` must beat. The
/// diagonal is not elicited; it is stored as 0 and never read by the
/// mechanisms.
#[derive(Debug, Clone, PartialEq)]
pub struct Reports {
    values: Vec<f64>,
    lows: Vec<Vec<f64>>,
}

impl Reports {
    pub fn new(values: Vec<f64>, mut lows: Vec<Vec<f64>>) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::TooFewBidders { n, min: 1 });
        }
        if lows.len() != n {
            return Err(Error::ProfileLength {
                expected: n,
                got: lows.len(),
            });
        }
        for &v in &values {
            check_value(v)?;
        }
        for (i, row) in lows.iter_mut().enumerate() {
            if row.len() != n {
                return Err(Error::ProfileLength {
                    expected: n,
                    got: row.len(),
                });
            }
            row[i] = 0.0;
            for &l in row.iter() {
                check_value(l)?;
            }
        }
        Ok(Self { values, lows })
    }

    /// Runs the elicitation step: `n` value queries and `n(n-1)` low-estimate
    /// queries.
    pub fn elicit(instance: &AuctionInstance) -> Result<Self> {
        let n = instance.n();
        let s = instance.profile();
        let values = instance.oracles().iter().map(|o| o.value(s)).collect();
        let mut lows = vec![vec![0.0; n]; n];
        for (j, oracle) in instance.oracles().iter().enumerate() {
            for (i, row) in lows.iter_mut().enumerate() {
                if i != j {
                    row[j] = oracle.low_estimate(i, s)?;
                }
            }
        }
        Self::new(values, lows)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// `lows[i][j]`: bidder `j`'s value with bidder `i`'s signal minimized.
    pub fn low(&self, i: usize, j: usize) -> f64 {
        self.lows[i][j]
    }

    pub fn low_row(&self, i: usize) -> &[f64] {
        &self.lows[i]
    }

    /// Copy with bidder `i`'s reported value replaced.
    pub fn with_value(&self, i: usize, value: f64) -> Result<Self> {
        check_value(value)?;
        let mut r = self.clone();
        r.values[i] = value;
        Ok(r)
    }
}

fn check_value(v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeValue(v))
    }
}

/// Allocation, payments and diagnostics of one mechanism run.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismOutcome {
    pub items: usize,
    /// Allocation probability per bidder.
    pub x: Vec<f64>,
    /// Expected payment per bidder.
    pub p: Vec<f64>,
    /// Normalization factor per bidder.
    pub eta: Vec<f64>,
    /// `E[c_i]` per bidder.
    pub candidate_probability: Vec<f64>,
    /// Threshold ladder `tau_{i,1..n}` per bidder (single item only).
    pub thresholds: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub queries: QueryCounts,
    /// Sampled ex-post winners, when a sampling seed was supplied.
    pub winners: Option<Vec<usize>>,
    pub seed: Option<u64>,
}

impl MechanismOutcome {
    pub fn expected_candidates(&self) -> f64 {
        self.candidate_probability.iter().sum()
    }

    pub fn total_allocation(&self) -> f64 {
        self.x.iter().sum()
    }

    pub fn expected_welfare(&self) -> f64 {
        self.x.iter().zip(&self.values).map(|(x, v)| x * v).sum()
    }

    /// Sum of the top `items` values.
    pub fn optimal_welfare(&self) -> f64 {
        top_sum(&self.values, self.items)
    }

    /// `OPT / achieved`, or 1 when both are zero.
    pub fn welfare_ratio(&self) -> f64 {
        welfare_ratio(self.optimal_welfare(), self.expected_welfare())
    }
}

pub(crate) fn top_sum(values: &[f64], m: usize) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v.iter().take(m).sum()
}

pub(crate) fn welfare_ratio(opt: f64, achieved: f64) -> f64 {
    if opt == 0.0 {
        1.0
    } else if achieved == 0.0 {
        f64::INFINITY
    } else {
        opt / achieved
    }
}
