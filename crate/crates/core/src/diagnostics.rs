//! Quantities from the feasibility argument, evaluated on concrete
//! instances.
//!
//! Bidders are renamed by decreasing value (ties by index) and
//! `k = max{i : v_i > v_1 / 2}`. For renamed bidder `i`,
//!
//! ```text
//! E[c_i] <= 1/(i(i+1)) + log†(2 v_i / low_1^i)/(k+1)
//!           + sum_{j in [k]} log†(v_i / low_j^i)/(j(j+1))
//! ```
//!
//! and the right-hand side splits into `A_i` (value over low estimate of the
//! top bidders) and `B_i` (value ratios), with `sum A_i <= 2d` and
//! `sum B_i <= 1`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::instance::AuctionInstance;
use crate::numeric::log_dagger_ratio_unchecked as ldr;

/// Values and low estimates including each bidder's own-signal estimate.
///
/// `lows[i][j]` is bidder `j`'s value with bidder `i`'s signal at its
/// minimum; the diagonal is the own-signal low estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct LowMatrix {
    pub values: Vec<f64>,
    pub lows: Vec<Vec<f64>>,
}

impl LowMatrix {
    /// Queries every `(i, j)` pair, the diagonal included.
    pub fn elicit(instance: &AuctionInstance) -> Result<Self> {
        let n = instance.n();
        let s = instance.profile();
        let values = (0..n).map(|j| instance.oracle(j).value(s)).collect();
        let lows = (0..n)
            .map(|i| (0..n).map(|j| instance.oracle(j).low_estimate(i, s)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        Ok(Self { values, lows })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// `sum_i log†(v_j / low_j^i)` for each bidder `j`; at most `2d` for a
    /// `d`-self-bounding valuation.
    pub fn self_bounding_sums(&self) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|j| (0..n).map(|i| ldr(self.values[j], self.lows[i][j])).sum())
            .collect()
    }
}

/// Per-bidder candidate-probability bounds, indexed by original bidder.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateBounds {
    /// `order[p]` is the bidder renamed to position `p + 1`.
    pub order: Vec<usize>,
    pub k: usize,
    pub bound: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl CandidateBounds {
    pub fn sum_a(&self) -> f64 {
        self.a.iter().sum()
    }

    pub fn sum_b(&self) -> f64 {
        self.b.iter().sum()
    }

    pub fn sum_bound(&self) -> f64 {
        self.bound.iter().sum()
    }
}

/// Evaluates the bound and its `A`/`B` split for every bidder.
pub fn candidate_bounds(m: &LowMatrix) -> CandidateBounds {
    let n = m.n();
    let v = &m.values;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let top = order.first().map_or(0.0, |&o| v[o]);
    let k = order.iter().take_while(|&&o| v[o] > top / 2.0).count();
    let (mut bound, mut a, mut b) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let kk = k as f64 + 1.0;
    for (pos, &i) in order.iter().enumerate() {
        let rank = pos as f64 + 1.0;
        let low = |p: usize| m.lows[i][order[p]];
        let mut bi = 1.0 / (rank * (rank + 1.0));
        let mut ai = 0.0;
        let mut bb = 0.0;
        if n > 0 {
            let first = order[0];
            bi += ldr(2.0 * v[i], low(0)) / kk;
            ai += ldr(v[first], low(0)) / kk;
            bb += ldr(2.0 * v[i], v[first]) / kk;
        }
        for p in 0..k {
            let j = order[p];
            let w = 1.0 / ((p as f64 + 1.0) * (p as f64 + 2.0));
            bi += w * ldr(v[i], low(p));
            ai += w * ldr(v[j], low(p));
            bb += w * ldr(v[i], v[j]);
        }
        bound[i] = bi;
        a[i] = ai;
        b[i] = bb;
    }
    CandidateBounds { order, k, bound, a, b }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_bidders_by_hand() {
        // v = (4, 1); low_j^i: bidder 1's own low 2, bidder 2's low under
        // bidder 1's minimization 1, etc.
        let m = LowMatrix {
            values: vec![4.0, 1.0],
            lows: vec![vec![2.0, 1.0], vec![3.0, 0.5]],
        };
        let c = candidate_bounds(&m);
        assert_eq!(c.order, vec![0, 1]);
        assert_eq!(c.k, 1);
        // bidder 1: 1/2 + log†(8/2)/2 + log†(4/2)/2 = 1/2 + 1/2 + 1/2
        assert!((c.bound[0] - 1.5).abs() < 1e-15);
        // bidder 2: 1/6 + log†(2/3)/2 + log†(1/3)/2 = 1/6
        assert!((c.bound[1] - 1.0 / 6.0).abs() < 1e-15);
        // A_1 = log†(4/2)/2 + log†(4/2)/2 = 1, B_1 = log†(2)/2 + log†(1)/2
        assert!((c.a[0] - 1.0).abs() < 1e-15);
        assert!((c.b[0] - 0.5).abs() < 1e-15);
        assert!(c.sum_b() <= 1.0);
        let s = m.self_bounding_sums();
        assert!((s[0] - (1.0 + ldr(4.0, 3.0))).abs() < 1e-15);
    }

    #[test]
    fn bound_dominates_split() {
        let m = LowMatrix {
            values: vec![3.0, 5.0, 2.9, 0.5],
            lows: vec![
                vec![1.0, 4.0, 2.0, 0.5],
                vec![2.0, 1.0, 2.5, 0.1],
                vec![2.5, 4.5, 1.0, 0.3],
                vec![3.0, 5.0, 2.9, 0.0],
            ],
        };
        let c = candidate_bounds(&m);
        assert_eq!(c.order, vec![1, 0, 2, 3]);
        assert_eq!(c.k, 3);
        for i in 0..4 {
            let pos = c.order.iter().position(|&o| o == i).unwrap() as f64 + 1.0;
            assert!(c.bound[i] <= 1.0 / (pos * (pos + 1.0)) + c.a[i] + c.b[i] + 1e-12);
        }
    }
}
