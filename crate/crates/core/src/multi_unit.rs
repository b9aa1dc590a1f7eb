//! Randomized candidate filtering for `m` identical items and unit-demand
//! bidders.
//!
//! A bidder is a candidate when its rounded value beats at least `n - m`
//! rivals' rounded low estimates. The fractional allocation
//! `x_i = E[c_i] / eta_i` is laid out as an `n x m` matrix and rounded ex
//! post by sampling from a decomposition into matchings.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::instance::{AuctionInstance, MechanismOutcome, Priority, Reports};
use crate::matching::{covering_matching, degrees};
use crate::numeric::{RoundingSeed, SeedStream};
use crate::single_item::{
    candidates_with_quota, check_etas, offset_sweep, EtaPolicy, Integration, QueryDelta, ScalarRule,
    WINNER_STREAM,
};

/// Slack on the supply constraint and on matrix row and column sums.
pub const SUM_SLACK: f64 = 1e-9;

/// Entries below this are treated as zero during decomposition.
pub const ZERO_ENTRY: f64 = 1e-12;

fn check_items(n: usize, m: usize) -> Result<()> {
    if m == 0 || m >= n {
        return Err(Error::ItemCountOutOfRange { m, n });
    }
    Ok(())
}

/// Candidate indicators for one draw: `c_i = 1` iff `i` beats at least
/// `n - m` rivals.
pub fn multi_candidates(reports: &Reports, m: usize, seed: &RoundingSeed) -> Result<Vec<bool>> {
    let n = reports.n();
    check_items(n, m)?;
    Ok(candidates_with_quota(reports, n - m, seed.offset, &seed.priority))
}

/// `Pr_pi[c_i = 1]` given `above` rivals strictly ahead and `tied` rivals
/// tied: `clamp((m - above) / (tied + 1), 0, 1)`.
pub fn tie_probability(m: usize, above: usize, tied: usize) -> f64 {
    if above >= m {
        0.0
    } else {
        ((m - above) as f64 / (tied as f64 + 1.0)).min(1.0)
    }
}

/// Exact `E_{r,pi}[c_i]` for a bidder with value `v` facing the rival low
/// estimates `rival_lows`.
pub fn candidate_probability(v: f64, rival_lows: &[f64], m: usize) -> f64 {
    offset_sweep(
        libm::log2(v),
        rival_lows.iter().map(|&l| (libm::log2(l), false)),
        |c| tie_probability(m, c.above, c.tied()),
    )
}

fn rival_lows(reports: &Reports, i: usize) -> Vec<f64> {
    let row = reports.low_row(i);
    (0..reports.n()).filter(|&j| j != i).map(|j| row[j]).collect()
}

/// Exact `E_{r,pi}[c_i]` for every bidder.
pub fn multi_expected_candidates(reports: &Reports, m: usize) -> Result<Vec<f64>> {
    let n = reports.n();
    check_items(n, m)?;
    Ok((0..n)
        .map(|i| candidate_probability(reports.value(i), &rival_lows(reports, i), m))
        .collect())
}

/// `x_i = E[c_i] / eta_i`.
pub fn multi_allocation(reports: &Reports, m: usize, etas: &[f64]) -> Result<Vec<f64>> {
    check_etas(etas, reports.n())?;
    Ok(multi_expected_candidates(reports, m)?
        .into_iter()
        .zip(etas)
        .map(|(c, e)| c / e)
        .collect())
}

/// One bidder's multi-unit allocation as a function of its value.
#[derive(Debug, Clone)]
pub struct MultiUnitRule {
    pub rival_lows: Vec<f64>,
    pub items: usize,
    pub eta: f64,
}

impl MultiUnitRule {
    pub fn new(reports: &Reports, i: usize, items: usize, eta: f64) -> Result<Self> {
        let n = reports.n();
        if i >= n {
            return Err(Error::BidderOutOfRange { index: i, n });
        }
        check_items(n, items)?;
        if eta.is_nan() || eta < 1.0 {
            return Err(Error::InvalidEta(eta));
        }
        Ok(Self {
            rival_lows: rival_lows(reports, i),
            items,
            eta,
        })
    }
}

impl ScalarRule for MultiUnitRule {
    fn allocation(&self, v: f64) -> f64 {
        candidate_probability(v, &self.rival_lows, self.items) / self.eta
    }

    fn payment(&self, v: f64) -> f64 {
        crate::single_item::myerson_payment(self, v, Integration::PiecewiseExact).unwrap_or(f64::NAN)
    }

    /// `low_j * 2^z` inside the window where the allocation is not constant:
    /// below half the `m`-th largest low estimate at least `m` rivals always
    /// win, and above twice the largest the bidder always beats everyone.
    fn breakpoints(&self, upto: f64) -> Vec<f64> {
        let mut positive: Vec<f64> = self.rival_lows.iter().copied().filter(|&l| l > 0.0).collect();
        if positive.is_empty() {
            return Vec::new();
        }
        positive.sort_by(|a, b| b.total_cmp(a));
        let lower = positive.get(self.items - 1).copied().unwrap_or(*positive.last().unwrap()) / 2.0;
        let upper = (2.0 * positive[0]).min(upto);
        let mut points = Vec::new();
        for &l in &positive {
            let z_lo = libm::ceil(libm::log2(lower / l)) as i32 - 1;
            let z_hi = libm::floor(libm::log2(upper / l)) as i32 + 1;
            for z in z_lo..=z_hi {
                let b = l * libm::exp2(z as f64);
                if b >= lower && b <= upper && b < upto {
                    points.push(b);
                }
            }
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        points
    }
}

/// Numeric payments for the multi-unit allocation.
pub fn multi_payment(reports: &Reports, m: usize, etas: &[f64], method: Integration) -> Result<Vec<f64>> {
    check_etas(etas, reports.n())?;
    (0..reports.n())
        .map(|i| {
            let rule = MultiUnitRule::new(reports, i, m, etas[i])?;
            crate::single_item::myerson_payment(&rule, reports.value(i), method)
        })
        .collect()
}

/// An `n x m` matrix with entries in `[0, 1]` whose rows and columns sum to
/// at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationMatrix {
    rows: Vec<Vec<f64>>,
    cols: usize,
}

impl AllocationMatrix {
    pub fn new(rows: Vec<Vec<f64>>, cols: usize) -> Result<Self> {
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::NotSubStochastic("ragged rows"));
        }
        if rows.iter().flatten().any(|&w| !(-ZERO_ENTRY..=1.0 + ZERO_ENTRY).contains(&w)) {
            return Err(Error::NotSubStochastic("entry outside [0, 1]"));
        }
        let (row_deg, col_deg) = degrees(&rows, cols);
        if row_deg.iter().chain(&col_deg).any(|&d| d > 1.0 + SUM_SLACK) {
            return Err(Error::NotSubStochastic("a row or column sums above one"));
        }
        Ok(Self { rows, cols })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn items(&self) -> usize {
        self.cols
    }

    pub fn row_sums(&self) -> Vec<f64> {
        degrees(&self.rows, self.cols).0
    }

    pub fn column_sums(&self) -> Vec<f64> {
        degrees(&self.rows, self.cols).1
    }
}

/// Lays the marginals end to end on a tape of length `m`; column `l` gets
/// the mass falling in `[l, l + 1)`.
pub fn marginals_to_matrix(x: &[f64], m: usize) -> Result<AllocationMatrix> {
    if m == 0 {
        return Err(Error::InvalidMarginals("no items"));
    }
    if x.iter().any(|&xi| !(0.0..=1.0).contains(&xi)) {
        return Err(Error::InvalidMarginals("marginal outside [0, 1]"));
    }
    if x.iter().sum::<f64>() > m as f64 + SUM_SLACK {
        return Err(Error::InvalidMarginals("marginals sum above the supply"));
    }
    let mut rows = vec![vec![0.0; m]; x.len()];
    let mut pos = 0.0f64;
    for (i, &xi) in x.iter().enumerate() {
        let mut rest = xi;
        while rest > 0.0 {
            let nearest = libm::round(pos);
            if (pos - nearest).abs() < ZERO_ENTRY {
                pos = nearest;
            }
            let col = (libm::floor(pos) as usize).min(m - 1);
            let take = if col == m - 1 { rest } else { rest.min(col as f64 + 1.0 - pos) };
            rows[i][col] += take;
            pos += take;
            rest = if take == rest { 0.0 } else { xi - rows[i][..=col].iter().sum::<f64>() };
        }
    }
    AllocationMatrix::new(rows, m)
}

/// A convex combination of matchings `sum_k lambda_k M_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingDecomposition {
    pub rows: usize,
    pub cols: usize,
    /// `(lambda_k, edges of M_k)`; an empty edge list is the empty matching.
    pub terms: Vec<(f64, Vec<(usize, usize)>)>,
}

impl MatchingDecomposition {
    pub fn coefficient_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.0).sum()
    }

    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        for (lambda, edges) in &self.terms {
            for &(i, j) in edges {
                out[i][j] += lambda;
            }
        }
        out
    }

    /// Every term is a matching and the coefficients are positive.
    pub fn is_valid(&self) -> bool {
        self.terms.iter().all(|(lambda, edges)| {
            let mut row_used = vec![false; self.rows];
            let mut col_used = vec![false; self.cols];
            *lambda > 0.0
                && edges.iter().all(|&(i, j)| {
                    let fresh = i < self.rows && j < self.cols && !row_used[i] && !col_used[j];
                    if fresh {
                        row_used[i] = true;
                        col_used[j] = true;
                    }
                    fresh
                })
        })
    }

    /// Largest entrywise gap between the reconstruction and `matrix`.
    pub fn max_error(&self, matrix: &AllocationMatrix) -> f64 {
        self.reconstruct()
            .iter()
            .flatten()
            .zip(matrix.rows().iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Decomposes a matrix into a convex combination of matchings.
///
/// Each step peels off a matching covering every maximum-degree vertex with
/// weight `min(Delta - d_out, smallest matched entry)`, where `d_out` is the
/// highest degree among vertices the matching leaves uncovered. Every step
/// either removes an edge or adds a vertex to the maximum-degree set. The
/// empty matching takes the remaining `1 - Delta` of the mass.
pub fn birkhoff_decompose(matrix: &AllocationMatrix) -> Result<MatchingDecomposition> {
    let (rows, cols) = (matrix.n(), matrix.items());
    let mut work: Vec<Vec<f64>> = matrix.rows().to_vec();
    let mut terms: Vec<(f64, Vec<(usize, usize)>)> = Vec::new();
    let nonzero = work.iter().flatten().filter(|&&w| w >= ZERO_ENTRY).count();
    let budget = nonzero + rows + cols + 1;
    for _ in 0..budget {
        for w in work.iter_mut().flatten() {
            if *w < ZERO_ENTRY {
                *w = 0.0;
            }
        }
        let (row_deg, col_deg) = degrees(&work, cols);
        let delta = row_deg.iter().chain(&col_deg).fold(0.0f64, |a, &b| a.max(b));
        if delta < ZERO_ENTRY {
            break;
        }
        let edges = covering_matching(&work, cols)?;
        // Highest degree left out of the matching; vertices the matching
        // covers drop together with the maximum.
        let mut row_hit = vec![false; rows];
        let mut col_hit = vec![false; cols];
        for &(i, j) in &edges {
            row_hit[i] = true;
            col_hit[j] = true;
        }
        let uncovered = row_deg
            .iter()
            .zip(&row_hit)
            .chain(col_deg.iter().zip(&col_hit))
            .filter(|(_, hit)| !**hit)
            .map(|(d, _)| *d)
            .fold(0.0f64, f64::max);
        let smallest = edges.iter().map(|&(i, j)| work[i][j]).fold(f64::INFINITY, f64::min);
        let z = (delta - uncovered).min(smallest);
        for &(i, j) in &edges {
            work[i][j] -= z;
        }
        terms.push((z, edges));
    }
    if work.iter().flatten().any(|&w| w >= ZERO_ENTRY) {
        return Err(Error::NotSubStochastic("decomposition did not terminate"));
    }
    let used: f64 = terms.iter().map(|t| t.0).sum();
    if used < 1.0 {
        terms.push((1.0 - used, Vec::new()));
    }
    Ok(MatchingDecomposition { rows, cols, terms })
}

/// Picks matching `k` with probability `lambda_k` using `u in [0, 1)`.
pub fn sample_ex_post(decomposition: &MatchingDecomposition, u: f64) -> Vec<(usize, usize)> {
    let total = decomposition.coefficient_sum();
    let target = u * total;
    let mut acc = 0.0;
    for (lambda, edges) in &decomposition.terms {
        acc += lambda;
        if target < acc {
            return edges.clone();
        }
    }
    decomposition.terms.last().map(|t| t.1.clone()).unwrap_or_default()
}

/// [`sample_ex_post`] driven by stream `stream` of `seed`.
pub fn sample_ex_post_seeded(decomposition: &MatchingDecomposition, seed: u64, stream: u64) -> Vec<(usize, usize)> {
    let u = SeedStream::new(seed).rng(stream).random::<f64>();
    sample_ex_post(decomposition, u)
}

/// Everything produced by a multi-unit run.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiUnitOutcome {
    pub outcome: MechanismOutcome,
    pub matrix: AllocationMatrix,
    pub decomposition: MatchingDecomposition,
    /// Sampled `(bidder, item)` pairs, when a sampling seed was supplied.
    pub assignment: Option<Vec<(usize, usize)>>,
}

/// Runs the multi-unit mechanism on `instance.items()` items.
///
/// Fails with [`Error::Infeasible`] if the allocation sums above the supply,
/// which signals an instance that is not self-bounding with the assumed
/// parameter.
pub fn run_multi_unit(
    instance: &AuctionInstance,
    policy: EtaPolicy,
    sample_seed: Option<u64>,
) -> Result<MultiUnitOutcome> {
    let (n, m) = (instance.n(), instance.items());
    check_items(n, m)?;
    let etas = policy.etas(instance)?;
    let before = instance.query_counts();
    let reports = Reports::elicit(instance)?;
    let after = instance.query_counts();
    let candidate_probability = multi_expected_candidates(&reports, m)?;
    let x: Vec<f64> = candidate_probability.iter().zip(&etas).map(|(c, e)| c / e).collect();
    let sum: f64 = x.iter().sum();
    if sum > m as f64 + SUM_SLACK {
        return Err(Error::Infeasible { sum, supply: m as f64 });
    }
    let p = multi_payment(&reports, m, &etas, Integration::PiecewiseExact)?;
    let matrix = marginals_to_matrix(&x, m)?;
    let decomposition = birkhoff_decompose(&matrix)?;
    let assignment = sample_seed.map(|seed| sample_ex_post_seeded(&decomposition, seed, WINNER_STREAM));
    let winners = assignment.as_ref().map(|a| {
        let mut w: Vec<usize> = a.iter().map(|e| e.0).collect();
        w.sort_unstable();
        w
    });
    Ok(MultiUnitOutcome {
        outcome: MechanismOutcome {
            items: m,
            x,
            p,
            eta: etas,
            candidate_probability,
            thresholds: Vec::new(),
            values: reports.values().to_vec(),
            queries: QueryDelta::between(before, after),
            winners,
            seed: sample_seed,
        },
        matrix,
        decomposition,
        assignment,
    })
}

/// Exhaustive `E_pi[c_i]` at a fixed offset, over all `n!` priorities.
pub fn enumerate_priorities(reports: &Reports, m: usize, r: f64) -> Result<Vec<f64>> {
    let n = reports.n();
    check_items(n, m)?;
    let mut ranks: Vec<usize> = (0..n).collect();
    let mut totals = vec![0.0; n];
    let mut count = 0u64;
    loop {
        let pi = Priority::from_ranks_unchecked(ranks.clone());
        for (t, c) in totals.iter_mut().zip(candidates_with_quota(reports, n - m, r, &pi)) {
            *t += c as u8 as f64;
        }
        count += 1;
        if !next_permutation(&mut ranks) {
            break;
        }
    }
    Ok(totals.into_iter().map(|t| t / count as f64).collect())
}

fn next_permutation(a: &mut [usize]) -> bool {
    let Some(i) = (1..a.len()).rev().find(|&i| a[i - 1] < a[i]) else {
        return false;
    };
    let j = (i..a.len()).rev().find(|&j| a[j] > a[i - 1]).unwrap();
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::single_item::{prcf_allocation, thresholds};

    fn hand() -> Reports {
        // lows equal to the rivals' values
        let v = [4.0, 3.0, 1.0];
        let lows = (0..3).map(|i| (0..3).map(|j| if i == j { 0.0 } else { v[j] }).collect()).collect();
        Reports::new(v.to_vec(), lows).unwrap()
    }

    #[test]
    fn hand_candidates() {
        let seed = RoundingSeed {
            offset: 0.0,
            priority: Priority::identity(3),
            base_seed: 0,
            stream: 0,
        };
        assert_eq!(multi_candidates(&hand(), 2, &seed).unwrap(), vec![true, true, false]);
    }

    #[test]
    fn item_range() {
        let seed = crate::numeric::draw_seed(1, 0, 3);
        assert!(multi_candidates(&hand(), 3, &seed).is_err());
        assert!(multi_candidates(&hand(), 0, &seed).is_err());
    }

    #[test]
    fn tie_probabilities_match_enumeration() {
        // everyone equal: comparisons are ties for every r
        let same = Reports::new(vec![2.0; 4], vec![vec![2.0; 4]; 4]).unwrap();
        for m in 1..4 {
            let exact = multi_expected_candidates(&same, m).unwrap();
            let brute = enumerate_priorities(&same, m, 0.37).unwrap();
            for (a, b) in exact.iter().zip(&brute) {
                assert!((a - b).abs() < 1e-12, "m={m}: {a} vs {b}");
            }
        }
        let exact = multi_expected_candidates(&hand(), 2).unwrap();
        // bidder 3 (value 1) is beaten by 3 and 4 for every r except when
        // f_r(1) == f_r(3), which has probability log2(4/3)... so check by r
        let mut approx = 0.0;
        let steps = 2000;
        for s in 0..steps {
            let r = (s as f64 + 0.5) / steps as f64;
            approx += enumerate_priorities(&hand(), 2, r).unwrap()[2];
        }
        approx /= steps as f64;
        assert!((exact[2] - approx).abs() < 2e-3, "{} vs {}", exact[2], approx);
    }

    #[test]
    fn single_item_consistency() {
        let r = Reports::new(
            vec![4.0, 1.0, 2.5],
            vec![vec![0.0, 1.0, 3.0], vec![4.0, 0.0, 0.7], vec![2.0, 1.5, 0.0]],
        )
        .unwrap();
        let exact = multi_expected_candidates(&r, 1).unwrap();
        let closed = prcf_allocation(&r, &[1.0; 3]).unwrap();
        for (a, b) in exact.iter().zip(&closed) {
            assert!((a - b).abs() < 1e-9);
        }
        let worked = Reports::new(vec![4.0, 1.0], vec![vec![0.0, 1.0], vec![4.0, 0.0]]).unwrap();
        let ladder = thresholds(&worked, 0).unwrap();
        assert_eq!(ladder.candidate_probability(4.0), 1.0);
    }

    #[test]
    fn water_filling_examples() {
        let a = marginals_to_matrix(&[0.5, 0.5], 1).unwrap();
        assert_eq!(a.rows(), &[vec![0.5], vec![0.5]]);
        let b = marginals_to_matrix(&[0.8, 0.8, 0.4], 2).unwrap();
        let expect = [[0.8, 0.0], [0.2, 0.6], [0.0, 0.4]];
        for (row, e) in b.rows().iter().zip(&expect) {
            for (x, y) in row.iter().zip(e) {
                assert!((x - y).abs() < 1e-15);
            }
        }
        let c = marginals_to_matrix(&[1.0, 1.0], 2).unwrap();
        assert_eq!(c.rows(), &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(marginals_to_matrix(&[0.9, 0.9], 1).is_err());
        assert!(marginals_to_matrix(&[1.2], 2).is_err());
    }

    #[test]
    fn decomposition_examples() {
        let perm = AllocationMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], 2).unwrap();
        let d = birkhoff_decompose(&perm).unwrap();
        assert_eq!(d.terms.len(), 1);
        assert_eq!(d.terms[0].0, 1.0);
        let half = AllocationMatrix::new(vec![vec![0.5], vec![0.5]], 1).unwrap();
        let d = birkhoff_decompose(&half).unwrap();
        assert_eq!(d.terms.len(), 2);
        assert!(d.terms.iter().all(|t| t.0 == 0.5 && t.1.len() == 1));
        let zero = AllocationMatrix::new(vec![vec![0.0; 2]; 3], 2).unwrap();
        let d = birkhoff_decompose(&zero).unwrap();
        assert_eq!(d.terms, vec![(1.0, Vec::new())]);
        assert!(sample_ex_post(&d, 0.7).is_empty());
    }

    #[test]
    fn rejects_outside_class() {
        assert!(AllocationMatrix::new(vec![vec![0.6, 0.6]], 2).is_err());
        assert!(AllocationMatrix::new(vec![vec![0.6], vec![0.6]], 1).is_err());
    }

    #[test]
    fn payment_matches_single_item_closed_form() {
        let r = Reports::new(
            vec![4.0, 1.0, 2.5],
            vec![vec![0.0, 1.0, 3.0], vec![4.0, 0.0, 0.7], vec![2.0, 1.5, 0.0]],
        )
        .unwrap();
        let numeric = multi_payment(&r, 1, &[4.0; 3], Integration::PiecewiseExact).unwrap();
        let closed = crate::single_item::prcf_payment(&r, &[4.0; 3]).unwrap();
        for (a, b) in numeric.iter().zip(&closed) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}
