//! Data behind the illustrative examples and the approximation constants.
//!
//! Every function returns plot-ready rows; the CLI writes them as CSV.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use rcf_core::diagnostics::LowMatrix;
use rcf_core::instance::{Priority, Reports};
use rcf_core::numeric::log_dagger_ratio;
use rcf_core::single_item::{expected_candidates_fixed_priority, prcf_allocation, EtaPolicy, TieBreak};
use serde::Serialize;

use crate::format::FormatError;
use crate::generator::{GeneratorSpec, Kind};
use crate::montecarlo;
use crate::verify::verify_welfare;

#[derive(Debug, thiserror::Error)]
pub enum ReproduceError {
    #[error("n = {0} is not a positive perfect square")]
    NotSquare(usize),
    #[error("need at least two bidders, got {0}")]
    TooFew(usize),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Core(#[from] rcf_core::Error),
}

/// Rounded-value drops for the symmetric 1-self-bounding valuation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Example31Row {
    pub n: usize,
    pub epsilon: f64,
    pub value: f64,
    /// Bidders whose minimized signal lowers the rounded value when the grid
    /// point sits exactly at the value.
    pub deterministic_count: usize,
    /// `sum_i log†(v / low^i)`: the same count in expectation over `r`.
    pub randomized_expectation: f64,
    pub randomized_monte_carlo: f64,
    pub randomized_stderr: f64,
    /// `2(d + 1)` with `d = 1`.
    pub bound: f64,
    pub samples: u64,
    pub seed: u64,
}

pub fn example31(n: usize, epsilon: f64, samples: u64, seed: u64) -> Result<Example31Row, ReproduceError> {
    if n < 2 {
        return Err(ReproduceError::TooFew(n));
    }
    let mut spec = GeneratorSpec::new(Kind::Example31, n);
    spec.epsilon = epsilon;
    let inst = spec.generate(0).build()?;
    let lows = LowMatrix::elicit(&inst)?;
    // every bidder has the same valuation; bidder 0 stands for all
    let v = lows.values[0];
    let own: Vec<f64> = (0..n).map(|i| lows.lows[i][0]).collect();
    // with the grid point at v, any strictly smaller low rounds below it
    let deterministic_count = own.iter().filter(|&&l| l < v).count();
    let randomized_expectation = own.iter().map(|&l| log_dagger_ratio(v, l)).sum::<Result<f64, _>>()?;
    let freq: Vec<f64> = own
        .iter()
        .enumerate()
        .map(|(i, &l)| montecarlo::crossing_frequency(v, l, samples, seed, i as u64))
        .collect();
    let randomized_monte_carlo = freq.iter().sum();
    let randomized_stderr = freq
        .iter()
        .map(|p| p * (1.0 - p) / samples as f64)
        .sum::<f64>()
        .sqrt();
    Ok(Example31Row {
        n,
        epsilon,
        value: v,
        deterministic_count,
        randomized_expectation,
        randomized_monte_carlo,
        randomized_stderr,
        bound: 4.0,
        samples,
        seed,
    })
}

/// Expected candidate counts for the adversarial instance built against a
/// fixed tie-breaking order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Example32Row {
    pub n: usize,
    pub sqrt_n: usize,
    /// Exact `sum_i E[c_i]` when every draw breaks ties by bidder index.
    pub fixed_priority: f64,
    pub fixed_priority_monte_carlo: f64,
    pub fixed_priority_stderr: f64,
    /// Exact `sum_i E[c_i]` with a uniformly random priority per draw.
    pub random_priority: f64,
    pub random_priority_monte_carlo: f64,
    pub random_priority_stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

pub fn example32(n: usize, samples: u64, seed: u64) -> Result<Example32Row, ReproduceError> {
    let root = (n as f64).sqrt().round() as usize;
    if n == 0 || root * root != n {
        return Err(ReproduceError::NotSquare(n));
    }
    let inst = GeneratorSpec::new(Kind::Example32, n).generate(0).build()?;
    let reports = Reports::elicit(&inst)?;
    let identity = Priority::identity(n);
    let fixed_priority = expected_candidates_fixed_priority(&reports, n - 1, &identity).iter().sum();
    let random_priority = prcf_allocation(&reports, &vec![1.0; n])?.iter().sum();
    let fixed_mc = montecarlo::parallel_tally(&reports, n - 1, &TieBreak::Fixed(identity), seed, samples);
    let random_mc = montecarlo::parallel_tally(&reports, n - 1, &TieBreak::Random, seed, samples);
    let (fm, fs) = fixed_mc.mean_candidates_with_stderr();
    let (rm, rs) = random_mc.mean_candidates_with_stderr();
    Ok(Example32Row {
        n,
        sqrt_n: root,
        fixed_priority,
        fixed_priority_monte_carlo: fm,
        fixed_priority_stderr: fs,
        random_priority,
        random_priority_monte_carlo: rm,
        random_priority_stderr: rs,
        samples,
        seed,
    })
}

trait MeanWithError {
    fn mean_candidates_with_stderr(&self) -> (f64, f64);
}

impl MeanWithError for rcf_core::single_item::CandidateTally {
    fn mean_candidates_with_stderr(&self) -> (f64, f64) {
        (self.mean_candidates(), self.mean_candidates_stderr())
    }
}

/// Worst welfare ratio over a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsRow {
    pub corpus: String,
    pub instances: u64,
    pub eta: f64,
    pub max_ratio: f64,
    pub bound: f64,
    pub worst_seed: u64,
    pub passed: bool,
}

/// Ratios on monotone coverage instances with `eta = 4` and on cut
/// instances with `eta = 6`, against `8 ln 2` and `12 ln 2`.
pub fn constants(n: usize, instances: u64, seed: u64) -> Vec<ConstantsRow> {
    let corpora = [
        (GeneratorSpec::new(Kind::Coverage, n), 4.0),
        (GeneratorSpec::new(Kind::Cut, n), 6.0),
    ];
    corpora
        .iter()
        .map(|(spec, eta)| {
            let ratios: Vec<(u64, f64, bool)> = (0..instances)
                .into_par_iter()
                .map(|t| {
                    let s = seed.wrapping_add(t);
                    let r = verify_welfare(&spec.generate(s), EtaPolicy::Fixed(*eta));
                    (s, r.statistic, r.passed)
                })
                .collect();
            let (worst_seed, max_ratio) = ratios
                .iter()
                .map(|&(s, r, _)| (s, r))
                .fold((seed, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            ConstantsRow {
                corpus: spec.to_string(),
                instances,
                eta: *eta,
                max_ratio,
                bound: eta * 2.0 * LN_2,
                worst_seed,
                passed: ratios.iter().all(|r| r.2),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example31_every_bidder_can_drop_the_rounded_value() {
        let row = example31(8, 0.1, 20_000, 3).unwrap();
        assert_eq!(row.deterministic_count, 8);
        assert!(row.randomized_expectation <= row.bound);
        let expected = 8.0 * (8.0f64 / 7.0).log2();
        assert!((row.randomized_expectation - expected).abs() < 1e-12);
        assert!((row.randomized_monte_carlo - expected).abs() < 5.0 * row.randomized_stderr);
    }

    #[test]
    fn example32_rejects_non_squares() {
        assert!(matches!(example32(15, 10, 0), Err(ReproduceError::NotSquare(15))));
    }

    #[test]
    fn example32_fixed_order_beats_random_order() {
        let row = example32(16, 20_000, 1).unwrap();
        assert!(row.random_priority <= 4.0 + 1e-9);
        assert!(row.fixed_priority >= 2.0 * row.random_priority, "{row:?}");
        assert!((row.fixed_priority_monte_carlo - row.fixed_priority).abs() < 5.0 * row.fixed_priority_stderr.max(1e-4));
    }

    #[test]
    fn constants_within_bounds() {
        for row in constants(4, 20, 9) {
            assert!(row.passed && row.max_ratio <= row.bound, "{row:?}");
        }
    }
}
