//! Parallel Monte Carlo with results independent of the worker count.
//!
//! Draws are indexed by stream number and split into fixed-size chunks;
//! chunk tallies are integers and are merged in chunk order, so the output
//! is bit-identical however rayon schedules the chunks.

use rand::Rng;
use rayon::prelude::*;
use rcf_core::instance::Reports;
use rcf_core::multi_unit::{sample_ex_post, MatchingDecomposition};
use rcf_core::numeric::{round_down, SeedStream};
use rcf_core::single_item::{tally_candidates, CandidateTally, MonteCarloEstimate, TieBreak};

/// Draws per work unit.
pub const CHUNK: u64 = 1 << 14;

fn chunks(samples: u64) -> impl IndexedParallelIterator<Item = std::ops::Range<u64>> {
    let count = samples.div_ceil(CHUNK) as usize;
    (0..count).into_par_iter().map(move |c| {
        let c = c as u64;
        c * CHUNK..((c + 1) * CHUNK).min(samples)
    })
}

/// Candidate tally over streams `0..samples` of `base_seed`.
pub fn parallel_tally(reports: &Reports, need: usize, tie: &TieBreak, base_seed: u64, samples: u64) -> CandidateTally {
    let parts: Vec<CandidateTally> = chunks(samples)
        .map(|range| tally_candidates(reports, need, tie, base_seed, range))
        .collect();
    let mut total = CandidateTally::empty(reports.n());
    for p in &parts {
        total.merge(p);
    }
    total
}

/// Parallel counterpart of [`rcf_core::single_item::rcf_monte_carlo`];
/// `need` is `n - m`.
pub fn rcf_monte_carlo(reports: &Reports, need: usize, etas: &[f64], samples: u64, base_seed: u64) -> MonteCarloEstimate {
    let tally = parallel_tally(reports, need, &TieBreak::Random, base_seed, samples);
    MonteCarloEstimate::from_tally(tally, etas)
}

/// Frequency of `f_r(a) > f_r(b)` over `samples` offsets of one stream.
pub fn crossing_frequency(a: f64, b: f64, samples: u64, base_seed: u64, stream: u64) -> f64 {
    let mut rng = SeedStream::new(base_seed).rng(stream);
    let hits = (0..samples)
        .filter(|_| {
            let r: f64 = rng.random();
            round_down(r, a).expect("valid offset") > round_down(r, b).expect("valid offset")
        })
        .count();
    hits as f64 / samples as f64
}

/// Mean and standard error of `f_r(v) * 2 ln 2 / v`.
pub fn rounding_ratio(v: f64, samples: u64, base_seed: u64, stream: u64) -> (f64, f64) {
    let mut rng = SeedStream::new(base_seed).rng(stream);
    let scale = 2.0 * std::f64::consts::LN_2 / v;
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..samples {
        let r: f64 = rng.random();
        let x = round_down(r, v).expect("valid offset").value() * scale;
        sum += x;
        sq += x * x;
    }
    let n = samples as f64;
    let mean = sum / n;
    (mean, ((sq / n - mean * mean).max(0.0) / n).sqrt())
}

/// Ex-post sampling statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExPostTally {
    pub draws: u64,
    /// Draws in which each bidder received an item.
    pub wins: Vec<u64>,
    pub max_winners: usize,
    /// Draws that gave some bidder or some item twice.
    pub conflicts: u64,
}

/// Samples the decomposition `draws` times, one stream per draw.
pub fn ex_post_tally(d: &MatchingDecomposition, draws: u64, base_seed: u64) -> ExPostTally {
    let parts: Vec<ExPostTally> = chunks(draws)
        .map(|range| {
            let source = SeedStream::new(base_seed);
            let mut t = ExPostTally {
                draws: 0,
                wins: vec![0; d.rows],
                max_winners: 0,
                conflicts: 0,
            };
            for stream in range {
                let u: f64 = source.rng(stream).random();
                let a = sample_ex_post(d, u);
                let mut row = vec![false; d.rows];
                let mut col = vec![false; d.cols];
                let mut clash = false;
                for &(i, j) in &a {
                    clash |= row[i] || col[j];
                    row[i] = true;
                    col[j] = true;
                    t.wins[i] += 1;
                }
                t.conflicts += clash as u64;
                t.max_winners = t.max_winners.max(a.len());
                t.draws += 1;
            }
            t
        })
        .collect();
    let mut total = ExPostTally {
        draws: 0,
        wins: vec![0; d.rows],
        max_winners: 0,
        conflicts: 0,
    };
    for p in parts {
        total.draws += p.draws;
        total.conflicts += p.conflicts;
        total.max_winners = total.max_winners.max(p.max_winners);
        for (a, b) in total.wins.iter_mut().zip(&p.wins) {
            *a += b;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> Reports {
        Reports::new(vec![4.0, 1.0], vec![vec![0.0, 1.0], vec![4.0, 0.0]]).unwrap()
    }

    #[test]
    fn independent_of_worker_count() {
        let r = Reports::new(
            vec![3.0, 2.0, 2.5],
            vec![vec![0.0, 1.5, 2.2], vec![2.9, 0.0, 2.0], vec![2.0, 1.9, 0.0]],
        )
        .unwrap();
        let samples = 3 * CHUNK + 17;
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| parallel_tally(&r, 2, &TieBreak::Random, 9, samples));
        let b = four.install(|| parallel_tally(&r, 2, &TieBreak::Random, 9, samples));
        assert_eq!(a, b);
        // and identical to a single sequential pass
        assert_eq!(a, tally_candidates(&r, 2, &TieBreak::Random, 9, 0..samples));
    }

    #[test]
    fn worked_instance_is_always_won_by_bidder_one() {
        let est = rcf_monte_carlo(&worked(), 1, &[4.0, 4.0], 10_000, 3);
        assert_eq!(est.x, vec![0.25, 0.0]);
        assert_eq!(est.tally.empty_draws, 0);
    }

    #[test]
    fn crossing_and_rounding_sanity() {
        assert_eq!(crossing_frequency(4.0, 1.0, 1000, 1, 0), 1.0);
        assert_eq!(crossing_frequency(1.0, 4.0, 1000, 1, 0), 0.0);
        let (m, se) = rounding_ratio(3.0, 100_000, 1, 0);
        assert!((m - 1.0).abs() < 5.0 * se);
    }
}
