//! Single-item randomized candidate filtering.
//!
//! [`candidates`] and [`tally_candidates`] run the randomized rule directly;
//! [`prcf_allocation`] and [`prcf_payment`] evaluate its exact expectation
//! and the matching payments in closed form from `n` values and `n(n-1)` low
//! estimates.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_2;
use core::ops::Range;

use rand::Rng;

use crate::error::{Error, Result};
use crate::instance::{lex_greater, AuctionInstance, MechanismOutcome, Priority, Reports};
use crate::numeric::{log_dagger_ratio_unchecked, round_down_with_log, Discretized, RoundingSeed, SeedStream};

/// Bidder `i`'s thresholds `tau_{i,1} >= ... >= tau_{i,n-1} >= tau_{i,n}`.
///
/// With rivals sorted by decreasing low estimate (`sigma`),
/// `tau_{i,l} = max(low_sigma(l), low_sigma(1) / 2)` and
/// `tau_{i,n} = low_sigma(1) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdLadder {
    pub bidder: usize,
    /// Rivals in decreasing order of low estimate, ties by index.
    pub order: Vec<usize>,
    /// `tau_{i,1..n}`; the last entry is `tau_{i,n}`.
    pub thresholds: Vec<f64>,
}

impl ThresholdLadder {
    pub fn n(&self) -> usize {
        self.thresholds.len()
    }

    /// `tau_{i,n}`.
    pub fn floor(&self) -> f64 {
        *self.thresholds.last().expect("ladder is never empty")
    }

    /// Weight of `tau_{i,l}` (1-based): `Pr_pi[t(pi) = l]`.
    pub fn weight(&self, l: usize) -> f64 {
        let n = self.n();
        if l == n {
            1.0 / n as f64
        } else {
            1.0 / (l as f64 * (l as f64 + 1.0))
        }
    }

    fn weighted(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.thresholds
            .iter()
            .enumerate()
            .map(move |(k, &tau)| (self.weight(k + 1), tau))
    }

    /// `E_{r,pi}[c_i]` when bidder `i` reports value `v`.
    pub fn candidate_probability(&self, v: f64) -> f64 {
        if v == 0.0 && self.thresholds[0] == 0.0 {
            // A zero value ties every zero low estimate; only the priority
            // decides, and i tops the priority with probability 1/n.
            return 1.0 / self.n() as f64;
        }
        self.weighted()
            .map(|(w, tau)| w * log_dagger_ratio_unchecked(v, tau))
            .sum()
    }

    /// `E[c_i] v - integral_0^v E[c_i](t) dt` in closed form.
    pub fn payment_integral(&self, v: f64) -> f64 {
        self.weighted()
            .map(|(w, tau)| w * (v - tau).min(tau).max(0.0))
            .sum::<f64>()
            / LN_2
    }

    /// Points where the allocation curve changes slope: `{tau, 2 tau}`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .thresholds
            .iter()
            .flat_map(|&t| [t, 2.0 * t])
            .filter(|t| *t > 0.0)
            .collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

/// Threshold ladder of bidder `i` from the elicited low estimates.
pub fn thresholds(reports: &Reports, i: usize) -> Result<ThresholdLadder> {
    let n = reports.n();
    if i >= n {
        return Err(Error::BidderOutOfRange { index: i, n });
    }
    let row = reports.low_row(i);
    let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    let floor = order.first().map_or(0.0, |&j| row[j] / 2.0);
    let mut thresholds: Vec<f64> = order.iter().map(|&j| row[j].max(floor)).collect();
    thresholds.push(floor);
    Ok(ThresholdLadder {
        bidder: i,
        order,
        thresholds,
    })
}

/// `eta_i = 4 (max_{j != i} d_j + 1)`.
pub fn personalized_etas(d: &[u32]) -> Vec<f64> {
    let mut best = (0u32, usize::MAX);
    let mut second = 0u32;
    for (j, &dj) in d.iter().enumerate() {
        if best.1 == usize::MAX || dj > best.0 {
            second = if best.1 == usize::MAX { 0 } else { best.0 };
            best = (dj, j);
        } else if dj > second {
            second = dj;
        }
    }
    (0..d.len())
        .map(|i| {
            let others = if i == best.1 { second } else { best.0 };
            4.0 * (others as f64 + 1.0)
        })
        .collect()
}

/// How the normalization factor is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaPolicy {
    /// Public bound `d`: `2(d+1)` for one item, `4(d+1)` for several.
    KnownD(u32),
    /// Personalized factors from the bidders' own `d` reports.
    UnknownD,
    /// The same factor for everyone, for experiments.
    Fixed(f64),
}

impl EtaPolicy {
    /// Known bound if the instance has one, else personalized factors.
    pub fn default_for(instance: &AuctionInstance) -> Self {
        instance.known_d().map_or(EtaPolicy::UnknownD, EtaPolicy::KnownD)
    }

    pub fn etas(&self, instance: &AuctionInstance) -> Result<Vec<f64>> {
        let n = instance.n();
        let etas = match *self {
            EtaPolicy::KnownD(d) => {
                let scale = if instance.items() == 1 { 2.0 } else { 4.0 };
                vec![scale * (d as f64 + 1.0); n]
            }
            EtaPolicy::UnknownD => personalized_etas(&instance.d_reports()),
            EtaPolicy::Fixed(eta) => vec![eta; n],
        };
        check_etas(&etas, n)?;
        Ok(etas)
    }

    /// The factors the guarantees are proved for; `Fixed` has none.
    pub fn is_default(&self) -> bool {
        !matches!(self, EtaPolicy::Fixed(_))
    }
}

pub(crate) fn check_etas(etas: &[f64], n: usize) -> Result<()> {
    if etas.len() != n {
        return Err(Error::ProfileLength {
            expected: n,
            got: etas.len(),
        });
    }
    match etas.iter().find(|e| e.is_nan() || **e < 1.0 || !e.is_finite()) {
        Some(&bad) => Err(Error::InvalidEta(bad)),
        None => Ok(()),
    }
}

/// `x_i = E[c_i] / eta_i` for every bidder.
pub fn prcf_allocation(reports: &Reports, etas: &[f64]) -> Result<Vec<f64>> {
    check_etas(etas, reports.n())?;
    (0..reports.n())
        .map(|i| Ok(thresholds(reports, i)?.candidate_probability(reports.value(i)) / etas[i]))
        .collect()
}

/// Closed-form payments matching [`prcf_allocation`].
pub fn prcf_payment(reports: &Reports, etas: &[f64]) -> Result<Vec<f64>> {
    check_etas(etas, reports.n())?;
    (0..reports.n())
        .map(|i| Ok(thresholds(reports, i)?.payment_integral(reports.value(i)) / etas[i]))
        .collect()
}

/// A bidder's allocation and payment as functions of its reported value,
/// everything else held fixed.
pub trait ScalarRule {
    fn allocation(&self, v: f64) -> f64;
    fn payment(&self, v: f64) -> f64;
    /// Points where `allocation` may change slope; between two consecutive
    /// breakpoints the allocation is affine in `log2 v`.
    fn breakpoints(&self, upto: f64) -> Vec<f64>;
}

/// [`ScalarRule`] of one bidder under PRCF.
#[derive(Debug, Clone)]
pub struct PrcfRule {
    pub ladder: ThresholdLadder,
    pub eta: f64,
}

impl PrcfRule {
    pub fn new(reports: &Reports, i: usize, eta: f64) -> Result<Self> {
        if eta.is_nan() || eta < 1.0 {
            return Err(Error::InvalidEta(eta));
        }
        Ok(Self {
            ladder: thresholds(reports, i)?,
            eta,
        })
    }
}

impl ScalarRule for PrcfRule {
    fn allocation(&self, v: f64) -> f64 {
        self.ladder.candidate_probability(v) / self.eta
    }

    fn payment(&self, v: f64) -> f64 {
        self.ladder.payment_integral(v) / self.eta
    }

    fn breakpoints(&self, upto: f64) -> Vec<f64> {
        self.ladder.breakpoints().into_iter().filter(|b| *b < upto).collect()
    }
}

/// Integration scheme for [`myerson_payment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integration {
    /// Exact on each piece between breakpoints, using that the allocation is
    /// affine in `log2 t` there.
    PiecewiseExact,
    /// Adaptive Simpson with the given absolute tolerance.
    AdaptiveSimpson { tolerance: f64 },
}

/// `x(v) v - integral_0^v x(t) dt` for a monotone scalar allocation rule.
pub fn myerson_payment(rule: &dyn ScalarRule, v: f64, method: Integration) -> Result<f64> {
    if v.is_nan() || v < 0.0 || !v.is_finite() {
        return Err(Error::NegativeValue(v));
    }
    if v == 0.0 {
        return Ok(0.0);
    }
    let integral = match method {
        Integration::PiecewiseExact => piecewise_log_affine_integral(rule, v),
        Integration::AdaptiveSimpson { tolerance } => {
            adaptive_simpson(|t| rule.allocation(t), 0.0, v, tolerance)?
        }
    };
    Ok(rule.allocation(v) * v - integral)
}

fn piecewise_log_affine_integral(rule: &dyn ScalarRule, v: f64) -> f64 {
    let mut points: Vec<f64> = rule.breakpoints(v);
    points.retain(|b| *b > 0.0 && *b < v);
    points.push(v);
    points.sort_by(f64::total_cmp);
    points.dedup();
    // Below the first breakpoint the allocation is constant on (0, b_1).
    let first = points[0];
    let mut total = rule.allocation(first / 2.0) * first;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (xa, xb) = (rule.allocation(a), rule.allocation(b));
        let log_span = libm::log2(b / a);
        let slope = (xb - xa) / log_span;
        // integral_a^b (xa + slope * log2(t / a)) dt
        total += xa * (b - a) + slope * (b * log_span - (b - a) / LN_2);
    }
    total
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tolerance: f64) -> Result<f64> {
    const MAX_DEPTH: u32 = 48;
    let simpson = |a: f64, fa: f64, b: f64, fb: f64| {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    };
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(a, fa, b, fb);
    let mut stack = vec![(a, fa, b, fb, m, fm, whole, tolerance, 0u32)];
    let mut total = 0.0;
    while let Some((a, fa, b, fb, m, fm, whole, tol, depth)) = stack.pop() {
        let (lm, flm, left) = simpson(a, fa, m, fm);
        let (rm, frm, right) = simpson(m, fm, b, fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            total += left + right + delta / 15.0;
        } else if depth >= MAX_DEPTH {
            return Err(Error::IntegrationDiverged);
        } else {
            stack.push((a, fa, m, fm, lm, flm, left, tol / 2.0, depth + 1));
            stack.push((m, fm, b, fb, rm, frm, right, tol / 2.0, depth + 1));
        }
    }
    Ok(total)
}

/// Tie-breaking used by the sampled candidate rule.
#[derive(Debug, Clone, PartialEq)]
pub enum TieBreak {
    /// Uniformly random priority per draw.
    Random,
    /// The same priority for every draw; only `r` is random.
    Fixed(Priority),
}

/// Precomputed logarithms of the reports, for repeated discretization.
pub(crate) struct Discretizer<'a> {
    reports: &'a Reports,
    log_values: Vec<f64>,
    log_lows: Vec<Vec<f64>>,
}

impl<'a> Discretizer<'a> {
    pub(crate) fn new(reports: &'a Reports) -> Self {
        let n = reports.n();
        Self {
            reports,
            log_values: reports.values().iter().map(|&v| libm::log2(v)).collect(),
            log_lows: (0..n)
                .map(|i| reports.low_row(i).iter().map(|&l| libm::log2(l)).collect())
                .collect(),
        }
    }

    pub(crate) fn value(&self, r: f64, i: usize) -> Discretized {
        round_down_with_log(r, self.reports.value(i), self.log_values[i])
    }

    pub(crate) fn low(&self, r: f64, i: usize, j: usize) -> Discretized {
        round_down_with_log(r, self.reports.low(i, j), self.log_lows[i][j])
    }

    /// Whether bidder `i` beats at least `need` rivals under `(r, pi)`.
    pub(crate) fn is_candidate(&self, r: f64, pi: &Priority, i: usize, need: usize) -> bool {
        let n = self.reports.n();
        let mine = self.value(r, i);
        let mut wins = 0;
        for j in 0..n {
            if j != i && lex_greater(mine, i, self.low(r, i, j), j, pi) {
                wins += 1;
                if wins >= need {
                    return true;
                }
            }
        }
        wins >= need
    }
}

/// Candidate indicators under `(r, pi)` when each candidate must beat at
/// least `need` of the `n - 1` rivals' rounded low estimates.
pub fn candidates_with_quota(reports: &Reports, need: usize, r: f64, pi: &Priority) -> Vec<bool> {
    let d = Discretizer::new(reports);
    (0..reports.n()).map(|i| d.is_candidate(r, pi, i, need)).collect()
}

/// Single-item candidate indicators for one draw.
pub fn candidates(reports: &Reports, seed: &RoundingSeed) -> Vec<bool> {
    let n = reports.n();
    candidates_with_quota(reports, n - 1, seed.offset, &seed.priority)
}

/// Candidate counts over a range of seed streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateTally {
    pub draws: u64,
    /// Number of draws in which each bidder was a candidate.
    pub counts: Vec<u64>,
    /// Sum over draws of the squared number of candidates.
    pub total_squares: u64,
    /// Draws without any candidate.
    pub empty_draws: u64,
}

impl CandidateTally {
    pub fn empty(n: usize) -> Self {
        Self {
            draws: 0,
            counts: vec![0; n],
            total_squares: 0,
            empty_draws: 0,
        }
    }

    pub fn merge(&mut self, other: &CandidateTally) {
        self.draws += other.draws;
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total_squares += other.total_squares;
        self.empty_draws += other.empty_draws;
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let d = self.draws.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / d).collect()
    }

    /// Standard error of each empirical probability.
    pub fn standard_errors(&self) -> Vec<f64> {
        let d = self.draws.max(1) as f64;
        self.probabilities()
            .iter()
            .map(|p| libm::sqrt(p * (1.0 - p) / d))
            .collect()
    }

    pub fn mean_candidates(&self) -> f64 {
        self.counts.iter().sum::<u64>() as f64 / self.draws.max(1) as f64
    }

    pub fn mean_candidates_stderr(&self) -> f64 {
        let d = self.draws.max(1) as f64;
        let mean = self.mean_candidates();
        let var = (self.total_squares as f64 / d - mean * mean).max(0.0);
        libm::sqrt(var / d)
    }
}

/// Runs the candidate rule for every stream in `streams` of `base_seed`.
///
/// Tallies of disjoint ranges merge into the tally of their union, so the
/// result does not depend on how the range is split across workers.
pub fn tally_candidates(
    reports: &Reports,
    need: usize,
    tie: &TieBreak,
    base_seed: u64,
    streams: Range<u64>,
) -> CandidateTally {
    let n = reports.n();
    let d = Discretizer::new(reports);
    let source = SeedStream::new(base_seed);
    let mut tally = CandidateTally::empty(n);
    let mut ranks = Vec::with_capacity(n);
    let mut pi = Priority::identity(n);
    for stream in streams {
        let r = match tie {
            TieBreak::Random => {
                let r = source.draw_into(stream, &mut ranks, n);
                pi = Priority::from_ranks_unchecked(core::mem::take(&mut ranks));
                r
            }
            TieBreak::Fixed(_) => source.offset(stream),
        };
        let priority = match tie {
            TieBreak::Random => &pi,
            TieBreak::Fixed(p) => p,
        };
        let mut count = 0u64;
        for i in 0..n {
            if d.is_candidate(r, priority, i, need) {
                tally.counts[i] += 1;
                count += 1;
            }
        }
        tally.draws += 1;
        tally.total_squares += count * count;
        if count == 0 {
            tally.empty_draws += 1;
        }
        if let TieBreak::Random = tie {
            ranks = core::mem::replace(&mut pi, Priority::identity(0)).into_ranks();
        }
    }
    tally
}

/// Monte Carlo estimate of the randomized allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloEstimate {
    pub x: Vec<f64>,
    pub x_stderr: Vec<f64>,
    pub tally: CandidateTally,
}

impl MonteCarloEstimate {
    pub fn from_tally(tally: CandidateTally, etas: &[f64]) -> Self {
        let x = tally
            .probabilities()
            .iter()
            .zip(etas)
            .map(|(p, e)| p / e)
            .collect();
        let x_stderr = tally
            .standard_errors()
            .iter()
            .zip(etas)
            .map(|(s, e)| s / e)
            .collect();
        Self { x, x_stderr, tally }
    }
}

/// `x_i ~ (#draws with c_i = 1) / (samples * eta_i)` over streams
/// `0..samples` of `base_seed`.
pub fn rcf_monte_carlo(reports: &Reports, etas: &[f64], samples: u64, base_seed: u64) -> Result<MonteCarloEstimate> {
    check_etas(etas, reports.n())?;
    if samples == 0 {
        return Err(Error::InvalidDescriptor("at least one sample is required"));
    }
    let n = reports.n();
    let tally = tally_candidates(reports, n.saturating_sub(1), &TieBreak::Random, base_seed, 0..samples);
    Ok(MonteCarloEstimate::from_tally(tally, etas))
}

/// Exact `Pr_r[c_i = 1]` for every bidder under a fixed priority, by
/// integrating over the offset `r` between the points where some rounded
/// comparison changes.
pub fn expected_candidates_fixed_priority(reports: &Reports, need: usize, pi: &Priority) -> Vec<f64> {
    let n = reports.n();
    (0..n)
        .map(|i| {
            let rivals = (0..n)
                .filter(|&j| j != i)
                .map(|j| (libm::log2(reports.low(i, j)), pi.rank(i) > pi.rank(j)));
            offset_sweep(libm::log2(reports.value(i)), rivals, |c| {
                if c.below + c.tied_won >= need {
                    1.0
                } else {
                    0.0
                }
            })
        })
        .collect()
}

/// How bidder `i`'s rounded value compares with its rivals' rounded low
/// estimates for one offset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct Comparison {
    /// Rivals strictly above.
    pub above: usize,
    /// Tied rivals that win the tie.
    pub tied_lost: usize,
    /// Tied rivals that lose the tie.
    pub tied_won: usize,
    /// Rivals strictly below.
    pub below: usize,
}

impl Comparison {
    fn slot(&mut self, class: u8) -> &mut usize {
        match class {
            0 => &mut self.above,
            1 => &mut self.tied_lost,
            2 => &mut self.tied_won,
            _ => &mut self.below,
        }
    }

    pub fn tied(&self) -> usize {
        self.tied_lost + self.tied_won
    }
}

/// `integral_0^1 g(comparison at r) dr`.
///
/// `rivals` yields `(log2 low, i wins a tie)`. The comparison only changes
/// where `r` crosses the fractional part of one of the logarithms, so the
/// sweep visits at most `n` intervals and updates counts incrementally.
pub(crate) fn offset_sweep<I, G>(log_value: f64, rivals: I, mut g: G) -> f64
where
    I: Iterator<Item = (f64, bool)>,
    G: FnMut(&Comparison) -> f64,
{
    // Exponent of f_r(w) just after r = 0, and the offset where it drops.
    let start = |l: f64| -> (Option<i64>, f64) {
        if l == f64::NEG_INFINITY {
            return (None, 2.0);
        }
        let fl = libm::floor(l);
        let frac = l - fl;
        if frac == 0.0 {
            (Some(fl as i64 - 1), 2.0)
        } else {
            (Some(fl as i64), frac)
        }
    };
    let classify = |k: Option<i64>, kv: Option<i64>, wins_tie: bool| -> u8 {
        match k.cmp(&kv) {
            core::cmp::Ordering::Greater => 0,
            core::cmp::Ordering::Equal if wins_tie => 2,
            core::cmp::Ordering::Equal => 1,
            core::cmp::Ordering::Less => 3,
        }
    };
    let (mut kv, value_drop) = start(log_value);
    let mut state: Vec<(Option<i64>, bool, u8)> = Vec::new();
    let mut events: Vec<(f64, usize)> = Vec::new();
    let mut counts = Comparison::default();
    for (l, wins_tie) in rivals {
        let (k, drop) = start(l);
        let class = classify(k, kv, wins_tie);
        *counts.slot(class) += 1;
        if drop < 1.0 {
            events.push((drop, state.len()));
        }
        state.push((k, wins_tie, class));
    }
    if value_drop < 1.0 {
        events.push((value_drop, usize::MAX));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut from = 0.0;
    let mut e = 0;
    while e < events.len() {
        let at = events[e].0;
        total += (at - from) * g(&counts);
        let mut recount = false;
        while e < events.len() && events[e].0 == at {
            let idx = events[e].1;
            if idx == usize::MAX {
                kv = kv.map(|k| k - 1);
                recount = true;
            } else {
                let (k, wins_tie, class) = &mut state[idx];
                *k = k.map(|k| k - 1);
                *counts.slot(*class) -= 1;
                *class = classify(*k, kv, *wins_tie);
                *counts.slot(*class) += 1;
            }
            e += 1;
        }
        if recount {
            counts = Comparison::default();
            for (k, wins_tie, class) in state.iter_mut() {
                *class = classify(*k, kv, *wins_tie);
                *counts.slot(*class) += 1;
            }
        }
        from = at;
    }
    total + (1.0 - from) * g(&counts)
}

/// Draws a winner: bidder `i` with probability `x_i`, nobody with the rest.
pub fn sample_winner(x: &[f64], u: f64) -> Option<usize> {
    let mut acc = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        acc += xi;
        if u < acc {
            return Some(i);
        }
    }
    None
}

/// Runs PRCF on a single-item instance.
///
/// Elicits `n` values and `n(n-1)` low estimates, computes the allocation and
/// payments, and samples a winner when `sample_seed` is given. Fails with
/// [`Error::Infeasible`] if the allocation sums above one.
pub fn run_single_item(
    instance: &AuctionInstance,
    policy: EtaPolicy,
    sample_seed: Option<u64>,
) -> Result<MechanismOutcome> {
    if instance.items() != 1 {
        return Err(Error::ItemCountOutOfRange {
            m: instance.items(),
            n: instance.n(),
        });
    }
    let etas = policy.etas(instance)?;
    let before = instance.query_counts();
    let reports = Reports::elicit(instance)?;
    let after = instance.query_counts();
    let n = reports.n();
    let ladders: Vec<ThresholdLadder> = (0..n).map(|i| thresholds(&reports, i)).collect::<Result<_>>()?;
    let candidate_probability: Vec<f64> = ladders
        .iter()
        .map(|l| l.candidate_probability(reports.value(l.bidder)))
        .collect();
    let x: Vec<f64> = candidate_probability.iter().zip(&etas).map(|(c, e)| c / e).collect();
    let p: Vec<f64> = ladders
        .iter()
        .zip(&etas)
        .map(|(l, e)| l.payment_integral(reports.value(l.bidder)) / e)
        .collect();
    let sum: f64 = x.iter().sum();
    if sum > 1.0 + FEASIBILITY_SLACK {
        return Err(Error::Infeasible { sum, supply: 1.0 });
    }
    let winners = sample_seed.map(|seed| {
        let u = SeedStream::new(seed).rng(WINNER_STREAM).random::<f64>();
        sample_winner(&x, u).into_iter().collect()
    });
    Ok(MechanismOutcome {
        items: 1,
        x,
        p,
        eta: etas,
        candidate_probability,
        thresholds: ladders.into_iter().map(|l| l.thresholds).collect(),
        values: reports.values().to_vec(),
        queries: QueryDelta::between(before, after),
        winners,
        seed: sample_seed,
    })
}

/// Floating-point slack on the supply constraint.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

/// Stream index reserved for ex-post sampling, disjoint from Monte Carlo
/// streams `0..samples`.
pub const WINNER_STREAM: u64 = u64::MAX;

pub(crate) struct QueryDelta;

impl QueryDelta {
    pub(crate) fn between(before: crate::oracle::QueryCounts, after: crate::oracle::QueryCounts) -> crate::oracle::QueryCounts {
        crate::oracle::QueryCounts {
            value: after.value - before.value,
            low: after.low - before.low,
        }
    }
}
