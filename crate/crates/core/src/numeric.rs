//! Randomized discretization primitives.
//!
//! A value `w > 0` is rounded down to `f_r(w) = 2^(r+k)` where `k` is the
//! unique integer with `2^(r+k) <= w < 2^(r+k+1)`. Rounded values that share
//! the same offset `r` are compared through their integer exponents only.
//! Zero maps to a `-inf` sentinel that loses every strict comparison and ties
//! only with itself.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::LN_2;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instance::Priority;

/// `max(0, min(1, log2(alpha)))`, with `log†(+inf) = 1` and `log†(0) = 0`.
pub fn log_dagger(alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::NegativeValue(alpha));
    }
    if alpha <= 1.0 {
        return Ok(0.0);
    }
    if alpha >= 2.0 {
        return Ok(1.0);
    }
    Ok(libm::log2(alpha).clamp(0.0, 1.0))
}

/// `log†(a / b)` with `a > 0, b = 0 -> 1` and `a = 0 -> 0`.
pub fn log_dagger_ratio(a: f64, b: f64) -> Result<f64> {
    check_non_negative(a)?;
    check_non_negative(b)?;
    Ok(log_dagger_ratio_unchecked(a, b))
}

#[inline]
pub(crate) fn log_dagger_ratio_unchecked(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    if b == 0.0 || a >= 2.0 * b {
        return 1.0;
    }
    if a <= b {
        return 0.0;
    }
    let ratio = a / b;
    let l = if ratio.is_finite() && ratio > 0.0 {
        libm::log2(ratio)
    } else {
        libm::log2(a) - libm::log2(b)
    };
    l.clamp(0.0, 1.0)
}

/// Exact probability over `r ~ U[0,1)` that `f_r(a) > f_r(b)`.
///
/// Equal to `log†(a / b)`; the zero conventions follow [`log_dagger_ratio`].
pub fn cross_probability(a: f64, b: f64) -> Result<f64> {
    log_dagger_ratio(a, b)
}

/// `E_r[f_r(v)] = v / (2 ln 2)`.
pub fn expected_rounded_value(v: f64) -> Result<f64> {
    if v.is_nan() || v <= 0.0 || !v.is_finite() {
        return Err(Error::NonPositiveValue(v));
    }
    Ok(v / (2.0 * LN_2))
}

/// Evaluates `log†(alpha * beta) <= log†(alpha) + log†(beta)`.
///
/// The product is formed in the log domain so that `alpha * beta` never
/// overflows.
pub fn log_dagger_subadditive(alpha: f64, beta: f64) -> Result<bool> {
    let la = log_dagger(alpha)?;
    let lb = log_dagger(beta)?;
    if alpha == 0.0 || beta == 0.0 {
        return Ok(true);
    }
    let lp = (libm::log2(alpha) + libm::log2(beta)).clamp(0.0, 1.0);
    Ok(lp <= la + lb + 1e-12)
}

fn check_non_negative(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 || x.is_infinite() {
        Err(Error::NegativeValue(x))
    } else {
        Ok(())
    }
}

/// A value rounded down by `f_r`, stored as its exponent.
///
/// `exponent == None` is the sentinel for a zero value. Comparisons are only
/// meaningful between values discretized under the same offset.
#[derive(Debug, Clone, Copy)]
pub struct Discretized {
    exponent: Option<i64>,
    offset: f64,
}

impl Discretized {
    pub fn exponent(&self) -> Option<i64> {
        self.exponent
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn is_zero(&self) -> bool {
        self.exponent.is_none()
    }

    /// `2^(r+k)`, or 0 for the sentinel.
    pub fn value(&self) -> f64 {
        match self.exponent {
            Some(k) => libm::exp2(self.offset + k as f64),
            None => 0.0,
        }
    }
}

impl PartialEq for Discretized {
    fn eq(&self, other: &Self) -> bool {
        debug_assert!(self.offset == other.offset);
        self.exponent == other.exponent
    }
}

impl Eq for Discretized {}

impl PartialOrd for Discretized {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Discretized {
    fn cmp(&self, other: &Self) -> Ordering {
        debug_assert!(self.offset == other.offset);
        // None < Some(_) gives the -inf sentinel for free.
        self.exponent.cmp(&other.exponent)
    }
}

/// Rounds `w` down to the grid `{2^(r+k)}`.
pub fn round_down(r: f64, w: f64) -> Result<Discretized> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::InvalidDescriptor("discretization offset must lie in [0, 1)"));
    }
    check_non_negative(w)?;
    Ok(round_down_with_log(r, w, libm::log2(w)))
}

/// [`round_down`] with `log2(w)` precomputed. `w` must be finite and `>= 0`.
#[inline]
pub(crate) fn round_down_with_log(r: f64, w: f64, log2_w: f64) -> Discretized {
    if w == 0.0 {
        return Discretized {
            exponent: None,
            offset: r,
        };
    }
    let t = log2_w - r;
    let mut k = libm::floor(t);
    let frac = t - k;
    // Only values within rounding distance of a grid point need the exact
    // half-open interval check.
    if !(1e-9..=1.0 - 1e-9).contains(&frac) {
        if libm::exp2(r + k + 1.0) <= w {
            k += 1.0;
        } else if libm::exp2(r + k) > w {
            k -= 1.0;
        }
    }
    Discretized {
        exponent: Some(k as i64),
        offset: r,
    }
}

/// Randomness for one draw of the mechanism: an offset and a tie-breaking
/// priority.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundingSeed {
    pub offset: f64,
    pub priority: Priority,
    pub base_seed: u64,
    pub stream: u64,
}

/// Deterministic source of [`RoundingSeed`]s keyed by `(base_seed, stream)`.
///
/// Each stream index selects an independent ChaCha8 stream, so disjoint
/// stream ranges can be consumed by different workers and merged in any
/// order.
#[derive(Debug, Clone)]
pub struct SeedStream {
    base_seed: u64,
    rng: ChaCha8Rng,
}

impl SeedStream {
    pub fn new(base_seed: u64) -> Self {
        Self {
            base_seed,
            rng: ChaCha8Rng::seed_from_u64(base_seed),
        }
    }

    /// Generator positioned at the start of `stream`.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = self.rng.clone();
        rng.set_stream(stream);
        rng.set_word_pos(0);
        rng
    }

    /// Offset `r` only, for draws that use a fixed priority.
    pub fn offset(&self, stream: u64) -> f64 {
        self.rng(stream).random::<f64>()
    }

    /// Draws `(r, pi)` for stream `stream` into `ranks` (length `n`).
    pub fn draw_into(&self, stream: u64, ranks: &mut Vec<usize>, n: usize) -> f64 {
        let mut rng = self.rng(stream);
        let r = rng.random::<f64>();
        ranks.clear();
        ranks.extend(0..n);
        ranks.shuffle(&mut rng);
        r
    }

    pub fn draw(&self, stream: u64, n: usize) -> RoundingSeed {
        let mut ranks = Vec::with_capacity(n);
        let offset = self.draw_into(stream, &mut ranks, n);
        RoundingSeed {
            offset,
            priority: Priority::from_ranks_unchecked(ranks),
            base_seed: self.base_seed,
            stream,
        }
    }
}

/// The `(r, pi)` pair of stream `stream` under `base_seed`, with `pi` a
/// permutation of `n` bidders.
pub fn draw_seed(base_seed: u64, stream: u64, n: usize) -> RoundingSeed {
    SeedStream::new(base_seed).draw(stream, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_dagger_examples() {
        assert_eq!(log_dagger(1.0).unwrap(), 0.0);
        assert_eq!(log_dagger(2.0).unwrap(), 1.0);
        assert_eq!(log_dagger(f64::INFINITY).unwrap(), 1.0);
        assert_eq!(log_dagger(0.0).unwrap(), 0.0);
        assert!((log_dagger(1.5).unwrap() - 0.584_962_500_721_156).abs() < 1e-12);
        assert!(log_dagger(-0.1).is_err());
    }

    #[test]
    fn ratio_examples_and_zero_conventions() {
        assert_eq!(log_dagger_ratio(2.0, 1.0).unwrap(), 1.0);
        assert_eq!(log_dagger_ratio(3.0, 3.0).unwrap(), 0.0);
        assert!((log_dagger_ratio(3.0, 2.0).unwrap() - 0.584_962_500_721_156).abs() < 1e-12);
        assert_eq!(log_dagger_ratio(5.0, 0.0).unwrap(), 1.0);
        assert_eq!(log_dagger_ratio(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(log_dagger_ratio(0.0, 3.0).unwrap(), 0.0);
        assert!(log_dagger_ratio(-1.0, 3.0).is_err());
        // extreme magnitudes stay finite
        assert_eq!(log_dagger_ratio(1e300, 1e-300).unwrap(), 1.0);
        assert_eq!(log_dagger_ratio(1e-300, 1e300).unwrap(), 0.0);
    }

    #[test]
    fn cross_probability_examples() {
        let p = cross_probability(libm::exp2(1.7), libm::exp2(1.2)).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert_eq!(cross_probability(4.0, 1.0).unwrap(), 1.0);
        assert_eq!(cross_probability(1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn expected_rounded_value_examples() {
        assert!((expected_rounded_value(1.0).unwrap() - 0.721_347_520_444_481_7).abs() < 1e-12);
        assert!((expected_rounded_value(2.0 * LN_2).unwrap() - 1.0).abs() < 1e-15);
        assert!(expected_rounded_value(0.0).is_err());
        assert!(expected_rounded_value(-2.0).is_err());
    }

    #[test]
    fn round_down_examples() {
        assert_eq!(round_down(0.0, 5.0).unwrap().exponent(), Some(2));
        assert_eq!(round_down(0.0, 5.0).unwrap().value(), 4.0);
        assert_eq!(round_down(0.5, 5.0).unwrap().exponent(), Some(1));
        let w = libm::exp2(0.3);
        let d = round_down(0.3, w).unwrap();
        assert!(d.value() <= w);
        assert_eq!(d.exponent(), Some(0));
        assert!(round_down(0.0, 0.0).unwrap().is_zero());
        assert!(round_down(0.0, -1.0).is_err());
        assert!(round_down(1.0, 1.0).is_err());
    }

    #[test]
    fn round_down_interval_is_half_open() {
        for &r in &[0.0, 0.1, 0.5, 0.999] {
            for &w in &[1e-300, 1e-10, 0.3, 1.0, 2.0, 7.5, 1e10, 1e300] {
                let d = round_down(r, w).unwrap();
                let k = d.exponent().unwrap() as f64;
                assert!(libm::exp2(r + k) <= w, "r={r} w={w}");
                assert!(w < libm::exp2(r + k + 1.0), "r={r} w={w}");
            }
        }
    }

    #[test]
    fn zero_sentinel_ordering() {
        let z = round_down(0.2, 0.0).unwrap();
        let z2 = round_down(0.2, 0.0).unwrap();
        let tiny = round_down(0.2, 1e-300).unwrap();
        assert!(z < tiny);
        assert_eq!(z, z2);
    }

    #[test]
    fn subadditivity_examples() {
        assert!(log_dagger_subadditive(1.5, 1.5).unwrap());
        assert_eq!(log_dagger(2.25).unwrap(), 1.0);
        assert!(log_dagger_subadditive(0.5, 4.0).unwrap());
        assert!(log_dagger_subadditive(1.0, 1.0).unwrap());
        assert!(log_dagger_subadditive(0.0, 1e300).unwrap());
    }

    #[test]
    fn seeds_are_deterministic() {
        let a = draw_seed(7, 3, 6);
        let b = draw_seed(7, 3, 6);
        assert_eq!(a, b);
        assert!((0.0..1.0).contains(&a.offset));
        let mut ranks = a.priority.ranks().to_vec();
        ranks.sort_unstable();
        assert_eq!(ranks, (0..6).collect::<Vec<_>>());
        assert_ne!(draw_seed(7, 0, 6).offset, draw_seed(7, 1, 6).offset);
    }
}
