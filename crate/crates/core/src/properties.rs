//! Brute-force checkers for valuation properties over a finite grid.
//!
//! Every checker tabulates the valuation over the full grid product first,
//! so the cost is one evaluation per profile plus table lookups.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::oracle::Valuation;
use crate::signal::SignalSpace;

/// Default cap on the number of profiles a checker will enumerate.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 20;

/// Absolute tolerance on comparisons of computed values.
pub const TOLERANCE: f64 = 1e-9;

/// Margin for "strictly lowers the value" in the critical parameter.
pub const STRICT_MARGIN: f64 = 1e-12;

/// A valuation tabulated over every profile of a grid.
pub struct ValueTable {
    values: Vec<f64>,
    lens: Vec<usize>,
    strides: Vec<usize>,
    grids: Vec<Vec<f64>>,
}

impl ValueTable {
    pub fn tabulate(v: &dyn Valuation, space: &SignalSpace, cap: u128) -> Result<Self> {
        space.ensure_enumerable(cap)?;
        let n = space.n();
        let lens: Vec<usize> = space.grids().iter().map(Vec::len).collect();
        let mut strides = vec![1usize; n];
        for b in (0..n.saturating_sub(1)).rev() {
            strides[b] = strides[b + 1] * lens[b + 1];
        }
        let values = space.profiles().map(|s| v.value(&s)).collect();
        Ok(Self {
            values,
            lens,
            strides,
            grids: space.grids().to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn coordinate(&self, flat: usize, b: usize) -> usize {
        (flat / self.strides[b]) % self.lens[b]
    }

    pub fn value(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    pub fn profile(&self, flat: usize) -> Vec<f64> {
        (0..self.lens.len())
            .map(|b| self.grids[b][self.coordinate(flat, b)])
            .collect()
    }

    /// `min` over bidder `b`'s grid with the other coordinates of `flat` fixed.
    pub fn low(&self, flat: usize, b: usize) -> f64 {
        let base = flat - self.coordinate(flat, b) * self.strides[b];
        (0..self.lens[b])
            .map(|k| self.values[base + k * self.strides[b]])
            .fold(f64::INFINITY, f64::min)
    }

    fn step(&self, flat: usize, b: usize) -> Option<usize> {
        (self.coordinate(flat, b) + 1 < self.lens[b]).then(|| flat + self.strides[b])
    }
}

/// Non-decreasing along every single-coordinate grid step.
pub fn check_monotone(v: &dyn Valuation, space: &SignalSpace, cap: u128) -> Result<bool> {
    let t = ValueTable::tabulate(v, space, cap)?;
    let n = space.n();
    Ok((0..t.len()).all(|f| {
        (0..n).all(|b| match t.step(f, b) {
            Some(g) => t.value(g) >= t.value(f) - TOLERANCE,
            None => true,
        })
    }))
}

/// Submodularity over signals.
///
/// On a product of chains the condition for all comparable pairs is
/// equivalent to decreasing differences between adjacent grid steps of two
/// distinct coordinates, which is what is checked here.
pub fn check_sos(v: &dyn Valuation, space: &SignalSpace, cap: u128) -> Result<bool> {
    let t = ValueTable::tabulate(v, space, cap)?;
    let n = space.n();
    for f in 0..t.len() {
        for i in 0..n {
            let Some(fi) = t.step(f, i) else { continue };
            let gain_low = t.value(fi) - t.value(f);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let Some(fj) = t.step(f, j) else { continue };
                let fij = fj + (fi - f);
                let gain_high = t.value(fij) - t.value(fj);
                if gain_high > gain_low + TOLERANCE {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Largest `sum_i (v(s) - low_i(s)) / v(s)` over all profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfBoundingReport {
    pub parameter: f64,
    pub witness: Vec<f64>,
}

impl SelfBoundingReport {
    /// Smallest integer `d` with `d >= parameter` (up to [`TOLERANCE`]).
    pub fn smallest_integer_d(&self) -> u32 {
        if self.parameter.is_infinite() {
            return u32::MAX;
        }
        libm::ceil(self.parameter - TOLERANCE).max(0.0) as u32
    }
}

pub fn self_bounding_parameter(v: &dyn Valuation, space: &SignalSpace, cap: u128) -> Result<SelfBoundingReport> {
    let t = ValueTable::tabulate(v, space, cap)?;
    let n = space.n();
    let mut best = SelfBoundingReport {
        parameter: 0.0,
        witness: t.profile(0),
    };
    for f in 0..t.len() {
        let value = t.value(f);
        let drop: f64 = (0..n).map(|b| value - t.low(f, b)).sum();
        let ratio = if value == 0.0 {
            if drop <= 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            drop / value
        };
        if ratio > best.parameter {
            best = SelfBoundingReport {
                parameter: ratio,
                witness: t.profile(f),
            };
        }
    }
    Ok(best)
}

/// Largest number of bidders that can strictly lower the value by minimizing
/// their own signal.
pub fn critical_parameter(v: &dyn Valuation, space: &SignalSpace, cap: u128) -> Result<usize> {
    let t = ValueTable::tabulate(v, space, cap)?;
    let n = space.n();
    Ok((0..t.len())
        .map(|f| {
            let value = t.value(f);
            (0..n).filter(|&b| value > t.low(f, b) + STRICT_MARGIN).count()
        })
        .max()
        .unwrap_or(0))
}

/// Outcome of checking that an SOS valuation is 1-self-bounding when
/// monotone and 2-self-bounding otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SosAudit {
    pub monotone: bool,
    pub sos: bool,
    pub parameter: f64,
    pub bound: f64,
    pub witness: Vec<f64>,
}

impl SosAudit {
    pub fn holds(&self) -> bool {
        !self.sos || self.parameter <= self.bound + TOLERANCE
    }
}

pub fn sos_self_bounding_audit(v: &dyn Valuation, space: &SignalSpace, cap: u128) -> Result<SosAudit> {
    let monotone = check_monotone(v, space, cap)?;
    let sos = check_sos(v, space, cap)?;
    let report = self_bounding_parameter(v, space, cap)?;
    Ok(SosAudit {
        monotone,
        sos,
        parameter: report.parameter,
        bound: if monotone { 1.0 } else { 2.0 },
        witness: report.witness,
    })
}
