//! Concrete valuation families.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::oracle::{Valuation, ValuationOracle};
use crate::properties::{self, DEFAULT_ENUMERATION_CAP};
use crate::signal::SignalSpace;

/// Grid products up to this size get an exact self-bounding report by
/// enumeration; larger ones fall back to the family's known bound.
const EXACT_REPORT_CAP: u128 = 1 << 12;

/// Parameters of a valuation family. Signals enter linearly unless stated.
#[derive(Debug, Clone, PartialEq)]
pub enum ValuationFamily {
    /// `sum_j w_j s_j`, weights non-negative.
    Additive { weights: Vec<f64> },
    /// `max_j w_j s_j`.
    Max { weights: Vec<f64> },
    /// `(sum_j w_j s_j)^p` with `0 < p <= 1`.
    ConcaveOfSum { weights: Vec<f64>, exponent: f64 },
    /// `2(1 + eps)/n * sum_j s_j`.
    Example31 { epsilon: f64 },
    /// `2^((n-i)/n) * sum_{j = i-sqrt(n)+1}^{i} s_j / sqrt(n)` for the
    /// 1-based bidder `i = bidder + 1 >= sqrt(n)`, and 0 below. `n` must be a
    /// perfect square.
    Example32 { bidder: usize },
    /// `sum_{j in D} w_j s_j`: depends on the signals in `D` only.
    BoundedDependency { dependencies: Vec<usize>, weights: Vec<f64> },
    /// Weighted coverage: bidder `j` covers the elements `covers[j]` when its
    /// signal is above its grid minimum. Monotone and submodular.
    Coverage {
        covers: Vec<Vec<usize>>,
        element_weights: Vec<f64>,
    },
    /// `offset + sum` of edge weights with exactly one active endpoint,
    /// where a bidder is active when its signal is above its grid minimum.
    /// Submodular, not monotone.
    Cut {
        edges: Vec<(usize, usize, f64)>,
        offset: f64,
    },
    /// Explicit value per profile, in the odometer order of
    /// [`SignalSpace::profiles`].
    Table { values: Vec<f64> },
}

impl ValuationFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Additive { .. } => "additive",
            Self::Max { .. } => "max",
            Self::ConcaveOfSum { .. } => "concave-of-sum",
            Self::Example31 { .. } => "example31",
            Self::Example32 { .. } => "example32",
            Self::BoundedDependency { .. } => "bounded-dependency",
            Self::Coverage { .. } => "coverage",
            Self::Cut { .. } => "cut",
            Self::Table { .. } => "table",
        }
    }

    /// Upper bound on the self-bounding parameter implied by the family.
    pub fn known_self_bounding(&self) -> Option<u32> {
        match self {
            Self::Cut { .. } => Some(2),
            Self::Table { .. } => None,
            _ => Some(1),
        }
    }

    /// Monotone in every signal by construction.
    pub fn is_monotone(&self) -> bool {
        !matches!(self, Self::Cut { .. } | Self::Table { .. })
    }

    /// Submodular over signals by construction.
    pub fn is_sos(&self) -> bool {
        !matches!(self, Self::Max { .. } | Self::Table { .. })
    }
}

fn non_negative(ws: &[f64]) -> bool {
    ws.iter().all(|w| w.is_finite() && *w >= 0.0)
}

fn exact_sqrt(n: usize) -> Option<usize> {
    let r = libm::sqrt(n as f64) as usize;
    (r.saturating_sub(1)..=r + 1).find(|k| k * k == n)
}

struct Family {
    family: ValuationFamily,
    n: usize,
    zeros: Vec<f64>,
    strides: Vec<usize>,
    grids: Vec<Vec<f64>>,
    root: usize,
}

impl Family {
    fn active(&self, j: usize, s: &[f64]) -> bool {
        s[j] > self.zeros[j]
    }

    fn example32_window(&self, bidder: usize) -> Option<core::ops::RangeInclusive<usize>> {
        let i = bidder + 1;
        (i >= self.root).then(|| (i - self.root)..=bidder)
    }
}

impl Valuation for Family {
    fn value(&self, s: &[f64]) -> f64 {
        match &self.family {
            ValuationFamily::Additive { weights } => weights.iter().zip(s).map(|(w, x)| w * x).sum(),
            ValuationFamily::Max { weights } => weights
                .iter()
                .zip(s)
                .map(|(w, x)| w * x)
                .fold(0.0, f64::max),
            ValuationFamily::ConcaveOfSum { weights, exponent } => {
                let sum: f64 = weights.iter().zip(s).map(|(w, x)| w * x).sum();
                libm::pow(sum, *exponent)
            }
            ValuationFamily::Example31 { epsilon } => {
                2.0 * (1.0 + epsilon) / self.n as f64 * s.iter().sum::<f64>()
            }
            ValuationFamily::Example32 { bidder } => match self.example32_window(*bidder) {
                Some(window) => {
                    let i = *bidder + 1;
                    let scale = libm::exp2((self.n - i) as f64 / self.n as f64);
                    scale * s[window].iter().sum::<f64>() / self.root as f64
                }
                None => 0.0,
            },
            ValuationFamily::BoundedDependency {
                dependencies,
                weights,
            } => dependencies.iter().zip(weights).map(|(&j, w)| w * s[j]).sum(),
            ValuationFamily::Coverage {
                covers,
                element_weights,
            } => {
                let mut covered = alloc::vec![false; element_weights.len()];
                for (j, set) in covers.iter().enumerate() {
                    if self.active(j, s) {
                        for &e in set {
                            covered[e] = true;
                        }
                    }
                }
                covered
                    .iter()
                    .zip(element_weights)
                    .filter(|(c, _)| **c)
                    .map(|(_, w)| w)
                    .sum()
            }
            ValuationFamily::Cut { edges, offset } => {
                offset
                    + edges
                        .iter()
                        .filter(|(a, b, _)| self.active(*a, s) != self.active(*b, s))
                        .map(|(_, _, w)| w)
                        .sum::<f64>()
            }
            ValuationFamily::Table { values } => {
                let mut flat = 0;
                for (b, &x) in s.iter().enumerate() {
                    let k = self.grids[b]
                        .iter()
                        .position(|&g| g == x)
                        .expect("signal off the grid");
                    flat += k * self.strides[b];
                }
                values[flat]
            }
        }
    }

    fn low_estimate(&self, i: usize, s: &[f64], _space: &SignalSpace) -> Option<f64> {
        let zero = self.zeros[i];
        match &self.family {
            ValuationFamily::Additive { weights } => {
                let v: f64 = self.value(s);
                Some((v - weights[i] * (s[i] - zero)).max(0.0))
            }
            ValuationFamily::Max { weights } => Some(
                weights
                    .iter()
                    .zip(s)
                    .enumerate()
                    .map(|(j, (w, x))| if j == i { w * zero } else { w * x })
                    .fold(0.0, f64::max),
            ),
            ValuationFamily::ConcaveOfSum { .. }
            | ValuationFamily::Example31 { .. }
            | ValuationFamily::Coverage { .. } => {
                let mut t = s.to_vec();
                t[i] = zero;
                Some(self.value(&t))
            }
            ValuationFamily::Example32 { bidder } => match self.example32_window(*bidder) {
                Some(window) if window.contains(&i) => {
                    let i1 = *bidder + 1;
                    let scale = libm::exp2((self.n - i1) as f64 / self.n as f64);
                    let sum: f64 = window.map(|j| if j == i { zero } else { s[j] }).sum();
                    Some(scale * sum / self.root as f64)
                }
                Some(_) => Some(self.value(s)),
                None => Some(0.0),
            },
            ValuationFamily::BoundedDependency {
                dependencies,
                weights,
            } => Some(
                dependencies
                    .iter()
                    .zip(weights)
                    .map(|(&j, w)| if j == i { w * zero } else { w * s[j] })
                    .sum(),
            ),
            ValuationFamily::Cut { .. } | ValuationFamily::Table { .. } => None,
        }
    }
}

fn validate(family: &ValuationFamily, space: &SignalSpace) -> Result<()> {
    let n = space.n();
    let bad = Error::InvalidDescriptor;
    match family {
        ValuationFamily::Additive { weights } | ValuationFamily::Max { weights } => {
            if weights.len() != n || !non_negative(weights) {
                return Err(bad("weights must be n non-negative numbers"));
            }
        }
        ValuationFamily::ConcaveOfSum { weights, exponent } => {
            if weights.len() != n || !non_negative(weights) {
                return Err(bad("weights must be n non-negative numbers"));
            }
            if !(*exponent > 0.0 && *exponent <= 1.0) {
                return Err(bad("concavity exponent must lie in (0, 1]"));
            }
        }
        ValuationFamily::Example31 { epsilon } => {
            if !(epsilon.is_finite() && *epsilon >= 0.0) {
                return Err(bad("epsilon must be non-negative"));
            }
        }
        ValuationFamily::Example32 { bidder } => {
            if exact_sqrt(n).is_none() {
                return Err(bad("example32 needs a perfect-square number of bidders"));
            }
            if *bidder >= n {
                return Err(bad("example32 bidder index out of range"));
            }
        }
        ValuationFamily::BoundedDependency {
            dependencies,
            weights,
        } => {
            if dependencies.len() != weights.len() || !non_negative(weights) {
                return Err(bad("one non-negative weight per dependency"));
            }
            let mut seen = alloc::vec![false; n];
            for &j in dependencies {
                if j >= n || seen[j] {
                    return Err(bad("dependencies must be distinct bidder indices"));
                }
                seen[j] = true;
            }
        }
        ValuationFamily::Coverage {
            covers,
            element_weights,
        } => {
            if covers.len() != n || !non_negative(element_weights) {
                return Err(bad("coverage needs one cover set per bidder and non-negative weights"));
            }
            if covers.iter().flatten().any(|&e| e >= element_weights.len()) {
                return Err(bad("cover set refers to a missing element"));
            }
        }
        ValuationFamily::Cut { edges, offset } => {
            if !(offset.is_finite() && *offset >= 0.0) {
                return Err(bad("cut offset must be non-negative"));
            }
            if edges
                .iter()
                .any(|&(a, b, w)| a >= n || b >= n || a == b || !(w.is_finite() && w >= 0.0))
            {
                return Err(bad("cut edges need distinct endpoints and non-negative weights"));
            }
        }
        ValuationFamily::Table { values } => {
            if values.len() as u128 != space.product_size() || !non_negative(values) {
                return Err(bad("table must list a non-negative value for every profile"));
            }
        }
    }
    Ok(())
}

/// A [`Valuation`] for `family` over `space`, after validating the parameters.
pub fn family_valuation(family: ValuationFamily, space: &SignalSpace) -> Result<Box<dyn Valuation>> {
    validate(&family, space)?;
    let n = space.n();
    let mut strides = alloc::vec![1usize; n];
    for b in (0..n.saturating_sub(1)).rev() {
        strides[b] = strides[b + 1].saturating_mul(space.grid(b + 1).len());
    }
    let grids = if matches!(family, ValuationFamily::Table { .. }) {
        space.grids().to_vec()
    } else {
        Vec::new()
    };
    Ok(Box::new(Family {
        family,
        n,
        zeros: (0..n).map(|b| space.zero(b)).collect(),
        strides,
        grids,
        root: exact_sqrt(n).unwrap_or(1),
    }))
}

/// Builds a counted oracle for `family` and attaches its self-bounding
/// report: exact by enumeration on small grids, the family bound otherwise.
pub fn build_valuation(family: ValuationFamily, space: Arc<SignalSpace>) -> Result<ValuationOracle> {
    let known = family.known_self_bounding();
    let valuation = family_valuation(family, &space)?;
    let report = if space.product_size() <= EXACT_REPORT_CAP || known.is_none() {
        let sb = properties::self_bounding_parameter(valuation.as_ref(), &space, DEFAULT_ENUMERATION_CAP)?;
        Some(sb.smallest_integer_d())
    } else {
        known
    };
    let oracle = ValuationOracle::new(valuation, space);
    Ok(match report {
        Some(d) => oracle.with_reported_d(d),
        None => oracle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn eval(family: ValuationFamily, space: &SignalSpace, s: &[f64]) -> f64 {
        family_valuation(family, space).unwrap().value(s)
    }

    #[test]
    fn formula_examples() {
        let s4 = SignalSpace::binary(4);
        let v = eval(ValuationFamily::Example31 { epsilon: 0.1 }, &s4, &[1.0; 4]);
        assert!((v - 2.2).abs() < 1e-12);

        let s3 = SignalSpace::uniform(3, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        let add = ValuationFamily::Additive {
            weights: vec![1.0; 3],
        };
        assert_eq!(eval(add, &s3, &[1.0, 2.0, 3.0]), 6.0);

        let s16 = SignalSpace::binary(16);
        let v16 = eval(ValuationFamily::Example32 { bidder: 15 }, &s16, &[1.0; 16]);
        assert!((v16 - 1.0).abs() < 1e-12);
        // bidders below sqrt(n) are inert
        assert_eq!(eval(ValuationFamily::Example32 { bidder: 2 }, &s16, &[1.0; 16]), 0.0);
    }

    #[test]
    fn closed_form_lows_match_enumeration() {
        let space = SignalSpace::uniform(4, &[0.5, 1.0, 2.0]).unwrap();
        let families = vec![
            ValuationFamily::Additive {
                weights: vec![1.0, 2.0, 0.0, 3.0],
            },
            ValuationFamily::Max {
                weights: vec![1.0, 2.0, 0.5, 3.0],
            },
            ValuationFamily::ConcaveOfSum {
                weights: vec![1.0, 2.0, 0.5, 3.0],
                exponent: 0.5,
            },
            ValuationFamily::Example31 { epsilon: 0.2 },
            ValuationFamily::Example32 { bidder: 3 },
            ValuationFamily::BoundedDependency {
                dependencies: vec![1, 3],
                weights: vec![2.0, 1.0],
            },
            ValuationFamily::Coverage {
                covers: vec![vec![0, 1], vec![1], vec![2], vec![0, 2]],
                element_weights: vec![1.0, 2.0, 0.5],
            },
        ];
        for family in families {
            let tag = family.tag();
            let v = family_valuation(family, &space).unwrap();
            for s in space.profiles() {
                for i in 0..4 {
                    let closed = v.low_estimate(i, &s, &space).unwrap();
                    let brute = crate::oracle::enumerate_low(v.as_ref(), &space, i, &s);
                    assert!((closed - brute).abs() < 1e-12, "{tag} i={i} s={:?}", s.0);
                }
            }
        }
    }

    #[test]
    fn table_lookup_follows_odometer_order() {
        let space = SignalSpace::new(vec![vec![0.0, 1.0], vec![0.0, 1.0, 2.0]]).unwrap();
        let values: Vec<f64> = (0..6).map(|k| k as f64).collect();
        let v = family_valuation(ValuationFamily::Table { values }, &space).unwrap();
        for (k, s) in space.profiles().enumerate() {
            assert_eq!(v.value(&s), k as f64);
        }
    }

    #[test]
    fn rejects_malformed_descriptors() {
        let s4 = SignalSpace::binary(4);
        assert!(family_valuation(ValuationFamily::Additive { weights: vec![1.0; 3] }, &s4).is_err());
        assert!(family_valuation(
            ValuationFamily::ConcaveOfSum {
                weights: vec![1.0; 4],
                exponent: 1.5
            },
            &s4
        )
        .is_err());
        assert!(family_valuation(ValuationFamily::Example32 { bidder: 0 }, &SignalSpace::binary(5)).is_err());
        assert!(family_valuation(
            ValuationFamily::Cut {
                edges: vec![(0, 0, 1.0)],
                offset: 0.0
            },
            &s4
        )
        .is_err());
        assert!(family_valuation(ValuationFamily::Table { values: vec![1.0; 15] }, &s4).is_err());
    }

    #[test]
    fn build_attaches_exact_report() {
        let space = Arc::new(SignalSpace::binary(3));
        let o = build_valuation(
            ValuationFamily::Additive {
                weights: vec![1.0, 1.0, 1.0],
            },
            space.clone(),
        )
        .unwrap();
        assert_eq!(o.reported_d(), Some(1));
        let cut = build_valuation(
            ValuationFamily::Cut {
                edges: vec![(0, 1, 1.0), (1, 2, 1.0)],
                offset: 0.0,
            },
            space,
        )
        .unwrap();
        assert!(cut.reported_d().unwrap() <= 2);
    }
}
