//! Random valuation families for test corpora.

use alloc::vec::Vec;

use rand::Rng;

use crate::valuations::ValuationFamily;

/// Random weighted coverage function over `n` binary signals: monotone and
/// submodular, hence monotone SOS.
pub fn coverage<R: Rng + ?Sized>(rng: &mut R, n: usize, elements: usize) -> ValuationFamily {
    let elements = elements.max(1);
    let element_weights = (0..elements).map(|_| rng.random_range(0.05..1.0)).collect();
    let covers = (0..n)
        .map(|_| {
            let mut set: Vec<usize> = (0..elements).filter(|_| rng.random_bool(0.35)).collect();
            if set.is_empty() {
                set.push(rng.random_range(0..elements));
            }
            set
        })
        .collect();
    ValuationFamily::Coverage {
        covers,
        element_weights,
    }
}

/// Random cut function plus a positive offset: SOS but not monotone.
pub fn cut<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ValuationFamily {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.random_bool(0.5) {
                edges.push((a, b, rng.random_range(0.1..1.0)));
            }
        }
    }
    if edges.is_empty() && n >= 2 {
        edges.push((0, 1, 1.0));
    }
    ValuationFamily::Cut {
        edges,
        offset: rng.random_range(0.0..0.5),
    }
}

pub fn additive<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ValuationFamily {
    ValuationFamily::Additive {
        weights: (0..n).map(|_| rng.random_range(0.0..2.0)).collect(),
    }
}

pub fn concave_of_sum<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ValuationFamily {
    ValuationFamily::ConcaveOfSum {
        weights: (0..n).map(|_| rng.random_range(0.0..2.0)).collect(),
        exponent: rng.random_range(0.2..=1.0),
    }
}

pub fn max<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ValuationFamily {
    ValuationFamily::Max {
        weights: (0..n).map(|_| rng.random_range(0.1..2.0)).collect(),
    }
}

/// Additive valuation over `d` random signals.
pub fn bounded_dependency<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> ValuationFamily {
    let mut pool: Vec<usize> = (0..n).collect();
    let d = d.min(n);
    for k in 0..d {
        let pick = rng.random_range(k..n);
        pool.swap(k, pick);
    }
    pool.truncate(d);
    ValuationFamily::BoundedDependency {
        weights: (0..d).map(|_| rng.random_range(0.1..2.0)).collect(),
        dependencies: pool,
    }
}
