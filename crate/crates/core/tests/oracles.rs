//! Independent reference computations for the closed forms.

use std::f64::consts::LN_2;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcf_core::generate;
use rcf_core::instance::{Priority, Reports};
use rcf_core::multi_unit::{enumerate_priorities, marginals_to_matrix, multi_expected_candidates};
use rcf_core::numeric::expected_rounded_value;
use rcf_core::oracle::Valuation;
use rcf_core::properties::{check_sos, DEFAULT_ENUMERATION_CAP};
use rcf_core::single_item::{
    expected_candidates_fixed_priority, personalized_etas, prcf_allocation, prcf_payment, thresholds,
};
use rcf_core::valuations::family_valuation;
use rcf_core::{SignalSpace, ValuationFamily};

/// `(exponent, value)` of `f_r(w)`, with `None` for zero.
fn naive_round(r: f64, w: f64) -> Option<i64> {
    (w > 0.0).then(|| (w.log2() - r).floor() as i64)
}

fn naive_candidate_counts(reports: &Reports, need: usize, rng: &mut ChaCha8Rng, draws: u64) -> Vec<u64> {
    let n = reports.n();
    let mut counts = vec![0u64; n];
    let mut ranks: Vec<usize> = (0..n).collect();
    for _ in 0..draws {
        let r: f64 = rng.random();
        ranks.shuffle(rng);
        for i in 0..n {
            let mine = naive_round(r, reports.value(i));
            let wins = (0..n)
                .filter(|&j| j != i)
                .filter(|&j| {
                    let theirs = naive_round(r, reports.low(i, j));
                    mine > theirs || (mine == theirs && ranks[i] > ranks[j])
                })
                .count();
            if wins >= need {
                counts[i] += 1;
            }
        }
    }
    counts
}

fn random_reports(rng: &mut ChaCha8Rng, n: usize) -> Reports {
    let draw = |rng: &mut ChaCha8Rng| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.1..10.0) };
    let values = (0..n).map(|_| draw(rng)).collect();
    let lows = (0..n).map(|_| (0..n).map(|_| draw(rng)).collect()).collect();
    Reports::new(values, lows).unwrap()
}

#[test]
fn prcf_matches_naive_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 40_000u64;
    for _ in 0..8 {
        let n = rng.random_range(2..6);
        let r = random_reports(&mut rng, n);
        let exact = prcf_allocation(&r, &vec![1.0; n]).unwrap();
        let counts = naive_candidate_counts(&r, n - 1, &mut rng, draws);
        for (p, c) in exact.iter().zip(&counts) {
            let hat = *c as f64 / draws as f64;
            let se = (p * (1.0 - p) / draws as f64).sqrt().max(1.0 / draws as f64);
            assert!((hat - p).abs() <= 5.0 * se, "{hat} vs {p}");
        }
    }
}

#[test]
fn multi_unit_matches_naive_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let draws = 40_000u64;
    for _ in 0..6 {
        let n = rng.random_range(3..7);
        let m = rng.random_range(1..n);
        let r = random_reports(&mut rng, n);
        let exact = multi_expected_candidates(&r, m).unwrap();
        let counts = naive_candidate_counts(&r, n - m, &mut rng, draws);
        for (p, c) in exact.iter().zip(&counts) {
            let hat = *c as f64 / draws as f64;
            let se = (p * (1.0 - p) / draws as f64).sqrt().max(1.0 / draws as f64);
            assert!((hat - p).abs() <= 5.0 * se, "m={m}: {hat} vs {p}");
        }
    }
}

#[test]
fn fixed_priority_matches_offset_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..5 {
        let n = rng.random_range(2..6);
        let r = random_reports(&mut rng, n);
        let mut ranks: Vec<usize> = (0..n).collect();
        ranks.shuffle(&mut rng);
        let pi = Priority::from_ranks(ranks.clone()).unwrap();
        let exact = expected_candidates_fixed_priority(&r, n - 1, &pi);
        let steps = 20_000;
        for i in 0..n {
            let hits = (0..steps)
                .filter(|s| {
                    let off = (*s as f64 + 0.5) / steps as f64;
                    let mine = naive_round(off, r.value(i));
                    (0..n).filter(|&j| j != i).all(|j| {
                        let theirs = naive_round(off, r.low(i, j));
                        mine > theirs || (mine == theirs && ranks[i] > ranks[j])
                    })
                })
                .count();
            // each of at most n breakpoints costs at most one grid cell
            assert!((hits as f64 / steps as f64 - exact[i]).abs() <= (n as f64 + 1.0) / steps as f64);
        }
    }
}

#[test]
fn expected_rounding_by_quadrature() {
    for &v in &[0.3f64, 1.0, 5.0, 1234.5] {
        let steps = 200_000;
        let mean: f64 = (0..steps)
            .map(|s| {
                let r = (s as f64 + 0.5) / steps as f64;
                2f64.powf(r + (v.log2() - r).floor())
            })
            .sum::<f64>()
            / steps as f64;
        let closed = expected_rounded_value(v).unwrap();
        assert!((mean - closed).abs() < 1e-4 * v);
        assert!((closed - v / (2.0 * LN_2)).abs() < 1e-12 * v);
    }
}

fn brute_force_sos(v: &dyn Valuation, space: &SignalSpace) -> bool {
    let profiles: Vec<Vec<f64>> = space.profiles().map(|p| p.to_vec()).collect();
    let n = space.n();
    for s in &profiles {
        for t in &profiles {
            if !s.iter().zip(t).all(|(a, b)| a >= b) {
                continue;
            }
            for i in 0..n {
                let mut s_ti = s.clone();
                s_ti[i] = t[i];
                let mut t_si = t.clone();
                t_si[i] = s[i];
                let high = v.value(s) - v.value(&s_ti);
                let low = v.value(&t_si) - v.value(t);
                if high > low + 1e-9 {
                    return false;
                }
            }
        }
    }
    true
}

#[test]
fn sos_checker_agrees_with_all_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let space = Arc::new(SignalSpace::uniform(3, &[0.0, 1.0, 2.0]).unwrap());
    let mut families = vec![];
    for _ in 0..4 {
        families.push(generate::coverage(&mut rng, 3, 4));
        families.push(generate::cut(&mut rng, 3));
        families.push(generate::concave_of_sum(&mut rng, 3));
        families.push(generate::max(&mut rng, 3));
    }
    // random tables: mostly not SOS
    for _ in 0..12 {
        let values = (0..27).map(|_| rng.random_range(0.0..5.0)).collect();
        families.push(ValuationFamily::Table { values });
    }
    // convex in the sum: not SOS
    families.push(ValuationFamily::Table {
        values: space.profiles().map(|p| p.iter().sum::<f64>().powi(2)).collect(),
    });
    let mut disagreements = 0;
    let mut positives = 0;
    for f in families {
        let v = family_valuation(f, &space).unwrap();
        let fast = check_sos(v.as_ref(), &space, DEFAULT_ENUMERATION_CAP).unwrap();
        let slow = brute_force_sos(v.as_ref(), &space);
        positives += slow as usize;
        disagreements += (fast != slow) as usize;
    }
    assert_eq!(disagreements, 0);
    assert!(positives >= 8);
}

#[test]
fn hand_evaluated_examples() {
    // n = 2: v1 = 4 faces low 1, eta = 4
    let worked = Reports::new(vec![4.0, 1.0], vec![vec![0.0, 1.0], vec![4.0, 0.0]]).unwrap();
    let x = prcf_allocation(&worked, &[4.0, 4.0]).unwrap();
    let p = prcf_payment(&worked, &[4.0, 4.0]).unwrap();
    assert!((x[0] - 0.25).abs() < 1e-15);
    assert!((p[0] - 1.5 / (8.0 * LN_2)).abs() < 1e-15);
    assert_eq!(multi_expected_candidates(&worked, 1).unwrap()[0], 1.0);

    // ladder for rival lows (8, 2, 1), n = 4
    let ladder = Reports::new(
        vec![1.0; 4],
        vec![vec![0.0, 8.0, 2.0, 1.0], vec![1.0; 4], vec![1.0; 4], vec![1.0; 4]],
    )
    .unwrap();
    assert_eq!(thresholds(&ladder, 0).unwrap().thresholds, vec![8.0, 4.0, 4.0, 4.0]);

    assert_eq!(personalized_etas(&[3, 1, 1]), vec![8.0, 16.0, 16.0]);
    assert_eq!(personalized_etas(&[0, 5]), vec![24.0, 4.0]);

    let a = marginals_to_matrix(&[0.8, 0.8, 0.4], 2).unwrap();
    let want = [[0.8, 0.0], [0.2, 0.6], [0.0, 0.4]];
    for (row, w) in a.rows().iter().zip(&want) {
        assert!((row[0] - w[0]).abs() < 1e-15 && (row[1] - w[1]).abs() < 1e-15);
    }
}

#[test]
fn clamp_formula_matches_permutation_enumeration() {
    // lows equal to rivals' values: bidder 3 never beats 4 and faces 3 at
    // distance log2(3) > 1, so its chance is zero for every r and pi
    let v = [4.0, 3.0, 1.0];
    let lows = (0..3).map(|i| (0..3).map(|j| if i == j { 0.0 } else { v[j] }).collect()).collect();
    let r = Reports::new(v.to_vec(), lows).unwrap();
    let exact = multi_expected_candidates(&r, 2).unwrap();
    assert_eq!(exact[2], 0.0);
    let steps = 1000;
    let mut avg = [0.0; 3];
    for s in 0..steps {
        let e = enumerate_priorities(&r, 2, (s as f64 + 0.5) / steps as f64).unwrap();
        for k in 0..3 {
            avg[k] += e[k] / steps as f64;
        }
    }
    for k in 0..3 {
        assert!((avg[k] - exact[k]).abs() < 5e-3, "{k}: {} vs {}", avg[k], exact[k]);
    }
}
