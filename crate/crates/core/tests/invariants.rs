use proptest::prelude::*;
use rcf_core::instance::{lex_greater, Priority, Reports};
use rcf_core::multi_unit::{birkhoff_decompose, marginals_to_matrix, multi_expected_candidates, AllocationMatrix};
use rcf_core::numeric::{cross_probability, log_dagger, log_dagger_subadditive, round_down};
use rcf_core::single_item::{
    myerson_payment, prcf_allocation, prcf_payment, Integration, PrcfRule, ScalarRule,
};

fn reports_strategy(max_n: usize) -> impl Strategy<Value = Reports> {
    (2..=max_n).prop_flat_map(|n| {
        (
            proptest::collection::vec(prop_oneof![Just(0.0), 0.01f64..100.0], n),
            proptest::collection::vec(proptest::collection::vec(prop_oneof![Just(0.0), 0.01f64..100.0], n), n),
        )
            .prop_map(|(v, l)| Reports::new(v, l).unwrap())
    })
}

proptest! {
    #[test]
    fn log_dagger_in_unit_interval(a in 0.0f64..1e6) {
        let l = log_dagger(a).unwrap();
        prop_assert!((0.0..=1.0).contains(&l));
    }

    #[test]
    fn log_dagger_is_subadditive(a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
        prop_assert!(log_dagger_subadditive(a, b).unwrap());
    }

    #[test]
    fn rounding_brackets_value(r in 0.0f64..1.0, w in 1e-6f64..1e9) {
        let d = round_down(r, w).unwrap();
        let f = d.value();
        prop_assert!(f <= w * (1.0 + 1e-12));
        prop_assert!(w < 2.0 * f * (1.0 + 1e-12));
    }

    #[test]
    fn rounding_is_monotone(r in 0.0f64..1.0, a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(round_down(r, lo).unwrap() <= round_down(r, hi).unwrap());
    }

    #[test]
    fn crossing_probability_matches_offset_grid(a in 0.01f64..50.0, b in 0.01f64..50.0) {
        let steps = 4000;
        let hits = (0..steps)
            .filter(|s| {
                let r = (*s as f64 + 0.5) / steps as f64;
                let ka = (a.log2() - r).floor();
                let kb = (b.log2() - r).floor();
                ka > kb
            })
            .count();
        let p = cross_probability(a, b).unwrap();
        prop_assert!((hits as f64 / steps as f64 - p).abs() <= 1.0 / steps as f64 + 1e-9);
    }

    #[test]
    fn lex_order_is_total_and_antisymmetric(a in 0u8..4, b in 0u8..4, seed in 0u64..1000) {
        let pi = rcf_core::draw_seed(seed, 0, 3).priority;
        let ab = lex_greater(a, 0, b, 2, &pi);
        let ba = lex_greater(b, 2, a, 0, &pi);
        prop_assert!(ab ^ ba);
    }

    #[test]
    fn prcf_allocation_is_monotone_and_ir(r in reports_strategy(5), i in 0usize..5, scale in 1.0f64..3.0) {
        let i = i % r.n();
        let rule = PrcfRule::new(&r, i, 4.0).unwrap();
        let v = r.value(i);
        let w = v * scale + 0.01;
        prop_assert!(rule.allocation(v) <= rule.allocation(w) + 1e-15);
        prop_assert!(rule.payment(v) <= rule.allocation(v) * v + 1e-12);
        prop_assert!(rule.payment(v) >= -1e-15);
    }

    #[test]
    fn payment_closed_form_matches_integration(r in reports_strategy(5)) {
        let etas = vec![4.0; r.n()];
        let p = prcf_payment(&r, &etas).unwrap();
        for i in 0..r.n() {
            let rule = PrcfRule::new(&r, i, 4.0).unwrap();
            let q = myerson_payment(&rule, r.value(i), Integration::PiecewiseExact).unwrap();
            prop_assert!((p[i] - q).abs() <= 1e-9 * (1.0 + p[i].abs()), "{} vs {}", p[i], q);
        }
    }

    #[test]
    fn multi_unit_reduces_to_closed_form(r in reports_strategy(6)) {
        let exact = multi_expected_candidates(&r, 1).unwrap();
        let closed = prcf_allocation(&r, &vec![1.0; r.n()]).unwrap();
        for (a, b) in exact.iter().zip(&closed) {
            prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn multi_unit_probability_grows_with_items(r in reports_strategy(6)) {
        let n = r.n();
        for m in 1..n.saturating_sub(1) {
            let a = multi_expected_candidates(&r, m).unwrap();
            let b = multi_expected_candidates(&r, m + 1).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(x <= &(y + 1e-12));
            }
        }
    }

    #[test]
    fn water_filling_preserves_rows(raw in proptest::collection::vec(0.0f64..1.0, 1..12), m in 1usize..4) {
        let total: f64 = raw.iter().sum();
        let scale = if total > m as f64 { m as f64 / total } else { 1.0 };
        let x: Vec<f64> = raw.iter().map(|v| v * scale).collect();
        let a = marginals_to_matrix(&x, m).unwrap();
        for (row, xi) in a.row_sums().iter().zip(&x) {
            prop_assert!((row - xi).abs() < 1e-12);
        }
        for c in a.column_sums() {
            prop_assert!(c <= 1.0 + 1e-9);
        }
        for row in a.rows() {
            prop_assert!(row.iter().filter(|w| **w > 0.0).count() <= 2);
        }
    }

    #[test]
    fn birkhoff_reconstructs(rows in 1usize..6, cols in 1usize..5, raw in proptest::collection::vec(0.0f64..1.0, 30), sparsity in 0.0f64..0.6) {
        let mut m: Vec<Vec<f64>> = (0..rows)
            .map(|i| (0..cols).map(|j| { let w = raw[i * cols + j]; if w < sparsity { 0.0 } else { w } }).collect())
            .collect();
        let row_max = m.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max);
        let col_max = (0..cols).map(|j| m.iter().map(|r| r[j]).sum::<f64>()).fold(0.0, f64::max);
        let s = row_max.max(col_max);
        if s > 0.0 {
            let shrink = 1.0 / s * raw[29].max(0.5);
            for w in m.iter_mut().flatten() {
                *w *= shrink;
            }
        }
        let a = AllocationMatrix::new(m, cols).unwrap();
        let d = birkhoff_decompose(&a).unwrap();
        prop_assert!(d.is_valid());
        prop_assert!((d.coefficient_sum() - 1.0).abs() < 1e-12);
        prop_assert!(d.max_error(&a) <= 1e-9);
        let nonzero = a.rows().iter().flatten().filter(|w| **w > 0.0).count();
        prop_assert!(d.terms.len() <= nonzero + rows + cols + 1);
    }
}

#[test]
fn identity_priority_ranks() {
    let pi = Priority::identity(3);
    assert!(lex_greater(1.0, 2, 1.0, 1, &pi));
    assert!(!lex_greater(1.0, 0, 1.0, 1, &pi));
}
