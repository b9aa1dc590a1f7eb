use proptest::prelude::*;
use rcf::format::InstanceFile;
use rcf_core::ValuationFamily;

proptest! {
    #[test]
    fn instance_json_round_trips_exactly(
        weights in prop::collection::vec(0.0f64..1e6, 3),
        profile in prop::collection::vec(prop::sample::select(vec![0.0, 0.5, 1.0]), 3),
        m in 1usize..=2,
    ) {
        let file = InstanceFile::new(
            vec![vec![0.0, 0.5, 1.0]; 3],
            (0..3).map(|_| ValuationFamily::Additive { weights: weights.clone() }).collect(),
            profile,
            m,
            Some(1),
        );
        let back = InstanceFile::from_json(&file.to_json()).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert!(back.build().is_ok());
    }
}
