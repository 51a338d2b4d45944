mod common;

use proptest::prelude::*;
use pvsignal::disproportionality::*;

use common::*;

#[test]
fn random_corpora_match_per_report_scan() {
    let mut rng = rng(2024);
    for _ in 0..20 {
        assert_eq!(disproportionality_mismatch(&mut rng, 500, 20), None);
    }
}

#[test]
fn hand_computed_values() {
    let t = ContingencyCounts::new(10, 90, 20, 880);
    assert!((prr::<f64>(&t).unwrap() - 0.1 / (20.0 / 900.0)).abs() < 1e-12);
    assert!((ror::<f64>(&t).unwrap() - (10.0 * 880.0) / (90.0 * 20.0)).abs() < 1e-12);
    assert_eq!(ror::<f64>(&ContingencyCounts::new(3, 0, 2, 5)), Err(UndefinedMetric::BZero));
    assert_eq!(ror::<f64>(&ContingencyCounts::new(3, 1, 0, 5)), Err(UndefinedMetric::CZero));
    assert_eq!(ror::<f64>(&ContingencyCounts::new(3, 1, 2, 0)), Err(UndefinedMetric::DZero));
    assert_eq!(prr::<f64>(&ContingencyCounts::new(0, 0, 2, 5)), Err(UndefinedMetric::DrugMarginZero));
    assert_eq!(prr::<f64>(&ContingencyCounts::new(1, 1, 0, 0)), Err(UndefinedMetric::OtherDrugsMarginZero));
    // Haldane makes every table finite.
    let h: f64 = ror_with(&ContingencyCounts::new(3, 0, 0, 0), Correction::Haldane).unwrap();
    assert!((h - 3.5 * 0.5 / (0.5 * 0.5)).abs() < 1e-12);
}

proptest! {
    #[test]
    fn ror_undefined_exactly_when_b_c_or_d_is_zero(a in 0u64..5, b in 0u64..5, c in 0u64..5, d in 0u64..5) {
        let t = ContingencyCounts::new(a, b, c, d);
        prop_assert_eq!(ror::<f64>(&t).is_err(), b == 0 || c == 0 || d == 0);
        prop_assert_eq!(ror::<f64>(&t).ok(), ror_oracle(a, b, c, d));
        prop_assert_eq!(prr::<f64>(&t).ok(), prr_oracle(a, b, c, d));
        let h: f64 = ror_with(&t, Correction::Haldane).unwrap();
        prop_assert!(h.is_finite() && h > 0.0);
    }

    #[test]
    fn f32_agrees_with_f64(a in 1u64..1000, b in 1u64..1000, c in 1u64..1000, d in 1u64..100_000) {
        let t = ContingencyCounts::new(a, b, c, d);
        let (p64, p32) = (prr::<f64>(&t).unwrap(), prr::<f32>(&t).unwrap() as f64);
        prop_assert!((p64 - p32).abs() <= 1e-5 * p64);
    }
}
