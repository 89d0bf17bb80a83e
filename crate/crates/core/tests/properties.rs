use ndarray::Array2;
use proptest::prelude::*;

use mibench::benchmarks::DiscreteJoint;
use mibench::estimators::bounds::{dv_value, infonce, nwj};
use mibench::estimators::{Estimator, EstimatorConfig, EstimatorKind};
use mibench::quantization::discrete_entropy;

fn joint_table(nx: usize, ny: usize) -> impl Strategy<Value = DiscreteJoint> {
    prop::collection::vec(0.01f64..1.0, nx * ny).prop_map(move |w| {
        let total: f64 = w.iter().sum();
        let mut table = Array2::from_shape_vec((nx, ny), w.iter().map(|v| v / total).collect()).unwrap();
        // renormalize once more so the sum check holds to the last ulp
        let s = table.sum();
        table.mapv_inplace(|v| v / s);
        DiscreteJoint::new(table)
    })
}

fn scores(b: usize, k: usize) -> impl Strategy<Value = (Vec<f64>, Array2<f64>)> {
    (
        prop::collection::vec(-10.0f64..10.0, b),
        prop::collection::vec(-10.0f64..10.0, b * k),
    )
        .prop_map(move |(j, n)| (j, Array2::from_shape_vec((b, k), n).unwrap()))
}

proptest! {
    #[test]
    fn kl_is_nonnegative(p in joint_table(3, 4), q in joint_table(3, 4)) {
        prop_assert!(p.kl(&q) >= -1e-12);
        prop_assert!(p.kl(&p).abs() < 1e-12);
    }

    #[test]
    fn merging_codes_never_adds_information(p in joint_table(6, 3), n_codes in 1usize..6) {
        let codes: Vec<usize> = (0..6).map(|x| x % n_codes).collect();
        let merged = p.merge_x(&codes).mutual_information();
        prop_assert!(merged <= p.mutual_information() + 1e-12);
        prop_assert!(merged >= -1e-12);
    }

    #[test]
    fn code_proposal_splits_the_information(p in joint_table(6, 3), n_codes in 1usize..6) {
        let codes: Vec<usize> = (0..6).map(|x| x % n_codes).collect();
        let r = p.code_conditioned(&codes);
        let split = p.merge_x(&codes).mutual_information() + p.kl(&r);
        prop_assert!((split - p.mutual_information()).abs() < 1e-10);
    }

    #[test]
    fn infonce_is_capped_by_log_of_candidates((joint, neg) in scores(6, 5)) {
        prop_assert!(infonce(&joint, neg.view()).value <= 6f64.ln() + 1e-12);
    }

    #[test]
    fn nwj_never_exceeds_dv((joint, neg) in scores(5, 4)) {
        let (dv, _) = dv_value(&joint, neg.view());
        prop_assert!(nwj(&joint, neg.view(), false).value <= dv + 1e-9);
    }

    #[test]
    fn shift_invariant_kinds_ignore_constants((joint, neg) in scores(4, 4), c in -5.0f64..5.0) {
        // SMILE clips the negatives, which breaks exact invariance away from zero
        for kind in [EstimatorKind::Mine, EstimatorKind::Infonce] {
            let est = Estimator::new(EstimatorConfig::new(kind));
            let shifted: Vec<f64> = joint.iter().map(|v| v + c).collect();
            let a = est.value(&joint, neg.view());
            let b = est.value(&shifted, neg.mapv(|v| v + c).view());
            prop_assert!((a - b).abs() < 1e-9, "{kind}: {a} vs {b}");
        }
    }

    #[test]
    fn constant_critic_has_no_discriminative_part(c in -3.0f64..3.0, b in 2usize..8, k in 1usize..8) {
        for kind in EstimatorKind::ALL {
            let c = if kind.shift_invariant() { c } else { 0.0 };
            let joint = vec![c; b];
            let neg = Array2::from_elem((b, k), c);
            let value = Estimator::new(EstimatorConfig::new(kind)).value(&joint, neg.view());
            prop_assert!(value.abs() < 1e-12, "{kind}: {value}");
        }
    }

    #[test]
    fn plug_in_entropy_is_bounded(counts in prop::collection::vec(0u64..50, 1..12)) {
        prop_assume!(counts.iter().any(|&c| c > 0));
        let h = discrete_entropy(&counts);
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (counts.len() as f64).ln() + 1e-12);
    }
}
