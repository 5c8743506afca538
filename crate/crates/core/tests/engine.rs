use proptest::prelude::*;
use pseudopost_core::math::neumaier_sum;
use pseudopost_core::simulators::ToyModel;
use pseudopost_core::{
    effective_sample_size, expectation, run_calibration, self_normalize, CalibrationConfig, ParameterPoint,
    SurrogateFit, WeightedParticleSet,
};

proptest! {
    #[test]
    fn normalized_weights_sum_to_one(logs in prop::collection::vec(-2000.0f64..50.0, 1..300)) {
        let w = self_normalize(&logs).unwrap();
        prop_assert!((neumaier_sum(w.iter().copied()) - 1.0).abs() <= 1e-12);
        prop_assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn normalization_is_shift_invariant(logs in prop::collection::vec(-50.0f64..50.0, 1..100), c in -500.0f64..500.0) {
        let a = self_normalize(&logs).unwrap();
        let shifted: Vec<f64> = logs.iter().map(|l| l + c).collect();
        let b = self_normalize(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn normalization_preserves_order(logs in prop::collection::vec(-50.0f64..50.0, 2..100)) {
        let w = self_normalize(&logs).unwrap();
        for i in 1..logs.len() {
            if logs[i] > logs[i - 1] {
                prop_assert!(w[i] >= w[i - 1]);
            }
        }
    }

    #[test]
    fn ess_is_between_one_and_n(residuals in prop::collection::vec(-10.0f64..10.0, 1..200), tau in 0.01f64..10.0) {
        let n = residuals.len();
        let draws = residuals.into_iter().map(|r| (ParameterPoint::new(vec![r]).unwrap(), r)).collect();
        let ps = WeightedParticleSet::from_residuals(draws, CalibrationConfig::new(n, 1, tau, 0).unwrap()).unwrap();
        let ess = effective_sample_size(&ps);
        prop_assert!((1.0..=n as f64).contains(&ess));
        let c = expectation(&ps, |_| 2.5).unwrap();
        prop_assert!((c - 2.5).abs() < 1e-12);
    }
}

#[test]
fn output_is_independent_of_thread_count() {
    let fit = SurrogateFit::from_coefficients(vec![-1.2, 3.1]).unwrap();
    let cfg = CalibrationConfig::new(3000, 20, 0.3, 99).unwrap();
    let one = run_calibration(&ToyModel::default(), &fit, &cfg.clone().with_max_parallel(1)).unwrap();
    let eight = run_calibration(&ToyModel::default(), &fit, &cfg.with_max_parallel(8)).unwrap();
    assert_eq!(one.particles, eight.particles);
    for (a, b) in one.particles.iter().zip(&eight.particles) {
        assert_eq!(a.weight.to_bits(), b.weight.to_bits());
        assert_eq!(a.batch_residual.to_bits(), b.batch_residual.to_bits());
    }
}

#[test]
fn different_seeds_give_different_draws() {
    let fit = SurrogateFit::from_coefficients(vec![0.0, 1.0]).unwrap();
    let a = run_calibration(&ToyModel::default(), &fit, &CalibrationConfig::new(10, 5, 1.0, 1).unwrap()).unwrap();
    let b = run_calibration(&ToyModel::default(), &fit, &CalibrationConfig::new(10, 5, 1.0, 2).unwrap()).unwrap();
    assert_ne!(a.particles[0].theta, b.particles[0].theta);
}
