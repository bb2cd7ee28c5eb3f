mod common;

use covsel::specialfn::{
    amgm_half_log_ratio, amgm_half_log_ratio_vec, chol_log_det, hadamard_half_log_ratio, ln_gamma, log_mv_gamma, SymMatrix,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn one_dimensional_mv_gamma_is_log_gamma(a in 0.5f64..50.0) {
        prop_assert!((log_mv_gamma(1, a).unwrap() - ln_gamma(a)).abs() <= 1e-12 * (1.0 + ln_gamma(a).abs()));
    }

    #[test]
    fn mv_gamma_recurrence(d in 1usize..8, a in 4.0f64..60.0) {
        let step = log_mv_gamma(d, a + 1.0).unwrap() - log_mv_gamma(d, a).unwrap();
        let expected: f64 = (1..=d).map(|j| (a + (1.0 - j as f64) / 2.0).ln()).sum();
        prop_assert!((step - expected).abs() < 1e-10, "{} vs {}", step, expected);
    }

    #[test]
    fn ratios_are_nonnegative(d in 1usize..7, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let v = common::random_pd(d, &mut rng);
        prop_assert!(hadamard_half_log_ratio(&v).unwrap() >= -1e-12);
        prop_assert!(amgm_half_log_ratio(&v).unwrap() >= -1e-12);
        prop_assert!(amgm_half_log_ratio_vec(&v.diagonal()).unwrap() >= -1e-12);
    }

    #[test]
    fn ratios_vanish_on_diagonal_and_scalar(d in 1usize..7, seed in any::<u64>(), c in 0.01f64..100.0) {
        let mut rng = common::rng(seed);
        let diag: Vec<f64> = (0..d).map(|_| rand::Rng::random_range(&mut rng, 0.01..100.0)).collect();
        prop_assert!(hadamard_half_log_ratio(&SymMatrix::from_diagonal(&diag)).unwrap().abs() <= 1e-12);
        prop_assert!(amgm_half_log_ratio(&SymMatrix::scaled_identity(d, c)).unwrap().abs() <= 1e-12);
        prop_assert!(amgm_half_log_ratio_vec(&vec![c; d]).unwrap().abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn cholesky_log_det_matches_eigenvalues(d in 1usize..=6, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let s = common::random_pd(d, &mut rng);
        let eig = nalgebra::SymmetricEigen::new(s.as_matrix().clone());
        let from_eig: f64 = eig.eigenvalues.iter().map(|l| l.ln()).sum();
        prop_assert!((chol_log_det(&s).unwrap() - from_eig).abs() < 1e-8);
    }
}
