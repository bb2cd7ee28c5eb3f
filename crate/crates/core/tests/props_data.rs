mod common;

use covsel::data::{suff_stats, Dataset};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn scatter_is_additive(d in 1usize..6, n1 in 0usize..30, n2 in 0usize..30, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let a = common::random_dataset(n1, d, &mut rng);
        let b = common::random_dataset(n2, d, &mut rng);
        let joint = suff_stats(&a.concat(&b).unwrap());
        let sum = suff_stats(&a).s.add(&suff_stats(&b).s).unwrap();
        for i in 0..d {
            for j in 0..d {
                prop_assert!((joint.s.get(i, j) - sum.get(i, j)).abs() < 1e-10);
            }
        }
        prop_assert_eq!(joint.n, n1 + n2);
    }

    #[test]
    fn scatter_is_psd(d in 1usize..6, n in 0usize..20, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let stats = suff_stats(&common::random_dataset(n, d, &mut rng));
        let jitter = stats.s.as_matrix() + DMatrix::identity(d, d) * 1e-12;
        prop_assert!(covsel::specialfn::SymMatrix::new(jitter).unwrap().cholesky().is_ok());
    }

    #[test]
    fn row_order_does_not_matter(d in 1usize..6, n in 0usize..40, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let data = common::random_dataset(n, d, &mut rng);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let shuffled = Dataset::new(DMatrix::from_fn(n, d, |i, j| data.values()[(order[i], j)])).unwrap();
        prop_assert_eq!(suff_stats(&data), suff_stats(&shuffled));
    }
}
