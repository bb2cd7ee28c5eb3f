mod common;

use covsel::priors::{
    conjugate_update, kl_objective, log_prior_density, marginal_second_moment, match_down, match_to, prior_sample_size,
    sample_half_precision, Hyper,
};
use covsel::rng::stream;
use covsel::specialfn::SymMatrix;
use covsel::structures::{log_evidence, log_likelihood, Structure};
use proptest::prelude::*;
use rand::Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn same_hyper(a: &Hyper, b: &Hyper) -> bool {
    match (a, b) {
        (Hyper::Wishart { alpha: x, rate: r }, Hyper::Wishart { alpha: y, rate: q }) => {
            close(*x, *y, 1e-12)
                && (0..r.dim()).all(|i| (0..r.dim()).all(|j| close(r.get(i, j), q.get(i, j), 1e-12)))
        }
        (Hyper::GammaVec { alpha: x, rates: r }, Hyper::GammaVec { alpha: y, rates: q }) => {
            close(*x, *y, 1e-12) && r.iter().zip(q).all(|(u, v)| close(*u, *v, 1e-12))
        }
        (Hyper::Gamma { alpha: x, rate: r }, Hyper::Gamma { alpha: y, rate: q }) => close(*x, *y, 1e-12) && close(*r, *q, 1e-12),
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn conjugate_update_is_bayes_rule(s in common::structure(), d in 1usize..5, n in 0usize..30, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let h = common::random_hyper(s, d, &mut rng);
        let stats = common::random_stats(n, d, &mut rng);
        let theta = common::random_theta(s, d, &mut rng);
        let post = conjugate_update(&h, &stats).unwrap();
        let lhs = log_prior_density(&post, &theta).unwrap() - log_prior_density(&h, &theta).unwrap();
        let rhs = log_likelihood(&theta, &stats).unwrap() - log_evidence(&h, &stats).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-8, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn up_then_down_is_identity(d in 1usize..6, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        for s in [Structure::D, Structure::C] {
            let h = common::regular_hyper(s, d, &mut rng);
            for up in Structure::ALL.into_iter().filter(|t| *t > s) {
                let back = match_to(&match_to(&h, up, d).unwrap(), s, d).unwrap();
                prop_assert!(same_hyper(&back, &h), "{:?} -> {} -> {:?}", h, up, back);
            }
        }
    }

    #[test]
    fn down_then_up_is_identity_on_the_image(d in 1usize..6, alpha in 3.0f64..8.0, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let diag: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..4.0)).collect();
        let a = Hyper::wishart(alpha, SymMatrix::from_diagonal(&diag)).unwrap();
        prop_assert!(same_hyper(&match_to(&match_down(&a, Structure::D).unwrap(), Structure::A, d).unwrap(), &a));
        let beta = diag[0];
        let iso = Hyper::wishart(alpha, SymMatrix::scaled_identity(d, beta)).unwrap();
        prop_assert!(same_hyper(&match_to(&match_down(&iso, Structure::C).unwrap(), Structure::A, d).unwrap(), &iso));
        let dv = Hyper::gamma_vec(alpha, vec![beta; d]).unwrap();
        prop_assert!(same_hyper(&match_to(&match_down(&dv, Structure::C).unwrap(), Structure::D, d).unwrap(), &dv));
    }

    #[test]
    fn matching_keeps_prior_sample_size(s in common::structure(), d in 1usize..6, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        // Irregular priors can map to a nonpositive shape, which is rejected.
        let h = common::regular_hyper(s, d, &mut rng);
        let m = prior_sample_size(&h, d).m;
        for t in Structure::ALL {
            prop_assert!(close(prior_sample_size(&match_to(&h, t, d).unwrap(), d).m, m, 1e-12));
        }
    }
}

#[test]
fn matched_nested_prior_minimizes_the_objective() {
    let d = 3;
    let full = Hyper::gamma_vec(3.0, vec![0.5, 1.5, 1.0]).unwrap();
    let Hyper::Gamma { alpha, rate } = match_down(&full, Structure::C).unwrap() else { unreachable!() };
    let w = (2.0 * alpha - 2.0) / d as f64;
    let objective = |w: f64, rate: f64, path: u64| {
        let h = Hyper::gamma((w * d as f64 + 2.0) / 2.0, rate).unwrap();
        kl_objective(&full, &h, d, 100_000, &mut stream(31, &[path])).unwrap()
    };
    let base = objective(w, rate, 0);
    let mut path = 1;
    for fw in [0.8, 1.0, 1.2] {
        for fr in [0.8, 1.0, 1.2] {
            if fw == 1.0 && fr == 1.0 {
                continue;
            }
            let p = objective(w * fw, rate * fr, path);
            path += 1;
            let se = (p.std_error.powi(2) + base.std_error.powi(2)).sqrt();
            assert!(p.estimate - base.estimate >= 3.0 * se, "w×{fw}, rate×{fr}: {} vs {}", p.estimate, base.estimate);
        }
    }
}

/// Prior draw, then one Gaussian observation: the second moment of X is
/// `B/(2α−d−1)` (the marginal of X is a multivariate t).
#[test]
fn marginal_second_moment_matches_simulation() {
    let d = 3;
    let b = SymMatrix::from_rows(&[vec![1.0, 0.2, 0.0], vec![0.2, 2.0, 0.4], vec![0.0, 0.4, 0.7]]).unwrap();
    let h = Hyper::wishart(4.5, b).unwrap();
    let target = marginal_second_moment(&h, d).unwrap();
    let mut rng = stream(32, &[0]);
    let draws = 100_000;
    let mut samples = vec![Vec::with_capacity(draws); d * d];
    for _ in 0..draws {
        let theta = sample_half_precision(&h, d, &mut rng).unwrap();
        let l = theta.covariance().cholesky().unwrap();
        let z = nalgebra::DVector::from_fn(d, |_, _| common::normal(&mut rng));
        let x = l.factor() * z;
        for i in 0..d {
            for j in 0..d {
                samples[i * d + j].push(x[i] * x[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..d {
            let est = covsel::priors::McEstimate::from_samples(&samples[i * d + j]);
            let z = (est.estimate - target.get(i, j)).abs() / est.std_error;
            assert!(z < 3.0, "entry ({i}, {j}): {} vs {} ({z:.2} SE)", est.estimate, target.get(i, j));
        }
    }
}
