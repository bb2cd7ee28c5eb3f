//! Random instances for the property suites. Proptest picks sizes and seeds;
//! the matrices themselves come from a seeded stream.
#![allow(dead_code)]

use covsel::data::{suff_stats, Dataset, SuffStats};
use covsel::priors::Hyper;
use covsel::rng::{stream, StreamRng};
use covsel::specialfn::SymMatrix;
use covsel::structures::{HalfPrecision, Structure};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> StreamRng {
    stream(seed, &[0xC0FFEE])
}

pub fn normal(rng: &mut StreamRng) -> f64 {
    rng.sample(StandardNormal)
}

/// `WWᵀ/d + εI` with Gaussian `W`.
pub fn random_pd(d: usize, rng: &mut StreamRng) -> SymMatrix {
    let w = DMatrix::from_fn(d, d, |_, _| normal(rng));
    SymMatrix::new(&w * w.transpose() / d as f64 + DMatrix::identity(d, d) * 0.1).unwrap()
}

pub fn random_dataset(n: usize, d: usize, rng: &mut StreamRng) -> Dataset {
    let scale: f64 = rng.random_range(0.3..3.0);
    Dataset::new(DMatrix::from_fn(n, d, |_, _| scale * normal(rng))).unwrap()
}

pub fn random_stats(n: usize, d: usize, rng: &mut StreamRng) -> SuffStats {
    suff_stats(&random_dataset(n, d, rng))
}

pub fn random_hyper(s: Structure, d: usize, rng: &mut StreamRng) -> Hyper {
    let df = d as f64;
    match s {
        Structure::A => Hyper::wishart((df - 1.0) / 2.0 + rng.random_range(0.2..5.0), random_pd(d, rng)).unwrap(),
        Structure::D => {
            Hyper::gamma_vec(rng.random_range(0.2..5.0), (0..d).map(|_| rng.random_range(0.1..4.0)).collect()).unwrap()
        }
        Structure::C => Hyper::gamma(rng.random_range(0.2..5.0), rng.random_range(0.1..4.0)).unwrap(),
    }
}

/// A prior whose mode exists, so MAP estimates are defined for every n.
pub fn regular_hyper(s: Structure, d: usize, rng: &mut StreamRng) -> Hyper {
    let df = d as f64;
    match s {
        Structure::A => Hyper::wishart((df + 1.0) / 2.0 + rng.random_range(0.2..4.0), random_pd(d, rng)).unwrap(),
        Structure::D => {
            Hyper::gamma_vec(1.0 + rng.random_range(0.2..4.0), (0..d).map(|_| rng.random_range(0.1..4.0)).collect())
                .unwrap()
        }
        Structure::C => Hyper::gamma(1.0 + rng.random_range(0.2..4.0), rng.random_range(0.1..4.0)).unwrap(),
    }
}

pub fn random_theta(s: Structure, d: usize, rng: &mut StreamRng) -> HalfPrecision {
    match s {
        Structure::A => HalfPrecision::full(random_pd(d, rng)).unwrap(),
        Structure::D => HalfPrecision::diag((0..d).map(|_| rng.random_range(0.05..5.0)).collect()).unwrap(),
        Structure::C => HalfPrecision::iso(rng.random_range(0.05..5.0), d).unwrap(),
    }
}

pub fn structure() -> impl Strategy<Value = Structure> {
    prop_oneof![Just(Structure::A), Just(Structure::D), Just(Structure::C)]
}
