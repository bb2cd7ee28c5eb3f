//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Two criteria are known to fail because the printed reference values
//! cannot be reproduced (see the README). The run fails only when the set of
//! failing criteria differs from that list.

use std::time::{Duration, Instant};

use covsel::asymptotics::{gap_study, rate_study, GapStudyConfig, Pair, RateStudyConfig, Truth};
use covsel::data::{read_csv, suff_stats, CsvOptions, Dataset, SuffStats};
use covsel::montecarlo::{confusion_table, mcnemar, mcnemar_with, run_cell, sample_rows, McNemarMethod, SimConfig, TableKind};
use covsel::priors::{kl_objective, marginal_second_moment, match_down, sample_half_precision, Hyper};
use covsel::regression::{enumerate_covariates, RegressionData, RegressionPriors};
use covsel::rng::stream;
use covsel::specialfn::SymMatrix;
use covsel::structures::{
    evidence_oracle, flexibility, log_evidence, log_likelihood, HalfPrecision, OracleMethod, Structure,
};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

const IRIS: &str = include_str!("../../../data/iris_setosa.csv");

/// Criteria whose reference values are not reproducible.
const KNOWN_FAILURES: [usize; 2] = [4, 9];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn random_pd<R: Rng>(d: usize, rng: &mut R) -> SymMatrix {
    let w = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    SymMatrix::new(&w * w.transpose() / d as f64 + DMatrix::identity(d, d) * 0.2).unwrap()
}

fn random_data<R: Rng>(n: usize, d: usize, rng: &mut R) -> SuffStats {
    let scale: f64 = rng.random_range(0.3..3.0);
    let values = DMatrix::from_fn(n, d, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    suff_stats(&Dataset::new(values).unwrap())
}

fn random_hyper<R: Rng>(s: Structure, d: usize, rng: &mut R) -> Hyper {
    let df = d as f64;
    match s {
        Structure::A => Hyper::wishart((df - 1.0) / 2.0 + rng.random_range(0.1..5.0), random_pd(d, rng)).unwrap(),
        Structure::D => {
            Hyper::gamma_vec(rng.random_range(0.1..5.0), (0..d).map(|_| rng.random_range(0.1..4.0)).collect()).unwrap()
        }
        Structure::C => Hyper::gamma(rng.random_range(0.1..5.0), rng.random_range(0.1..4.0)).unwrap(),
    }
}

fn random_theta<R: Rng>(s: Structure, d: usize, rng: &mut R) -> HalfPrecision {
    match s {
        Structure::A => HalfPrecision::full(random_pd(d, rng)).unwrap(),
        Structure::D => HalfPrecision::diag((0..d).map(|_| rng.random_range(0.05..5.0)).collect()).unwrap(),
        Structure::C => HalfPrecision::iso(rng.random_range(0.05..5.0), d).unwrap(),
    }
}

fn criterion_1() -> Outcome {
    let mut rng = stream(101, &[1]);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let s = Structure::ALL[rng.random_range(0..3)];
        let d = rng.random_range(1..=5);
        let n = rng.random_range(0..=50);
        let h = random_hyper(s, d, &mut rng);
        let stats = random_data(n, d, &mut rng);
        let theta = random_theta(s, d, &mut rng);
        let lhs = log_evidence(&h, &stats).unwrap();
        let rhs = log_likelihood(&theta, &stats).unwrap() - flexibility(&h, &stats, &theta).unwrap();
        worst = worst.max((lhs - rhs).abs());
    }
    outcome(worst < 1e-8, format!("max |log E − (log L − F)| = {worst:.2e} over 200 tuples"))
}

fn criterion_2() -> Outcome {
    let mut rng = stream(102, &[2]);
    let mut worst_quad: f64 = 0.0;
    for _ in 0..20 {
        let s = Structure::ALL[rng.random_range(0..3)];
        let h = random_hyper(s, 1, &mut rng);
        let n = rng.random_range(1..=30);
        let stats = random_data(n, 1, &mut rng);
        let closed = log_evidence(&h, &stats).unwrap();
        let oracle = evidence_oracle(&h, &stats, OracleMethod::Quadrature, 0, 0).unwrap();
        worst_quad = worst_quad.max((closed - oracle.log_evidence).abs());
    }
    let mut worst_z: f64 = 0.0;
    for case in 0..5 {
        let h = Hyper::wishart(rng.random_range(2.0..5.0), random_pd(2, &mut rng)).unwrap();
        let n = rng.random_range(2..=8);
        // Prior sampling is only a trustworthy estimator when the data are
        // plausible under the prior, so they come from the prior predictive.
        let theta = sample_half_precision(&h, 2, &mut rng).unwrap();
        let stats = suff_stats(&sample_rows(&theta.covariance(), n, &mut rng).unwrap());
        let closed = log_evidence(&h, &stats).unwrap();
        let mc = evidence_oracle(&h, &stats, OracleMethod::PriorMc, 1_000_000, 200 + case).unwrap();
        worst_z = worst_z.max((closed - mc.log_evidence).abs() / mc.error_bound);
    }
    outcome(
        worst_quad < 1e-6 && worst_z < 3.0,
        format!("d=1 quadrature max |Δ| = {worst_quad:.2e}; d=2 prior MC max |Δ|/SE = {worst_z:.2}"),
    )
}

fn criterion_3() -> Outcome {
    let printed = [
        ("Int", [-112.4, -112.2, -75.3]),
        ("Petal.Width", [-240.2, -241.9, -142.4]),
        ("Petal.Length", [-110.6, -110.4, -74.6]),
        ("Int,Petal.Width", [-109.8, -109.6, -74.1]),
        ("Int,Petal.Length", [-86.7, -87.0, -61.1]),
        ("Petal.Width,Petal.Length", [-110.3, -110.1, -74.7]),
        ("Int,Petal.Width,Petal.Length", [-86.4, -86.8, -61.2]),
    ];
    let ds = read_csv(IRIS.as_bytes(), &CsvOptions { has_header: true, columns: None }).unwrap();
    let col = |name: &str| ds.column_index(name).unwrap();
    let data = RegressionData::from_dataset(
        &ds,
        &[col("Sepal.Width"), col("Sepal.Length")],
        &[col("Petal.Width"), col("Petal.Length")],
        true,
    )
    .unwrap();
    let priors = RegressionPriors::standard(2, 3, 2.0, 1.0).unwrap();
    let fits = enumerate_covariates(&data, &[0, 1, 2], &priors, false).unwrap();
    let mut worst: f64 = 0.0;
    for (id, values) in printed {
        let fit = fits.iter().find(|f| f.subset_id == id).unwrap();
        for (s, want) in Structure::ALL.iter().zip(values) {
            worst = worst.max((fit.fit(*s).unwrap().log_evidence - want).abs());
        }
    }
    let best = &fits[0];
    let best_structure = best.fits.iter().max_by(|a, b| a.log_evidence.total_cmp(&b.log_evidence)).unwrap().structure;
    let argmax_ok = best.subset_id == "Int,Petal.Length" && best_structure == Structure::A;
    outcome(
        worst <= 0.1 && argmax_ok,
        format!("max |Δ| over 21 values = {worst:.3}; argmax ({}, {best_structure})", best.subset_id),
    )
}

fn criterion_4() -> Outcome {
    let config = SimConfig { n_values: vec![5, 10], ..SimConfig::default() };
    let scorers = TableKind::Oracle.scorers();
    // Printed correct-selection rates for evidence and pcBIC.
    let printed = [
        (5, Structure::A, 0.272, 0.000),
        (5, Structure::D, 0.148, 0.034),
        (5, Structure::C, 0.993, 1.000),
        (10, Structure::A, 0.351, 0.004),
        (10, Structure::D, 0.139, 0.125),
        (10, Structure::C, 1.000, 1.000),
    ];
    let mut evidence_misses = Vec::new();
    let mut pcbic_misses = Vec::new();
    let mut trace_ok = true;
    for n in [5, 10] {
        let cells: Vec<_> = Structure::ALL.iter().map(|t| run_cell(&config, *t, n).unwrap()).collect();
        for (pn, truth, evi, pc) in printed.iter().filter(|p| p.0 == n) {
            let cell = cells.iter().find(|c| c.truth == *truth).unwrap();
            let (got_e, got_p) = (cell.correct_rate(0), cell.correct_rate(1));
            if (got_e - evi).abs() > 0.045 {
                evidence_misses.push(format!("{truth}@{pn} {got_e:.3} vs {evi:.3}"));
            }
            let pc_ok = if *truth == Structure::C && *pn == 5 { got_p >= 0.995 } else { (got_p - pc).abs() <= 0.045 };
            if !pc_ok {
                pcbic_misses.push(format!("{truth}@{pn} {got_p:.3} vs {pc:.3}"));
            }
        }
        let table = confusion_table(&cells, &scorers).unwrap();
        let trace = table.comparisons.iter().find(|c| c.truth.is_none()).unwrap();
        let (te, tp) = (table.matrices[0].trace(), table.matrices[1].trace());
        trace_ok &= te > tp && trace.test.p_value < 0.05;
    }
    let pass = evidence_misses.is_empty() && pcbic_misses.is_empty() && trace_ok;
    outcome(
        pass,
        format!(
            "evidence rates off: [{}]; pcBIC rates off: [{}]; trace(evidence) > trace(pcBIC) significant: {trace_ok}",
            evidence_misses.join(", "),
            pcbic_misses.join(", ")
        ),
    )
}

fn criterion_5() -> Outcome {
    let d = 5;
    let hyper = Hyper::wishart(4.0, SymMatrix::scaled_identity(d, 0.5)).unwrap();
    let grid = vec![100, 316, 1000, 3162, 10000];
    let slope = |pair: Pair| {
        let config = RateStudyConfig {
            pair,
            d,
            truth: Truth::Prior { structure: Structure::C },
            hyper: hyper.clone(),
            n_grid: grid.clone(),
            reps: 200,
            seed: 5,
        };
        rate_study(&config).unwrap().slope.unwrap()
    };
    let (ac, dc) = (slope(Pair::AvsC), slope(Pair::DvsC));
    let pass = (ac + 7.0).abs() <= 0.7 && (dc + 2.0).abs() <= 0.2;
    outcome(pass, format!("A-vs-C slope {ac:.3} (target −7); D-vs-C slope {dc:.3} (target −2)"))
}

fn criterion_6() -> Outcome {
    let sigma = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
    let config = RateStudyConfig {
        pair: Pair::AvsD,
        d: 2,
        truth: Truth::Fixed { theta: HalfPrecision::from_covariance(&sigma).unwrap() },
        hyper: Hyper::wishart(2.5, SymMatrix::scaled_identity(2, 0.5)).unwrap(),
        n_grid: vec![10_000],
        reps: 200,
        seed: 6,
    };
    let study = rate_study(&config).unwrap();
    let target = 0.5 * (4.0f64 / 3.0).ln();
    let got = study.rows[0].scaled_statistic;
    outcome((got - target).abs() <= 0.05 * target, format!("mean n⁻¹ log(E_A/E_D) = {got:.5}, target {target:.5}"))
}

fn criterion_7() -> Outcome {
    let config = GapStudyConfig {
        hyper: Hyper::gamma(2.0, 1.0).unwrap(),
        theta0: HalfPrecision::iso(1.0, 1).unwrap(),
        n_grid: vec![100_000],
        reps: 200,
        seed: 7,
    };
    let study = gap_study(&config).unwrap();
    let row = study.rows[0];
    let pass = (row.mean_excess - study.gap).abs() < 0.05 && row.mean_abs_kic < 0.05;
    outcome(
        pass,
        format!(
            "mean F − ½ log n = {:.4}, gap {:.4}; mean |F − κ| = {:.2e}",
            row.mean_excess, study.gap, row.mean_abs_kic
        ),
    )
}

fn criterion_8() -> Outcome {
    let d = 3;
    let full = Hyper::gamma_vec(2.5, vec![1.0, 2.0, 0.5]).unwrap();
    let matched = match_down(&full, Structure::C).unwrap();
    let Hyper::Gamma { alpha, rate } = matched else { unreachable!() };
    // Perturb the prior sample size w and the rate υ of the nested prior.
    let w = (2.0 * alpha - 2.0) / d as f64;
    let objective = |w: f64, rate: f64, seed: u64| {
        let h = Hyper::gamma((w * d as f64 + 2.0) / 2.0, rate).unwrap();
        kl_objective(&full, &h, d, 100_000, &mut stream(8, &[seed])).unwrap()
    };
    let base = objective(w, rate, 0);
    let mut worst_z = f64::INFINITY;
    let mut k = 1;
    for fw in [0.8, 1.0, 1.2] {
        for fr in [0.8, 1.0, 1.2] {
            if fw == 1.0 && fr == 1.0 {
                continue;
            }
            let p = objective(w * fw, rate * fr, k);
            k += 1;
            let z = (p.estimate - base.estimate) / (p.std_error.powi(2) + base.std_error.powi(2)).sqrt();
            worst_z = worst_z.min(z);
        }
    }
    outcome(worst_z >= 3.0, format!("objective at match {:.4}; smallest gap to 8 perturbations = {worst_z:.1} SE", base.estimate))
}

fn criterion_9() -> Outcome {
    let d = 3;
    let alpha = 4.0;
    let b = SymMatrix::from_rows(&[vec![2.0, 0.3, 0.1], vec![0.3, 1.0, -0.2], vec![0.1, -0.2, 0.5]]).unwrap();
    let h = Hyper::wishart(alpha, b.clone()).unwrap();
    let draws = 100_000;
    let mut rng = stream(9, &[0]);
    let mut hs = Vec::with_capacity(draws);
    let mut xs = Vec::with_capacity(draws);
    for _ in 0..draws {
        let theta = sample_half_precision(&h, d, &mut rng).unwrap();
        let cov = theta.covariance();
        let l = cov.cholesky().unwrap();
        let z = nalgebra::DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = l.factor() * z;
        hs.push(theta.to_full().as_matrix().clone());
        xs.push(&x * x.transpose());
    }
    let max_z = |samples: &[DMatrix<f64>], target: &DMatrix<f64>| {
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let v: Vec<f64> = samples.iter().map(|m| m[(i, j)]).collect();
                let est = covsel::priors::McEstimate::from_samples(&v);
                worst = worst.max((est.estimate - target[(i, j)]).abs() / est.std_error);
            }
        }
        worst
    };
    let mean_target = b.inverse().unwrap().scale(alpha).as_matrix().clone();
    let z_mean = max_z(&hs, &mean_target);
    let df = d as f64;
    let stated_v = b.scale((2.0 * alpha - (df - 1.0)) / (2.0 * alpha - (df + 1.0))).as_matrix().clone();
    let z_stated = max_z(&xs, &stated_v);
    let z_exact = max_z(&xs, marginal_second_moment(&h, d).unwrap().as_matrix());
    outcome(
        z_mean < 3.0 && z_stated < 3.0,
        format!(
            "Wishart mean max |z| = {z_mean:.2}; X second moment vs stated V max |z| = {z_stated:.1}, vs B/(2α−d−1) max |z| = {z_exact:.2}"
        ),
    )
}

fn criterion_10() -> Outcome {
    let exact = mcnemar(5, 15);
    let chi = mcnemar_with(5, 15, McNemarMethod::ContinuityCorrected);
    let pass = exact.method == McNemarMethod::Exact
        && (exact.p_value - 0.04139).abs() <= 1e-4
        && (chi.statistic - 4.05).abs() < 1e-12
        && (chi.p_value - 0.0442).abs() <= 1e-3;
    outcome(
        pass,
        format!("exact p = {:.5}; chi-square statistic {:.2}, p = {:.4}", exact.p_value, chi.statistic, chi.p_value),
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("Bayes identity", Duration::from_secs(5), criterion_1),
        ("oracle equivalence", Duration::from_secs(120), criterion_2),
        ("iris reproduction", Duration::from_secs(1), criterion_3),
        ("oracle simulation table", Duration::from_secs(300), criterion_4),
        ("logarithmic rates", Duration::from_secs(600), criterion_5),
        ("linear rate", Duration::from_secs(300), criterion_6),
        ("flexibility gap", Duration::from_secs(120), criterion_7),
        ("matching minimality", Duration::from_secs(60), criterion_8),
        ("sampler moments", Duration::from_secs(60), criterion_9),
        ("McNemar values", Duration::from_secs(1), criterion_10),
    ];
    let mut failed = Vec::new();
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let k = i + 1;
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= *budget;
        if !pass {
            failed.push(k);
        }
        let tag = if pass { "PASS" } else { "FAIL" };
        let known = if !pass && KNOWN_FAILURES.contains(&k) { " (known)" } else { "" };
        println!("criterion {k:>2} {tag}{known} {name}: {} [{:.2}s]", o.detail, elapsed.as_secs_f64());
    }
    if failed != KNOWN_FAILURES {
        eprintln!("failing criteria {failed:?} differ from the known list {KNOWN_FAILURES:?}");
        std::process::exit(1);
    }
}
