//! Closed-form inference for the three covariance structures.
//!
//! With the half-precision `H = ½Σ⁻¹`, n mean-zero observations with scatter
//! `s` have likelihood
//!
//! ```text
//! log L(H) = (n/2) log|H| − (nd/2) log π − tr(H s)
//! ```
//!
//! Structure A leaves `H` free, D restricts it to a diagonal and C to a
//! multiple of the identity. Under conjugate priors the evidence is a ratio
//! of prior and posterior normalizers, and flexibility is the log ratio of
//! posterior to prior density, so `log E = log L(θ) − flexibility(θ)` holds
//! at every θ.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::SuffStats;
use crate::error::{Error, Result};
use crate::priors::{conjugate_update, log_prior_density, prior_sample_size, sample_half_precision, Hyper, HyperTriple};
use crate::quadrature::log_integrate_exp;
use crate::rng;
use crate::specialfn::{ln_gamma, log_mv_gamma, SymMatrix};

/// Covariance structure, ordered from simplest to richest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Structure {
    /// Constant diagonal, `Σ = σ²I`.
    C,
    /// Diagonal.
    D,
    /// Arbitrary positive definite.
    A,
}

impl Structure {
    pub const ALL: [Structure; 3] = [Structure::C, Structure::D, Structure::A];

    /// Number of free parameters at dimension `d`.
    pub fn k(self, d: usize) -> usize {
        match self {
            Structure::A => d * (d + 1) / 2,
            Structure::D => d,
            Structure::C => 1,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Structure::A => "A",
            Structure::D => "D",
            Structure::C => "C",
        };
        f.write_str(s)
    }
}

impl FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Structure> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Structure::A),
            "D" => Ok(Structure::D),
            "C" => Ok(Structure::C),
            other => Err(Error::InvalidConfig(format!("unknown structure '{other}'"))),
        }
    }
}

/// The half-precision in the representation of its structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HalfPrecision {
    Full { h: SymMatrix },
    Diag { eta: Vec<f64> },
    Iso { eta: f64, d: usize },
}

fn check_positive(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Support(format!("{v} is not a positive finite value")))
    }
}

impl HalfPrecision {
    pub fn full(h: SymMatrix) -> Result<HalfPrecision> {
        h.cholesky().map_err(|e| Error::Support(e.to_string()))?;
        Ok(HalfPrecision::Full { h })
    }

    pub fn diag(eta: Vec<f64>) -> Result<HalfPrecision> {
        if eta.is_empty() {
            return Err(Error::Domain("empty diagonal".into()));
        }
        eta.iter().try_for_each(|v| check_positive(*v))?;
        Ok(HalfPrecision::Diag { eta })
    }

    pub fn iso(eta: f64, d: usize) -> Result<HalfPrecision> {
        if d == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        check_positive(eta)?;
        Ok(HalfPrecision::Iso { eta, d })
    }

    /// Half-precision of a covariance matrix, `½Σ⁻¹`.
    pub fn from_covariance(sigma: &SymMatrix) -> Result<HalfPrecision> {
        HalfPrecision::full(sigma.inverse()?.scale(0.5))
    }

    pub fn dim(&self) -> usize {
        match self {
            HalfPrecision::Full { h } => h.dim(),
            HalfPrecision::Diag { eta } => eta.len(),
            HalfPrecision::Iso { d, .. } => *d,
        }
    }

    pub fn structure(&self) -> Structure {
        match self {
            HalfPrecision::Full { .. } => Structure::A,
            HalfPrecision::Diag { .. } => Structure::D,
            HalfPrecision::Iso { .. } => Structure::C,
        }
    }

    /// Embeds into a full matrix.
    pub fn to_full(&self) -> SymMatrix {
        match self {
            HalfPrecision::Full { h } => h.clone(),
            HalfPrecision::Diag { eta } => SymMatrix::from_diagonal(eta),
            HalfPrecision::Iso { eta, d } => SymMatrix::scaled_identity(*d, *eta),
        }
    }

    pub fn log_det(&self) -> f64 {
        match self {
            HalfPrecision::Full { h } => h.cholesky().expect("validated on construction").log_det(),
            HalfPrecision::Diag { eta } => eta.iter().map(|v| v.ln()).sum(),
            HalfPrecision::Iso { eta, d } => *d as f64 * eta.ln(),
        }
    }

    /// `tr(H s)`.
    pub fn trace_with(&self, stats: &SuffStats) -> f64 {
        match self {
            HalfPrecision::Full { h } => h.trace_product(&stats.s),
            HalfPrecision::Diag { eta } => eta.iter().zip(&stats.s_diag).map(|(e, s)| e * s).sum(),
            HalfPrecision::Iso { eta, .. } => eta * stats.s_total,
        }
    }

    /// Covariance `Σ = (2H)⁻¹`.
    pub fn covariance(&self) -> SymMatrix {
        self.to_full()
            .scale(2.0)
            .inverse()
            .expect("half-precision is positive definite")
    }

    /// Free coordinates: the diagonal first, then the upper triangle row by
    /// row for full matrices.
    pub fn params(&self) -> Vec<f64> {
        match self {
            HalfPrecision::Full { h } => {
                let d = h.dim();
                let mut p: Vec<f64> = (0..d).map(|i| h.get(i, i)).collect();
                for i in 0..d {
                    for j in (i + 1)..d {
                        p.push(h.get(i, j));
                    }
                }
                p
            }
            HalfPrecision::Diag { eta } => eta.clone(),
            HalfPrecision::Iso { eta, .. } => vec![*eta],
        }
    }

    /// Inverse of [`HalfPrecision::params`].
    pub fn from_params(structure: Structure, d: usize, p: &[f64]) -> Result<HalfPrecision> {
        let k = structure.k(d);
        if p.len() != k {
            return Err(Error::DimensionMismatch { expected: k, found: p.len() });
        }
        match structure {
            Structure::C => HalfPrecision::iso(p[0], d),
            Structure::D => HalfPrecision::diag(p.to_vec()),
            Structure::A => HalfPrecision::full(SymMatrix::new(full_from_params(d, p))?),
        }
    }
}

fn full_from_params(d: usize, p: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = p[i];
    }
    let mut idx = d;
    for i in 0..d {
        for j in (i + 1)..d {
            m[(i, j)] = p[idx];
            m[(j, i)] = p[idx];
            idx += 1;
        }
    }
    m
}

fn check_stats(theta_dim: usize, stats: &SuffStats) -> Result<()> {
    if theta_dim != stats.d {
        return Err(Error::DimensionMismatch { expected: theta_dim, found: stats.d });
    }
    Ok(())
}

/// `(n/2) log|H| − (nd/2) log π − tr(H s)`.
pub fn log_likelihood(theta: &HalfPrecision, stats: &SuffStats) -> Result<f64> {
    check_stats(theta.dim(), stats)?;
    if stats.n == 0 {
        return Ok(0.0);
    }
    let n = stats.n as f64;
    let d = stats.d as f64;
    Ok(n / 2.0 * theta.log_det() - n * d / 2.0 * PI.ln() - theta.trace_with(stats))
}

/// Posterior mode of the half-precision.
pub fn map_estimate(h: &Hyper, stats: &SuffStats) -> Result<HalfPrecision> {
    h.check_dim(stats.d)?;
    let n = stats.n as f64;
    let d = stats.d as f64;
    let mult = match h {
        Hyper::Wishart { alpha, .. } => n / 2.0 + alpha - (d + 1.0) / 2.0,
        Hyper::GammaVec { alpha, .. } => (n + 2.0 * alpha - 2.0) / 2.0,
        Hyper::Gamma { alpha, .. } => (n * d + 2.0 * alpha - 2.0) / 2.0,
    };
    if !(mult > 0.0) {
        return Err(Error::NonRegularPrior(mult));
    }
    match conjugate_update(h, stats)? {
        Hyper::Wishart { rate, .. } => HalfPrecision::full(rate.inverse()?.scale(mult)),
        Hyper::GammaVec { rates, .. } => HalfPrecision::diag(rates.iter().map(|b| mult / b).collect()),
        Hyper::Gamma { rate, .. } => HalfPrecision::iso(mult / rate, stats.d),
    }
}

/// Log of the prior normalizing constant, e.g. `α log|B| − log Γ_d(α)`.
fn log_normalizer(h: &Hyper) -> Result<f64> {
    Ok(match h {
        Hyper::Wishart { alpha, rate } => alpha * rate.cholesky()?.log_det() - log_mv_gamma(rate.dim(), *alpha)?,
        Hyper::GammaVec { alpha, rates } => rates.iter().map(|b| alpha * b.ln() - ln_gamma(*alpha)).sum(),
        Hyper::Gamma { alpha, rate } => alpha * rate.ln() - ln_gamma(*alpha),
    })
}

/// Closed-form log evidence under a conjugate prior.
pub fn log_evidence(h: &Hyper, stats: &SuffStats) -> Result<f64> {
    h.check_dim(stats.d)?;
    if stats.n == 0 {
        return Ok(0.0);
    }
    let post = conjugate_update(h, stats)?;
    let n = stats.n as f64;
    let d = stats.d as f64;
    Ok(log_normalizer(h)? - log_normalizer(&post)? - n * d / 2.0 * PI.ln())
}

/// Log evidence under the improper flat prior `ρ(θ) ∝ 1` on the free
/// coordinates. Only meaningful for comparing data sets under one
/// structure; the scale of an improper prior is arbitrary. Structure A
/// needs a positive definite scatter, which requires `n ≥ d`.
pub fn log_evidence_flat(structure: Structure, stats: &SuffStats) -> Result<f64> {
    if stats.n == 0 {
        return Err(Error::EmptyDataset);
    }
    let n = stats.n as f64;
    let d = stats.d as f64;
    let base = -n * d / 2.0 * PI.ln();
    let positive = |v: f64| {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::DegenerateScatter("zero scatter under a flat prior".into()))
        }
    };
    match structure {
        Structure::C => {
            let a = n * d / 2.0 + 1.0;
            Ok(base + ln_gamma(a) - a * positive(stats.s_total)?.ln())
        }
        Structure::D => {
            let a = n / 2.0 + 1.0;
            let mut acc = base;
            for s in &stats.s_diag {
                acc += ln_gamma(a) - a * positive(*s)?.ln();
            }
            Ok(acc)
        }
        Structure::A => {
            if stats.n < stats.d {
                return Err(Error::DegenerateScatter(format!(
                    "flat-prior evidence for A needs n >= d, got n = {} < d = {}",
                    stats.n, stats.d
                )));
            }
            let log_det = stats
                .s
                .cholesky()
                .map_err(|e| Error::DegenerateScatter(e.to_string()))?
                .log_det();
            let a = n / 2.0 + (d + 1.0) / 2.0;
            Ok(base + log_mv_gamma(stats.d, a)? - a * log_det)
        }
    }
}

/// `log ρ(θ | x) − log ρ(θ)`.
pub fn flexibility(h: &Hyper, stats: &SuffStats, theta: &HalfPrecision) -> Result<f64> {
    check_stats(theta.dim(), stats)?;
    if stats.n == 0 {
        log_prior_density(h, theta)?;
        return Ok(0.0);
    }
    let post = conjugate_update(h, stats)?;
    Ok(log_prior_density(&post, theta)? - log_prior_density(h, theta)?)
}

/// Closed-form Hessian of `A(θ) = −½ log|H|` over the free coordinates of a
/// full matrix, `½ tr(H⁻¹ E_a H⁻¹ E_b)`. Used to check the finite-difference
/// version.
pub fn log_partition_hessian_exact(h: &SymMatrix) -> Result<DMatrix<f64>> {
    let d = h.dim();
    let inv = h.inverse()?;
    let coords = coordinate_pairs(d);
    let k = coords.len();
    let m = inv.as_matrix();
    let unit = |(i, j): (usize, usize)| {
        let mut e = DMatrix::<f64>::zeros(d, d);
        e[(i, j)] = 1.0;
        e[(j, i)] = 1.0;
        e
    };
    let mut out = DMatrix::<f64>::zeros(k, k);
    for a in 0..k {
        let ea = m * unit(coords[a]) * m;
        for b in 0..k {
            out[(a, b)] = 0.5 * (&ea * unit(coords[b])).trace();
        }
    }
    Ok(out)
}

fn coordinate_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut c: Vec<(usize, usize)> = (0..d).map(|i| (i, i)).collect();
    for i in 0..d {
        for j in (i + 1)..d {
            c.push((i, j));
        }
    }
    c
}

/// Gradient of `−½ log|H|`: `−½(H⁻¹)_ii` on the diagonal and `−(H⁻¹)_ij`
/// on the upper triangle.
fn log_partition_gradient(d: usize, p: &[f64]) -> Result<Vec<f64>> {
    let h = SymMatrix::new(full_from_params(d, p))?;
    let inv = h.cholesky()?.inverse();
    Ok(coordinate_pairs(d)
        .into_iter()
        .map(|(i, j)| if i == j { -0.5 * inv.get(i, i) } else { -inv.get(i, j) })
        .collect())
}

/// Central finite-difference Hessian of `−½ log|H|` with step
/// `1e-5 · mean(diag H)`.
pub fn log_partition_hessian_fd(h: &SymMatrix) -> Result<DMatrix<f64>> {
    let d = h.dim();
    let theta = HalfPrecision::full(h.clone())?;
    let p = theta.params();
    let k = p.len();
    let step = 1e-5 * h.trace() / d as f64;
    let mut out = DMatrix::<f64>::zeros(k, k);
    for a in 0..k {
        let mut up = p.clone();
        let mut down = p.clone();
        up[a] += step;
        down[a] -= step;
        let gu = log_partition_gradient(d, &up)?;
        let gd = log_partition_gradient(d, &down)?;
        for b in 0..k {
            out[(b, a)] = (gu[b] - gd[b]) / (2.0 * step);
        }
    }
    Ok((&out + out.transpose()) * 0.5)
}

/// `log|Ä(θ)|` for the per-observation log-partition `A(θ) = −½ log|H|`.
pub fn log_partition_hessian_log_det(theta: &HalfPrecision) -> Result<f64> {
    Ok(match theta {
        HalfPrecision::Iso { eta, d } => (*d as f64 / 2.0).ln() - 2.0 * eta.ln(),
        HalfPrecision::Diag { eta } => eta.iter().map(|e| -(2.0f64.ln()) - 2.0 * e.ln()).sum(),
        HalfPrecision::Full { h } => {
            let hess = SymMatrix::new(log_partition_hessian_fd(h)?)?;
            hess.cholesky()?.log_det()
        }
    })
}

/// `−log ρ(θ) + ½ log|Ä(θ)/(2π)|`, the constant that flexibility minus
/// `(k/2) log n` approaches.
pub fn laplace_gap(h: &Hyper, theta: &HalfPrecision) -> Result<f64> {
    let k = theta.structure().k(theta.dim()) as f64;
    let log_det = log_partition_hessian_log_det(theta)?;
    Ok(-log_prior_density(h, theta)? + 0.5 * (log_det - k * (2.0 * PI).ln()))
}

/// Per-structure summary of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub structure: Structure,
    pub k: usize,
    pub n: usize,
    pub map: HalfPrecision,
    pub log_lik_at_map: f64,
    pub log_prior_at_map: f64,
    pub log_evidence: f64,
    pub flexibility_at_map: f64,
    /// Missing at `n = 0`, where `log n` diverges.
    pub bic: Option<f64>,
    pub pc_bic: Option<f64>,
    pub kic: Option<f64>,
}

/// Model selection score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Evidence,
    Bic,
    PcBic,
    Kic,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [Criterion::Evidence, Criterion::Bic, Criterion::PcBic, Criterion::Kic];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Evidence => "evidence",
            Criterion::Bic => "bic",
            Criterion::PcBic => "pcbic",
            Criterion::Kic => "kic",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Criterion> {
        match s.trim().to_ascii_lowercase().as_str() {
            "evidence" => Ok(Criterion::Evidence),
            "bic" => Ok(Criterion::Bic),
            "pcbic" | "pc-bic" | "pc_bic" => Ok(Criterion::PcBic),
            "kic" => Ok(Criterion::Kic),
            other => Err(Error::InvalidConfig(format!("unknown criterion '{other}'"))),
        }
    }
}

impl FitReport {
    pub fn value(&self, criterion: Criterion) -> Option<f64> {
        match criterion {
            Criterion::Evidence => Some(self.log_evidence),
            Criterion::Bic => self.bic,
            Criterion::PcBic => self.pc_bic,
            Criterion::Kic => self.kic,
        }
    }
}

/// Evaluates MAP, evidence, flexibility and the BIC family for one prior.
pub fn criteria(h: &Hyper, stats: &SuffStats) -> Result<FitReport> {
    let map = map_estimate(h, stats)?;
    let structure = h.structure();
    let k = structure.k(stats.d);
    let log_lik = log_likelihood(&map, stats)?;
    let log_prior = log_prior_density(h, &map)?;
    let log_evidence = log_evidence(h, stats)?;
    let flex = flexibility(h, stats, &map)?;
    let (bic, pc_bic, kic) = if stats.n == 0 {
        (None, None, None)
    } else {
        let penalty = k as f64 / 2.0 * (stats.n as f64).ln();
        let bic = log_lik - penalty;
        let kic = log_lik - penalty - laplace_gap(h, &map)?;
        (Some(bic), Some(bic + log_prior), Some(kic))
    };
    Ok(FitReport {
        structure,
        k,
        n: stats.n,
        map,
        log_lik_at_map: log_lik,
        log_prior_at_map: log_prior,
        log_evidence,
        flexibility_at_map: flex,
        bic,
        pc_bic,
        kic,
    })
}

/// Independent numerical route to the evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    /// Adaptive quadrature over log coordinates; at most two parameters.
    Quadrature,
    /// Log-mean-exp of the likelihood over prior draws; `d ≤ 4`.
    PriorMc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub log_evidence: f64,
    /// Absolute error bound from quadrature, or one standard error for
    /// Monte Carlo, on the log scale.
    pub error_bound: f64,
}

/// Evidence by brute force. `budget` is the number of prior draws for
/// Monte Carlo and is ignored by quadrature; `seed` fixes the draws.
pub fn evidence_oracle(
    h: &Hyper,
    stats: &SuffStats,
    method: OracleMethod,
    budget: usize,
    seed: u64,
) -> Result<OracleEstimate> {
    h.check_dim(stats.d)?;
    if stats.n == 0 {
        return Ok(OracleEstimate { log_evidence: 0.0, error_bound: 0.0 });
    }
    match method {
        OracleMethod::Quadrature => quadrature_oracle(h, stats),
        OracleMethod::PriorMc => prior_mc_oracle(h, stats, budget, seed),
    }
}

fn log_joint(h: &Hyper, stats: &SuffStats, theta: &HalfPrecision) -> f64 {
    match (log_likelihood(theta, stats), log_prior_density(h, theta)) {
        (Ok(l), Ok(p)) => l + p,
        _ => f64::NEG_INFINITY,
    }
}

fn quadrature_oracle(h: &Hyper, stats: &SuffStats) -> Result<OracleEstimate> {
    const LO: f64 = -60.0;
    const HI: f64 = 60.0;
    let structure = h.structure();
    let d = stats.d;
    let k = structure.k(d);
    let at = |u: &[f64]| -> f64 {
        let p: Vec<f64> = u.iter().map(|v| v.exp()).collect();
        match HalfPrecision::from_params(structure, d, &p) {
            // The Jacobian of η = e^u adds Σu.
            Ok(theta) => log_joint(h, stats, &theta) + u.iter().sum::<f64>(),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    match k {
        1 => {
            let (v, e) = log_integrate_exp(|u| at(&[u]), LO, HI, 4000, 1e-13);
            Ok(OracleEstimate { log_evidence: v, error_bound: e })
        }
        2 => {
            let mut worst = 0.0f64;
            let (v, e) = log_integrate_exp(
                |u1| {
                    let (inner, err) = log_integrate_exp(|u2| at(&[u1, u2]), LO, HI, 600, 1e-12);
                    worst = worst.max(err);
                    inner
                },
                LO,
                HI,
                600,
                1e-12,
            );
            Ok(OracleEstimate { log_evidence: v, error_bound: e + worst })
        }
        _ => Err(Error::LimitExceeded(format!(
            "quadrature handles at most 2 parameters; structure {structure} at d = {d} has {k}"
        ))),
    }
}

fn prior_mc_oracle(h: &Hyper, stats: &SuffStats, budget: usize, seed: u64) -> Result<OracleEstimate> {
    const CHUNK: usize = 1 << 14;
    if stats.d > 4 {
        return Err(Error::LimitExceeded(format!("prior Monte Carlo supports d <= 4, got {}", stats.d)));
    }
    if budget == 0 {
        return Err(Error::InvalidConfig("prior Monte Carlo needs a positive budget".into()));
    }
    let chunks = budget.div_ceil(CHUNK);
    // Each chunk returns its log-likelihoods; combined in chunk order.
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(seed, &[c as u64]);
            let size = CHUNK.min(budget - c * CHUNK);
            (0..size)
                .map(|_| {
                    let theta = sample_half_precision(h, stats.d, &mut r)?;
                    log_likelihood(&theta, stats)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = parts.into_iter().flatten().collect();
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = values.len() as f64;
    let w: Vec<f64> = values.iter().map(|v| (v - top).exp()).collect();
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(OracleEstimate {
        log_evidence: top + mean.ln(),
        error_bound: (var / n).sqrt() / mean,
    })
}

/// Relative tolerance under which two criterion values count as tied.
pub const TIE_TOL: f64 = 1e-9;

/// Whether `x` beats `y` by more than the tie tolerance.
pub fn strictly_better(x: f64, y: f64) -> bool {
    x > y + TIE_TOL * (1.0 + x.abs().max(y.abs()))
}

/// Index of the best value; ties go to the earliest entry, so callers list
/// candidates from simplest to richest.
pub fn best_index(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        match best {
            Some(b) if !strictly_better(*v, values[b]) => {}
            _ => best = Some(i),
        }
    }
    best
}

/// A structure left out of a ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub structure: Structure,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub criterion: Criterion,
    /// Best first.
    pub ranked: Vec<FitReport>,
    pub excluded: Vec<Exclusion>,
}

impl Selection {
    pub fn winner(&self) -> Option<Structure> {
        self.ranked.first().map(|r| r.structure)
    }
}

/// Fits all three structures and ranks them, breaking ties toward the
/// simpler structure.
pub fn select_structure(stats: &SuffStats, hypers: &HyperTriple, criterion: Criterion) -> Result<Selection> {
    for s in Structure::ALL {
        let h = hypers.get(s);
        if h.structure() != s {
            return Err(Error::InvalidConfig(format!(
                "prior for structure {s} has the form of structure {}",
                h.structure()
            )));
        }
        h.check_dim(stats.d)?;
    }
    let mut pool = Vec::new();
    let mut excluded = Vec::new();
    for s in Structure::ALL {
        match criteria(hypers.get(s), stats) {
            Ok(report) if report.value(criterion).is_some() => pool.push(report),
            Ok(_) => excluded.push(Exclusion {
                structure: s,
                reason: format!("{criterion} is undefined at n = {}", stats.n),
            }),
            Err(e) => excluded.push(Exclusion { structure: s, reason: e.to_string() }),
        }
    }
    let mut ranked = Vec::with_capacity(pool.len());
    while !pool.is_empty() {
        let values: Vec<f64> = pool.iter().map(|r| r.value(criterion).unwrap_or(f64::NEG_INFINITY)).collect();
        let i = best_index(&values).unwrap_or(0);
        ranked.push(pool.remove(i));
    }
    Ok(Selection { criterion, ranked, excluded })
}

/// Whether the prior admits a MAP estimate without data.
pub fn has_prior_mode(h: &Hyper, d: usize) -> bool {
    prior_sample_size(h, d).regular
}
