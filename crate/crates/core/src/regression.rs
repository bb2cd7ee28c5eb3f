//! Multivariate linear regression with a conjugate matrix-normal prior on the
//! coefficients and a Wishart or gamma prior on the residual half-precision.
//!
//! Coefficients are a `d₁×d₂` matrix `γ` acting as `ŷᵢ = γ xᵢ`. Given `H`,
//! the prior on `γ` has density
//!
//! ```text
//! |H|^{d₂/2} |Λ|^{d₁/2} π^{−d₁d₂/2} exp(−tr(H (γ−ν) Λ (γ−ν)ᵀ))
//! ```
//!
//! The posterior mean is `γ̂ = (YᵀX + νΛ)(XᵀX + Λ)⁻¹` whatever the residual
//! structure, and every evidence depends on the data only through `γ̂`,
//! `log|Λ| − log|XᵀX + Λ|` and `R = Σ ε̂ε̂ᵀ + (γ̂−ν)Λ(γ̂−ν)ᵀ`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{exact_sum, Dataset, SuffStats};
use crate::error::{Error, Result};
use crate::priors::{conjugate_update, log_prior_density, Hyper, HyperTriple};
use crate::specialfn::SymMatrix;
use crate::structures::{log_evidence, FitReport, HalfPrecision, Structure};

/// Responses `Y` (n×d₁) and covariates `X` (n×d₂). `d₂` may be zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    pub y: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub covariate_names: Vec<String>,
}

impl RegressionData {
    pub fn new(y: DMatrix<f64>, x: DMatrix<f64>) -> Result<RegressionData> {
        let names = (0..x.ncols()).map(|j| format!("x{}", j + 1)).collect();
        RegressionData::with_names(y, x, names)
    }

    pub fn with_names(y: DMatrix<f64>, x: DMatrix<f64>, covariate_names: Vec<String>) -> Result<RegressionData> {
        if y.nrows() != x.nrows() {
            return Err(Error::DimensionMismatch { expected: y.nrows(), found: x.nrows() });
        }
        if y.ncols() == 0 {
            return Err(Error::Domain("regression needs at least one response".into()));
        }
        if covariate_names.len() != x.ncols() {
            return Err(Error::DimensionMismatch { expected: x.ncols(), found: covariate_names.len() });
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("regression data must be finite".into()));
        }
        Ok(RegressionData { y, x, covariate_names })
    }

    /// Builds data from columns of a data set, optionally prepending an
    /// all-ones intercept column named `Int`.
    pub fn from_dataset(data: &Dataset, responses: &[usize], covariates: &[usize], intercept: bool) -> Result<RegressionData> {
        let y = data.select_columns(responses)?;
        let n = data.n();
        let mut names = Vec::new();
        let mut cols: Vec<Vec<f64>> = Vec::new();
        if intercept {
            names.push("Int".to_string());
            cols.push(vec![1.0; n]);
        }
        for &c in covariates {
            if c >= data.d() {
                return Err(Error::InvalidConfig(format!("covariate column {c} out of range")));
            }
            names.push(data.names()[c].clone());
            cols.push((0..n).map(|i| data.values()[(i, c)]).collect());
        }
        let x = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
        RegressionData::with_names(y.values().clone(), x, names)
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn d1(&self) -> usize {
        self.y.ncols()
    }

    pub fn d2(&self) -> usize {
        self.x.ncols()
    }

    pub fn select_covariates(&self, idx: &[usize]) -> RegressionData {
        let x = DMatrix::from_fn(self.n(), idx.len(), |i, j| self.x[(i, idx[j])]);
        let names = idx.iter().map(|&j| self.covariate_names[j].clone()).collect();
        RegressionData { y: self.y.clone(), x, covariate_names: names }
    }
}

/// Coefficient prior `(ν, Λ)` with a residual prior for one structure.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionHyper {
    pub nu: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    pub cov: Hyper,
}

fn check_lambda(lambda: &DMatrix<f64>) -> Result<()> {
    if lambda.nrows() != lambda.ncols() {
        return Err(Error::DimensionMismatch { expected: lambda.nrows(), found: lambda.ncols() });
    }
    if lambda.nrows() > 0 {
        SymMatrix::new(lambda.clone())?.cholesky()?;
    }
    Ok(())
}

impl RegressionHyper {
    pub fn new(nu: DMatrix<f64>, lambda: DMatrix<f64>, cov: Hyper) -> Result<RegressionHyper> {
        check_lambda(&lambda)?;
        if nu.ncols() != lambda.nrows() {
            return Err(Error::DimensionMismatch { expected: lambda.nrows(), found: nu.ncols() });
        }
        cov.check_dim(nu.nrows())?;
        Ok(RegressionHyper { nu, lambda, cov })
    }

    fn check(&self, data: &RegressionData) -> Result<()> {
        if self.nu.nrows() != data.d1() {
            return Err(Error::DimensionMismatch { expected: data.d1(), found: self.nu.nrows() });
        }
        if self.nu.ncols() != data.d2() || self.lambda.nrows() != data.d2() {
            return Err(Error::DimensionMismatch { expected: data.d2(), found: self.nu.ncols() });
        }
        self.cov.check_dim(data.d1())
    }
}

/// Coefficient prior template with one residual prior per structure.
/// Subsets of covariates slice `ν` and `Λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PriorsDoc", into = "PriorsDoc")]
pub struct RegressionPriors {
    pub nu: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    pub covs: HyperTriple,
}

#[derive(Serialize, Deserialize)]
struct PriorsDoc {
    nu: Vec<Vec<f64>>,
    lambda: Vec<Vec<f64>>,
    covs: HyperTriple,
}

fn from_rows(rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidConfig("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl TryFrom<PriorsDoc> for RegressionPriors {
    type Error = Error;

    fn try_from(doc: PriorsDoc) -> Result<RegressionPriors> {
        let d2 = doc.lambda.len();
        let nu = from_rows(&doc.nu, d2)?;
        let lambda = from_rows(&doc.lambda, d2)?;
        RegressionPriors::new(nu, lambda, doc.covs)
    }
}

impl From<RegressionPriors> for PriorsDoc {
    fn from(p: RegressionPriors) -> PriorsDoc {
        PriorsDoc { nu: to_rows(&p.nu), lambda: to_rows(&p.lambda), covs: p.covs }
    }
}

impl RegressionPriors {
    pub fn new(nu: DMatrix<f64>, lambda: DMatrix<f64>, covs: HyperTriple) -> Result<RegressionPriors> {
        for s in Structure::ALL {
            RegressionHyper::new(nu.clone(), lambda.clone(), covs.get(s).clone())?;
        }
        Ok(RegressionPriors { nu, lambda, covs })
    }

    /// `ν = 0`, `Λ = I`, shape α everywhere, `B = βI` and rates β.
    pub fn standard(d1: usize, d2: usize, alpha: f64, beta: f64) -> Result<RegressionPriors> {
        let covs = HyperTriple {
            a: Hyper::wishart(alpha, SymMatrix::scaled_identity(d1, beta))?,
            d: Hyper::gamma_vec(alpha, vec![beta; d1])?,
            c: Hyper::gamma(alpha, beta)?,
        };
        RegressionPriors::new(DMatrix::zeros(d1, d2), DMatrix::identity(d2, d2), covs)
    }

    pub fn slice(&self, idx: &[usize]) -> RegressionPriors {
        let nu = DMatrix::from_fn(self.nu.nrows(), idx.len(), |i, j| self.nu[(i, idx[j])]);
        let lambda = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.lambda[(idx[i], idx[j])]);
        RegressionPriors { nu, lambda, covs: self.covs.clone() }
    }

    pub fn for_structure(&self, s: Structure) -> RegressionHyper {
        RegressionHyper { nu: self.nu.clone(), lambda: self.lambda.clone(), cov: self.covs.get(s).clone() }
    }
}

fn cross(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * b
}

/// `γ̂ = (YᵀX + νΛ)(XᵀX + Λ)⁻¹`.
pub fn fit_coefficients(data: &RegressionData, nu: &DMatrix<f64>, lambda: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    let d2 = data.d2();
    if lambda.nrows() != d2 || nu.ncols() != d2 || nu.nrows() != data.d1() {
        return Err(Error::DimensionMismatch { expected: d2, found: lambda.nrows() });
    }
    if d2 == 0 {
        return Ok(DMatrix::zeros(data.d1(), 0));
    }
    let precision = SymMatrix::new(cross(&data.x, &data.x) + lambda)?;
    let rhs = cross(&data.y, &data.x) + nu * lambda;
    // γ̂ P = rhs with P symmetric, so γ̂ᵀ = P⁻¹ rhsᵀ.
    Ok(precision.cholesky()?.solve(&rhs.transpose()).transpose())
}

/// Residual scatter of `ε̂ᵢ = yᵢ − γ̂ xᵢ`.
pub fn residual_stats(data: &RegressionData, gamma: &DMatrix<f64>) -> Result<SuffStats> {
    if gamma.nrows() != data.d1() || gamma.ncols() != data.d2() {
        return Err(Error::DimensionMismatch { expected: data.d2(), found: gamma.ncols() });
    }
    let resid = &data.y - &data.x * gamma.transpose();
    let ds = Dataset::new(resid)?;
    Ok(crate::data::suff_stats(&ds))
}

/// Quantities shared by all residual structures.
#[derive(Debug, Clone)]
struct Posterior {
    gamma_hat: DMatrix<f64>,
    /// `R = Σ ε̂ε̂ᵀ + (γ̂−ν)Λ(γ̂−ν)ᵀ` as sufficient statistics over n.
    r: SuffStats,
    /// `log|Λ| − log|XᵀX + Λ|`, zero without covariates.
    log_det_ratio: f64,
    precision: Option<SymMatrix>,
}

fn posterior(data: &RegressionData, rh: &RegressionHyper) -> Result<Posterior> {
    rh.check(data)?;
    let gamma_hat = fit_coefficients(data, &rh.nu, &rh.lambda)?;
    let residuals = residual_stats(data, &gamma_hat)?;
    if data.d2() == 0 {
        return Ok(Posterior { gamma_hat, r: residuals, log_det_ratio: 0.0, precision: None });
    }
    let diff = &gamma_hat - &rh.nu;
    let shrink = SymMatrix::new(&diff * &rh.lambda * diff.transpose())?;
    let r = SuffStats::from_scatter(data.n(), residuals.s.add(&shrink)?);
    let lambda = SymMatrix::new(rh.lambda.clone())?;
    let precision = SymMatrix::new(cross(&data.x, &data.x) + &rh.lambda)?;
    let log_det_ratio = lambda.cholesky()?.log_det() - precision.cholesky()?.log_det();
    Ok(Posterior { gamma_hat, r, log_det_ratio, precision: Some(precision) })
}

/// Log evidence of the regression model with the residual structure of
/// `rh.cov`.
pub fn log_evidence_regression(data: &RegressionData, rh: &RegressionHyper) -> Result<f64> {
    let post = posterior(data, rh)?;
    Ok(log_evidence(&rh.cov, &post.r)? + data.d1() as f64 / 2.0 * post.log_det_ratio)
}

/// Gaussian log-likelihood of `(γ, H)`.
pub fn log_likelihood_regression(data: &RegressionData, gamma: &DMatrix<f64>, theta: &HalfPrecision) -> Result<f64> {
    let stats = residual_stats(data, gamma)?;
    crate::structures::log_likelihood(theta, &stats)
}

fn log_matrix_normal(h: &HalfPrecision, gamma: &DMatrix<f64>, mean: &DMatrix<f64>, lambda: &DMatrix<f64>) -> Result<f64> {
    let d1 = gamma.nrows() as f64;
    let d2 = gamma.ncols() as f64;
    if gamma.ncols() == 0 {
        return Ok(0.0);
    }
    let diff = gamma - mean;
    let q = SymMatrix::new(&diff * lambda * diff.transpose())?;
    let log_det_lambda = SymMatrix::new(lambda.clone())?.cholesky()?.log_det();
    Ok(d2 / 2.0 * h.log_det() + d1 / 2.0 * log_det_lambda - d1 * d2 / 2.0 * PI.ln() - h.to_full().trace_product(&q))
}

/// Joint prior log density of `(γ, H)`.
pub fn log_joint_prior(rh: &RegressionHyper, gamma: &DMatrix<f64>, theta: &HalfPrecision) -> Result<f64> {
    Ok(log_matrix_normal(theta, gamma, &rh.nu, &rh.lambda)? + log_prior_density(&rh.cov, theta)?)
}

fn log_joint_posterior(data: &RegressionData, rh: &RegressionHyper, gamma: &DMatrix<f64>, theta: &HalfPrecision) -> Result<f64> {
    let post = posterior(data, rh)?;
    let cov_post = conjugate_update(&rh.cov, &post.r)?;
    let normal = match &post.precision {
        Some(p) => log_matrix_normal(theta, gamma, &post.gamma_hat, p.as_matrix())?,
        None => 0.0,
    };
    Ok(normal + log_prior_density(&cov_post, theta)?)
}

/// Joint posterior-minus-prior log density at `(γ, H)`.
pub fn flexibility_regression(data: &RegressionData, rh: &RegressionHyper, gamma: &DMatrix<f64>, theta: &HalfPrecision) -> Result<f64> {
    Ok(log_joint_posterior(data, rh, gamma, theta)? - log_joint_prior(rh, gamma, theta)?)
}

/// Joint posterior mode: `γ̂` with the mode of `H` given `γ̂`, which gains
/// `d₂/2` in shape from the coefficient density.
pub fn joint_map(data: &RegressionData, rh: &RegressionHyper) -> Result<(DMatrix<f64>, HalfPrecision)> {
    let post = posterior(data, rh)?;
    let d1 = data.d1() as f64;
    let d2 = data.d2() as f64;
    let (mult, theta) = match conjugate_update(&rh.cov, &post.r)? {
        Hyper::Wishart { alpha, rate } => {
            let mult = alpha + d2 / 2.0 - (d1 + 1.0) / 2.0;
            (mult, mult.is_sign_positive().then(|| rate.inverse().map(|r| r.scale(mult))))
        }
        Hyper::GammaVec { alpha, rates } => {
            let mult = alpha + d2 / 2.0 - 1.0;
            (mult, Some(Ok(SymMatrix::from_diagonal(&rates.iter().map(|b| mult / b).collect::<Vec<_>>()))))
        }
        Hyper::Gamma { alpha, rate } => {
            let mult = alpha + d1 * d2 / 2.0 - 1.0;
            (mult, Some(Ok(SymMatrix::scaled_identity(data.d1(), mult / rate))))
        }
    };
    if !(mult > 0.0) {
        return Err(Error::NonRegularPrior(mult));
    }
    let h = theta.expect("multiplier is positive")?;
    let theta = match rh.cov.structure() {
        Structure::A => HalfPrecision::full(h)?,
        Structure::D => HalfPrecision::diag(h.diagonal())?,
        Structure::C => HalfPrecision::iso(h.get(0, 0), data.d1())?,
    };
    Ok((post.gamma_hat, theta))
}

/// Evidence, flexibility and the BIC family at the joint MAP. `k` counts
/// the coefficients as well as the residual parameters; KIC is not
/// reported.
pub fn fit_regression(data: &RegressionData, rh: &RegressionHyper) -> Result<FitReport> {
    let (gamma, map) = joint_map(data, rh)?;
    let structure = rh.cov.structure();
    let k = structure.k(data.d1()) + data.d1() * data.d2();
    let log_lik = log_likelihood_regression(data, &gamma, &map)?;
    let log_prior = log_joint_prior(rh, &gamma, &map)?;
    let flex = flexibility_regression(data, rh, &gamma, &map)?;
    let (bic, pc_bic) = if data.n() == 0 {
        (None, None)
    } else {
        let bic = log_lik - k as f64 / 2.0 * (data.n() as f64).ln();
        (Some(bic), Some(bic + log_prior))
    };
    Ok(FitReport {
        structure,
        k,
        n: data.n(),
        map,
        log_lik_at_map: log_lik,
        log_prior_at_map: log_prior,
        log_evidence: log_evidence_regression(data, rh)?,
        flexibility_at_map: flex,
        bic,
        pc_bic,
        kic: None,
    })
}

/// Results for one covariate subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    /// Covariate names joined by commas in data-column order; `(none)` for
    /// the empty subset.
    pub subset_id: String,
    pub columns: Vec<usize>,
    pub gamma_hat: Vec<Vec<f64>>,
    pub residuals: SuffStats,
    /// Reports in the order C, D, A.
    pub fits: Vec<FitReport>,
}

impl RegressionFit {
    pub fn best_evidence(&self) -> f64 {
        self.fits.iter().map(|f| f.log_evidence).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn fit(&self, s: Structure) -> Option<&FitReport> {
        self.fits.iter().find(|f| f.structure == s)
    }
}

/// Upper limit on candidate covariates for subset enumeration.
pub const MAX_CANDIDATES: usize = 20;

/// Fits every structure on one covariate subset.
pub fn fit_subset(data: &RegressionData, priors: &RegressionPriors, columns: &[usize]) -> Result<RegressionFit> {
    let sub = data.select_covariates(columns);
    let pri = priors.slice(columns);
    let gamma = fit_coefficients(&sub, &pri.nu, &pri.lambda)?;
    let residuals = residual_stats(&sub, &gamma)?;
    let fits = Structure::ALL
        .iter()
        .map(|s| fit_regression(&sub, &pri.for_structure(*s)))
        .collect::<Result<Vec<_>>>()?;
    let subset_id = if columns.is_empty() { "(none)".to_string() } else { sub.covariate_names.join(",") };
    Ok(RegressionFit { subset_id, columns: columns.to_vec(), gamma_hat: to_rows(&gamma), residuals, fits })
}

/// Fits every nonempty subset of `candidates` (plus the empty subset when
/// asked), sorted by the best log evidence across structures. The result
/// does not depend on the order of `candidates`.
pub fn enumerate_covariates(
    data: &RegressionData,
    candidates: &[usize],
    priors: &RegressionPriors,
    include_empty: bool,
) -> Result<Vec<RegressionFit>> {
    let mut cand = candidates.to_vec();
    cand.sort_unstable();
    cand.dedup();
    if cand.len() > MAX_CANDIDATES {
        return Err(Error::LimitExceeded(format!(
            "{} candidate covariates exceed the limit of {MAX_CANDIDATES}",
            cand.len()
        )));
    }
    if let Some(&c) = cand.iter().find(|&&c| c >= data.d2()) {
        return Err(Error::InvalidConfig(format!("candidate column {c} out of range")));
    }
    let start = if include_empty { 0u32 } else { 1u32 };
    let masks: Vec<u32> = (start..(1u32 << cand.len())).collect();
    let mut fits = masks
        .par_iter()
        .map(|mask| {
            let cols: Vec<usize> = cand.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, c)| *c).collect();
            fit_subset(data, priors, &cols)
        })
        .collect::<Result<Vec<_>>>()?;
    // Stable sort keeps the canonical subset order among ties.
    fits.sort_by(|a, b| b.best_evidence().total_cmp(&a.best_evidence()));
    Ok(fits)
}

/// One point on the penalty curves of a single-response model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub lambda: f64,
    pub flexibility: f64,
    pub bic_penalty: f64,
    pub pcbic_penalty: f64,
    pub log_evidence: f64,
    pub log_lik_at_map: f64,
    /// Flagged for `λ < ½`.
    pub non_regular: bool,
}

/// Below this λ the prior is flagged as non-regular.
pub const LAMBDA_REGULAR_FROM: f64 = 0.5;

/// The single-response prior indexed by λ: `η ~ Gamma(1, λ²/2)` and
/// `γ | η ~ N(0, I/(λ²η))`, i.e. `Λ = (λ²/2)·I` and `ν = 0`.
pub fn lambda_hyper(lambda: f64, d2: usize) -> Result<RegressionHyper> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
    }
    let half = lambda * lambda / 2.0;
    RegressionHyper::new(DMatrix::zeros(1, d2), DMatrix::identity(d2, d2) * half, Hyper::gamma(1.0, half)?)
}

/// Penalties and evidence along a grid of λ.
pub fn lambda_path(data: &RegressionData, lambdas: &[f64]) -> Result<Vec<LambdaRow>> {
    if data.d1() != 1 {
        return Err(Error::InvalidConfig(format!("the lambda path needs one response, got {}", data.d1())));
    }
    if data.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    let log_n = (data.n() as f64).ln();
    lambdas
        .iter()
        .map(|&lambda| {
            let rh = lambda_hyper(lambda, data.d2())?;
            let fit = fit_regression(data, &rh)?;
            let bic_penalty = fit.k as f64 / 2.0 * log_n;
            Ok(LambdaRow {
                lambda,
                flexibility: fit.flexibility_at_map,
                bic_penalty,
                pcbic_penalty: bic_penalty - fit.log_prior_at_map,
                log_evidence: fit.log_evidence,
                log_lik_at_map: fit.log_lik_at_map,
                non_regular: lambda < LAMBDA_REGULAR_FROM,
            })
        })
        .collect()
}

/// Sum of squares helper kept exact for reproducible residual checks.
pub fn total_sum_of_squares(m: &DMatrix<f64>) -> f64 {
    exact_sum(m.iter().map(|v| v * v))
}
