//! Limit constants for Bayes factors and flexibility, and simulation
//! studies that check them.
//!
//! For nested structures `N ⊂ F` with `k > ℓ` free parameters, the log Bayes
//! factor `log(E_F/E_N)` drifts like `−(k−ℓ)/2 · log n` when N generated the
//! data and grows linearly in n otherwise. The linear rate depends on the
//! second moment `V` of the data through a Hadamard or AM/GM ratio, both of
//! which are scale free.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::montecarlo::sample_scatter;
use crate::priors::{matched_triple, prior_sample_size, sample_half_precision, Hyper};
use crate::rng;
use crate::specialfn::{amgm_half_log_ratio, amgm_half_log_ratio_vec, hadamard_half_log_ratio, SymMatrix};
use crate::structures::{criteria, laplace_gap, log_evidence, HalfPrecision, Structure};

/// A full structure and one nested inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pair {
    #[serde(rename = "A-vs-D")]
    AvsD,
    #[serde(rename = "A-vs-C")]
    AvsC,
    #[serde(rename = "D-vs-C")]
    DvsC,
}

impl Pair {
    pub const ALL: [Pair; 3] = [Pair::AvsD, Pair::AvsC, Pair::DvsC];

    pub fn full(self) -> Structure {
        match self {
            Pair::AvsD | Pair::AvsC => Structure::A,
            Pair::DvsC => Structure::D,
        }
    }

    pub fn nested(self) -> Structure {
        match self {
            Pair::AvsD => Structure::D,
            Pair::AvsC | Pair::DvsC => Structure::C,
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-vs-{}", self.full(), self.nested())
    }
}

impl FromStr for Pair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Pair> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphabetic()).collect::<String>().to_ascii_uppercase();
        match key.as_str() {
            "AVSD" | "AD" => Ok(Pair::AvsD),
            "AVSC" | "AC" => Ok(Pair::AvsC),
            "DVSC" | "DC" => Ok(Pair::DvsC),
            _ => Err(Error::InvalidConfig(format!("unknown pair '{s}' (expected A-vs-D, A-vs-C or D-vs-C)"))),
        }
    }
}

/// Both divergence rates for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    pub pair: Pair,
    /// Slope against `log n` when the nested structure is true.
    pub log_rate: f64,
    /// Slope against `n` when only the full structure is true.
    pub linear_rate: f64,
    pub k: usize,
    pub l: usize,
}

impl RateConstants {
    pub fn new(pair: Pair, v: &SecondMoment) -> Result<RateConstants> {
        let d = v.v.dim();
        Ok(RateConstants {
            pair,
            log_rate: log_rate_constant(pair, d),
            linear_rate: linear_rate_constant(pair, v)?,
            k: pair.full().k(d),
            l: pair.nested().k(d),
        })
    }
}

/// Second moment matrix `V` of one observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondMoment {
    pub v: SymMatrix,
    /// Diagonal of `V`, the per-axis moments used for D versus C.
    pub per_axis: Vec<f64>,
}

impl SecondMoment {
    pub fn new(v: SymMatrix) -> Result<SecondMoment> {
        v.cholesky()?;
        let per_axis = v.diagonal();
        Ok(SecondMoment { v, per_axis })
    }

    /// The moment matrix attributed to a prior-drawn truth:
    /// `(2α−(d−1))/(2α−(d+1))·B` for structure A and `2α/(2α−2)·β_j` per
    /// axis for D, with C treated as D with equal rates.
    ///
    /// This is a multiple of the exact marginal moment
    /// (see [`crate::priors::marginal_second_moment`]), larger by the
    /// factor `2α−d+1`. The rate constants only depend on `V` up to scale,
    /// so they are unaffected.
    pub fn from_prior(h: &Hyper, d: usize) -> Result<SecondMoment> {
        h.check_dim(d)?;
        let m = prior_sample_size(h, d);
        if !m.regular {
            return Err(Error::NonRegularPrior(m.m));
        }
        let df = d as f64;
        let v = match h {
            Hyper::Wishart { alpha, rate } => rate.scale((2.0 * alpha - (df - 1.0)) / (2.0 * alpha - (df + 1.0))),
            Hyper::GammaVec { alpha, rates } => {
                let c = 2.0 * alpha / (2.0 * alpha - 2.0);
                SymMatrix::from_diagonal(&rates.iter().map(|b| c * b).collect::<Vec<_>>())
            }
            Hyper::Gamma { alpha, rate } => {
                // Matched to D: shape (w+2)/2, rates β/d.
                let w = (2.0 * alpha - 2.0) / df;
                let alpha_d = (w + 2.0) / 2.0;
                SymMatrix::scaled_identity(d, 2.0 * alpha_d / (2.0 * alpha_d - 2.0) * rate / df)
            }
        };
        SecondMoment::new(v)
    }

    /// For a fixed truth the moment is the covariance itself.
    pub fn from_truth(theta: &HalfPrecision) -> Result<SecondMoment> {
        SecondMoment::new(theta.covariance())
    }
}

/// `−(k−ℓ)/2`.
pub fn log_rate_constant(pair: Pair, d: usize) -> f64 {
    let k = pair.full().k(d) as f64;
    let l = pair.nested().k(d) as f64;
    -(k - l) / 2.0
}

/// Limit of `n⁻¹ log(E_F/E_N)` when the data have second moment `V` and
/// the nested structure is false.
pub fn linear_rate_constant(pair: Pair, v: &SecondMoment) -> Result<f64> {
    match pair {
        Pair::AvsD => hadamard_half_log_ratio(&v.v),
        Pair::AvsC => amgm_half_log_ratio(&v.v),
        Pair::DvsC => amgm_half_log_ratio_vec(&v.per_axis),
    }
}

/// `−log ρ(θ₀) + ½ log|Ä(θ₀)/(2π)|`, the limit of flexibility at the MAP
/// minus `(k/2) log n`.
pub fn limiting_gap(h: &Hyper, theta0: &HalfPrecision) -> Result<f64> {
    let m = prior_sample_size(h, theta0.dim());
    if !m.regular {
        return Err(Error::NonRegularPrior(m.m));
    }
    laplace_gap(h, theta0)
}

/// Where the data come from in a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Truth {
    /// One fixed half-precision for every replicate.
    Fixed { theta: HalfPrecision },
    /// A fresh draw per replicate from the study prior matched to
    /// `structure`.
    Prior { structure: Structure },
}

impl Truth {
    pub fn structure(&self) -> Structure {
        match self {
            Truth::Fixed { theta } => theta.structure(),
            Truth::Prior { structure } => *structure,
        }
    }
}

/// Configuration of a Bayes-factor rate study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudyConfig {
    pub pair: Pair,
    pub d: usize,
    pub truth: Truth,
    /// Any prior; the evaluation priors are the matched triple built from it.
    pub hyper: Hyper,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
}

impl RateStudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidConfig("d must be positive".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be at least 1".into()));
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(Error::InvalidConfig("n grid must be nonempty and positive".into()));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("n grid must be strictly increasing".into()));
        }
        if let Truth::Fixed { theta } = &self.truth {
            if theta.dim() != self.d {
                return Err(Error::DimensionMismatch { expected: self.d, found: theta.dim() });
            }
        }
        self.hyper.check_dim(self.d)
    }

    /// Whether the nested structure generated the data (logarithmic drift).
    pub fn nested_true(&self) -> bool {
        self.truth.structure() <= self.pair.nested()
    }
}

/// One n of a rate study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    /// Mean of `log(E_F/E_N)` divided by `log n` or `n`.
    pub scaled_statistic: f64,
    pub se: f64,
    /// Mean unscaled log Bayes factor and its standard error.
    pub log_bf: f64,
    pub log_bf_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudy {
    pub pair: Pair,
    pub truth: Structure,
    /// `log n` for nested-true studies, `n` otherwise.
    pub scale: String,
    /// Theoretical limit of the scaled statistic, when known.
    pub target: Option<f64>,
    pub rows: Vec<RateRow>,
    /// Least-squares slope of the mean log Bayes factor against the scale;
    /// absent for a single-point grid.
    pub slope: Option<f64>,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let est = crate::priors::McEstimate::from_samples(values);
    (est.estimate, est.std_error)
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Simulates `log(E_F/E_N)` across an n grid.
pub fn rate_study(config: &RateStudyConfig) -> Result<RateStudy> {
    config.validate()?;
    let d = config.d;
    let hypers = matched_triple(&config.hyper, d)?;
    let full = hypers.get(config.pair.full()).clone();
    let nested = hypers.get(config.pair.nested()).clone();
    let truth_prior = hypers.get(config.truth.structure()).clone();
    let nested_true = config.nested_true();

    let target = if nested_true {
        Some(log_rate_constant(config.pair, d))
    } else {
        match &config.truth {
            Truth::Fixed { theta } => Some(linear_rate_constant(config.pair, &SecondMoment::from_truth(theta)?)?),
            // The limit is random when the truth is redrawn.
            Truth::Prior { .. } => None,
        }
    };

    let mut rows = Vec::with_capacity(config.n_grid.len());
    for (ni, &n) in config.n_grid.iter().enumerate() {
        let raw: Vec<f64> = (0..config.reps)
            .into_par_iter()
            .map(|rep| {
                let mut r = rng::stream(config.seed, &[ni as u64, rep as u64]);
                let theta = match &config.truth {
                    Truth::Fixed { theta } => theta.clone(),
                    Truth::Prior { .. } => sample_half_precision(&truth_prior, d, &mut r)?,
                };
                let stats = sample_scatter(&theta.covariance(), n, &mut r)?;
                Ok(log_evidence(&full, &stats)? - log_evidence(&nested, &stats)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        let scale = if nested_true { (n as f64).ln() } else { n as f64 };
        let (log_bf, log_bf_se) = mean_se(&raw);
        let scaled: Vec<f64> = raw.iter().map(|v| v / scale).collect();
        let (scaled_statistic, se) = mean_se(&scaled);
        rows.push(RateRow { n, scaled_statistic, se, log_bf, log_bf_se });
    }
    let xs: Vec<f64> = rows
        .iter()
        .map(|r| if nested_true { (r.n as f64).ln() } else { r.n as f64 })
        .collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.log_bf).collect();
    Ok(RateStudy {
        pair: config.pair,
        truth: config.truth.structure(),
        scale: if nested_true { "log n".into() } else { "n".into() },
        target,
        slope: ls_slope(&xs, &ys),
        rows,
    })
}

impl RateStudy {
    /// CSV with columns `n, scaled_statistic, se, target, pair, truth`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["n", "scaled_statistic", "se", "target", "pair", "truth"]).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                format!("{:.17e}", r.scaled_statistic),
                format!("{:.17e}", r.se),
                self.target.map(|t| format!("{t:.17e}")).unwrap_or_default(),
                self.pair.to_string(),
                self.truth.to_string(),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Configuration of a flexibility-gap study for a fixed truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapStudyConfig {
    pub hyper: Hyper,
    pub theta0: HalfPrecision,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n: usize,
    /// Mean of `F(θ̂ₙ) − (k/2) log n`.
    pub mean_excess: f64,
    pub se: f64,
    /// Mean of `|F(θ̂ₙ) − (k/2) log n − gap|`.
    pub mean_abs_error: f64,
    /// Mean of `|F(θ̂ₙ) − κ(θ̂ₙ)|`, the distance to the KIC penalty.
    pub mean_abs_kic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapStudy {
    pub gap: f64,
    pub rows: Vec<GapRow>,
}

/// Compares flexibility at the MAP with `(k/2) log n + gap` and with the
/// KIC penalty as n grows.
pub fn gap_study(config: &GapStudyConfig) -> Result<GapStudy> {
    if config.reps == 0 || config.n_grid.is_empty() || config.n_grid.contains(&0) {
        return Err(Error::InvalidConfig("gap study needs reps >= 1 and a positive n grid".into()));
    }
    let h = &config.hyper;
    let theta0 = &config.theta0;
    if h.structure() != theta0.structure() {
        return Err(Error::InvalidConfig("prior and truth must share a structure".into()));
    }
    let d = theta0.dim();
    let k = theta0.structure().k(d) as f64;
    let gap = limiting_gap(h, theta0)?;
    let sigma = theta0.covariance();
    let mut rows = Vec::new();
    for (ni, &n) in config.n_grid.iter().enumerate() {
        let half_log_n = k / 2.0 * (n as f64).ln();
        let triples: Vec<(f64, f64)> = (0..config.reps)
            .into_par_iter()
            .map(|rep| {
                let mut r = rng::stream(config.seed, &[ni as u64, rep as u64]);
                let stats = sample_scatter(&sigma, n, &mut r)?;
                let fit = criteria(h, &stats)?;
                let kappa = half_log_n + laplace_gap(h, &fit.map)?;
                Ok((fit.flexibility_at_map - half_log_n, fit.flexibility_at_map - kappa))
            })
            .collect::<Result<Vec<_>>>()?;
        let excess: Vec<f64> = triples.iter().map(|t| t.0).collect();
        let (mean_excess, se) = mean_se(&excess);
        let reps = config.reps as f64;
        rows.push(GapRow {
            n,
            mean_excess,
            se,
            mean_abs_error: excess.iter().map(|e| (e - gap).abs()).sum::<f64>() / reps,
            mean_abs_kic: triples.iter().map(|t| t.1.abs()).sum::<f64>() / reps,
        });
    }
    Ok(GapStudy { gap, rows })
}
