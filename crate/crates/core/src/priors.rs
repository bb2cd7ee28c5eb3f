//! Conjugate priors on the half-precision `H = ½Σ⁻¹`.
//!
//! Structure A takes a Wishart prior in the rate parameterization
//!
//! ```text
//! ρ(H) = |B|^α / Γ_d(α) · |H|^{α−(d+1)/2} · exp(−tr(BH))
//! ```
//!
//! which is the textbook Wishart with `2α` degrees of freedom and scale
//! `(2B)⁻¹`. Structure D puts independent gamma(α, β_j) priors on the
//! diagonal and structure C a single gamma(α, β) prior on the common value.
//! All gammas use the shape-rate convention.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::SuffStats;
use crate::error::{Error, Result};
use crate::specialfn::{ln_gamma, log_mv_gamma, SymMatrix};
use crate::structures::{HalfPrecision, Structure};

/// Conjugate hyperparameters for one structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HyperDoc", into = "HyperDoc")]
pub enum Hyper {
    /// Structure A: shape α and PD rate matrix B.
    Wishart { alpha: f64, rate: SymMatrix },
    /// Structure D: a shared shape and one rate per axis.
    GammaVec { alpha: f64, rates: Vec<f64> },
    /// Structure C: shape and rate of the common diagonal value.
    Gamma { alpha: f64, rate: f64 },
}

fn check_shape(alpha: f64, bound: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= bound {
        return Err(Error::Domain(format!("shape {alpha} must exceed {bound}")));
    }
    Ok(())
}

fn check_rate(beta: f64) -> Result<()> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::Domain(format!("rate {beta} must be positive")));
    }
    Ok(())
}

impl Hyper {
    pub fn wishart(alpha: f64, rate: SymMatrix) -> Result<Hyper> {
        check_shape(alpha, (rate.dim() as f64 - 1.0) / 2.0)?;
        rate.cholesky()?;
        Ok(Hyper::Wishart { alpha, rate })
    }

    pub fn gamma_vec(alpha: f64, rates: Vec<f64>) -> Result<Hyper> {
        check_shape(alpha, 0.0)?;
        if rates.is_empty() {
            return Err(Error::Domain("rate vector is empty".into()));
        }
        rates.iter().try_for_each(|b| check_rate(*b))?;
        Ok(Hyper::GammaVec { alpha, rates })
    }

    pub fn gamma(alpha: f64, rate: f64) -> Result<Hyper> {
        check_shape(alpha, 0.0)?;
        check_rate(rate)?;
        Ok(Hyper::Gamma { alpha, rate })
    }

    pub fn structure(&self) -> Structure {
        match self {
            Hyper::Wishart { .. } => Structure::A,
            Hyper::GammaVec { .. } => Structure::D,
            Hyper::Gamma { .. } => Structure::C,
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            Hyper::Wishart { alpha, .. } | Hyper::GammaVec { alpha, .. } | Hyper::Gamma { alpha, .. } => {
                *alpha
            }
        }
    }

    /// Dimension fixed by the hyperparameters, if any. A scalar gamma prior
    /// fits every dimension.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Hyper::Wishart { rate, .. } => Some(rate.dim()),
            Hyper::GammaVec { rates, .. } => Some(rates.len()),
            Hyper::Gamma { .. } => None,
        }
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        match self.dim() {
            Some(k) if k != d => Err(Error::DimensionMismatch { expected: k, found: d }),
            _ => Ok(()),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RateDoc {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Serialize, Deserialize)]
struct HyperDoc {
    structure: Structure,
    alpha: f64,
    rate: RateDoc,
}

impl TryFrom<HyperDoc> for Hyper {
    type Error = Error;

    fn try_from(doc: HyperDoc) -> Result<Hyper> {
        match (doc.structure, doc.rate) {
            (Structure::A, RateDoc::Matrix(rows)) => Hyper::wishart(doc.alpha, SymMatrix::from_rows(&rows)?),
            (Structure::A, RateDoc::Scalar(b)) => Hyper::wishart(doc.alpha, SymMatrix::from_rows(&[vec![b]])?),
            (Structure::D, RateDoc::Vector(rates)) => Hyper::gamma_vec(doc.alpha, rates),
            (Structure::C, RateDoc::Scalar(b)) => Hyper::gamma(doc.alpha, b),
            (s, _) => Err(Error::InvalidConfig(format!(
                "rate shape does not fit structure {s}: A takes a matrix, D a vector, C a scalar"
            ))),
        }
    }
}

impl From<Hyper> for HyperDoc {
    fn from(h: Hyper) -> HyperDoc {
        let structure = h.structure();
        match h {
            Hyper::Wishart { alpha, rate } => HyperDoc { structure, alpha, rate: RateDoc::Matrix(rate.to_rows()) },
            Hyper::GammaVec { alpha, rates } => HyperDoc { structure, alpha, rate: RateDoc::Vector(rates) },
            Hyper::Gamma { alpha, rate } => HyperDoc { structure, alpha, rate: RateDoc::Scalar(rate) },
        }
    }
}

/// One prior per structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperTriple {
    pub a: Hyper,
    pub d: Hyper,
    pub c: Hyper,
}

impl HyperTriple {
    pub fn get(&self, s: Structure) -> &Hyper {
        match s {
            Structure::A => &self.a,
            Structure::D => &self.d,
            Structure::C => &self.c,
        }
    }
}

/// Prior weight in units of observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSampleSize {
    pub m: f64,
    /// False when `m ≤ 0`; the prior then has no interior mode.
    pub regular: bool,
}

fn sample_size_of(s: Structure, alpha: f64, d: usize) -> f64 {
    let d = d as f64;
    match s {
        Structure::A => 2.0 * alpha - (d + 1.0),
        Structure::D => 2.0 * alpha - 2.0,
        Structure::C => (2.0 * alpha - 2.0) / d,
    }
}

fn shape_for(s: Structure, m: f64, d: usize) -> f64 {
    let d = d as f64;
    match s {
        Structure::A => (m + d + 1.0) / 2.0,
        Structure::D => (m + 2.0) / 2.0,
        Structure::C => (m * d + 2.0) / 2.0,
    }
}

pub fn prior_sample_size(h: &Hyper, d: usize) -> PriorSampleSize {
    let m = sample_size_of(h.structure(), h.alpha(), d);
    PriorSampleSize { m, regular: m > 0.0 }
}

/// Posterior hyperparameters after observing `stats`.
pub fn conjugate_update(h: &Hyper, stats: &SuffStats) -> Result<Hyper> {
    h.check_dim(stats.d)?;
    let half_n = stats.n as f64 / 2.0;
    Ok(match h {
        Hyper::Wishart { alpha, rate } => Hyper::Wishart {
            alpha: alpha + half_n,
            rate: rate.add(&stats.s)?,
        },
        Hyper::GammaVec { alpha, rates } => Hyper::GammaVec {
            alpha: alpha + half_n,
            rates: rates.iter().zip(&stats.s_diag).map(|(b, s)| b + s).collect(),
        },
        Hyper::Gamma { alpha, rate } => Hyper::Gamma {
            alpha: alpha + half_n * stats.d as f64,
            rate: rate + stats.s_total,
        },
    })
}

/// Projects a prior onto a nested structure, keeping the prior sample size
/// and taking the rate as the projection of the full rate.
///
/// A → D keeps the diagonal of B (off-diagonal entries are dropped);
/// A → C and D → C sum the diagonal, so `B = βI` maps to `β_C = dβ`.
pub fn match_down(h: &Hyper, target: Structure) -> Result<Hyper> {
    let d = h
        .dim()
        .ok_or_else(|| Error::InvalidConfig("structure C has no nested structure".into()))?;
    if target >= h.structure() {
        return Err(Error::InvalidConfig(format!(
            "{target} is not nested in {}",
            h.structure()
        )));
    }
    let m = prior_sample_size(h, d).m;
    let diag = match h {
        Hyper::Wishart { rate, .. } => rate.diagonal(),
        Hyper::GammaVec { rates, .. } => rates.clone(),
        Hyper::Gamma { .. } => unreachable!(),
    };
    let alpha = shape_for(target, m, d);
    match target {
        Structure::D => Hyper::gamma_vec(alpha, diag),
        Structure::C => Hyper::gamma(alpha, diag.iter().sum()),
        Structure::A => unreachable!(),
    }
}

/// Lifts a nested prior to structure A through the pseudo-inverse of the
/// embedding: `B = diag(β)` from D and `B = (β/d)·I` from C.
pub fn match_up(h: &Hyper, d: usize) -> Result<Hyper> {
    match_to(h, Structure::A, d)
}

/// Rematches `h` to any structure at dimension `d`, moving up or down as
/// needed. The identity when the structure already agrees.
pub fn match_to(h: &Hyper, target: Structure, d: usize) -> Result<Hyper> {
    h.check_dim(d)?;
    let source = h.structure();
    if target == source {
        return Ok(h.clone());
    }
    if target < source {
        return match_down(h, target);
    }
    let m = prior_sample_size(h, d).m;
    let alpha = shape_for(target, m, d);
    let diag = match h {
        Hyper::GammaVec { rates, .. } => rates.clone(),
        Hyper::Gamma { rate, .. } => vec![rate / d as f64; d],
        Hyper::Wishart { .. } => unreachable!(),
    };
    match target {
        Structure::A => Hyper::wishart(alpha, SymMatrix::from_diagonal(&diag)),
        Structure::D => Hyper::gamma_vec(alpha, diag),
        Structure::C => unreachable!(),
    }
}

/// The triple of mutually matched priors containing `h`.
pub fn matched_triple(h: &Hyper, d: usize) -> Result<HyperTriple> {
    Ok(HyperTriple {
        a: match_to(h, Structure::A, d)?,
        d: match_to(h, Structure::D, d)?,
        c: match_to(h, Structure::C, d)?,
    })
}

/// A Monte Carlo average with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn from_samples(values: &[f64]) -> McEstimate {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        McEstimate {
            estimate: mean,
            std_error: (var / n).sqrt(),
            samples: values.len(),
        }
    }
}

/// Estimates `E_N[log ρ_N(η) − log ρ_F(Mᵀη)]` with `η` drawn from the nested
/// prior. Matched hyperparameters minimize this objective.
pub fn kl_objective<R: Rng + ?Sized>(
    full: &Hyper,
    nested: &Hyper,
    d: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidConfig("kl_objective needs at least one sample".into()));
    }
    if nested.structure() > full.structure() {
        return Err(Error::InvalidConfig(format!(
            "{} is not nested in {}",
            nested.structure(),
            full.structure()
        )));
    }
    full.check_dim(d)?;
    nested.check_dim(d)?;
    let mut values = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let eta = sample_half_precision(nested, d, rng)?;
        values.push(log_prior_density(nested, &eta)? - log_prior_density(full, &eta)?);
    }
    Ok(McEstimate::from_samples(&values))
}

fn positive_scatter(stats: &SuffStats) -> Result<usize> {
    if stats.n == 0 {
        return Err(Error::EmptyDataset);
    }
    if let Some(j) = stats.s_diag.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateScatter(format!("diagonal entry {j} is zero")));
    }
    stats
        .s
        .cholesky()
        .map_err(|e| Error::DegenerateScatter(e.to_string()))?;
    Ok(stats.n)
}

/// Method-of-moments rates with shapes fixed by a known prior sample size.
pub fn empirical_bayes(stats: &SuffStats, m: f64) -> Result<HyperTriple> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::InvalidConfig(format!("prior sample size {m} must be positive")));
    }
    let n = positive_scatter(stats)? as f64;
    let d = stats.d;
    let alpha_a = shape_for(Structure::A, m, d);
    let alpha_d = shape_for(Structure::D, m, d);
    let alpha_c = shape_for(Structure::C, m, d);
    Ok(HyperTriple {
        a: Hyper::wishart(alpha_a, stats.s.scale((2.0 * alpha_a - d as f64 - 1.0) / n))?,
        d: Hyper::gamma_vec(
            alpha_d,
            stats.s_diag.iter().map(|s| (2.0 * alpha_d - 2.0) * s / n).collect(),
        )?,
        c: Hyper::gamma(alpha_c, (2.0 * alpha_c - 2.0) * stats.s_total / (n * d as f64))?,
    })
}

/// The default regularization of the mclust package: every shape is
/// `(d+2)/2`, `B = 2s/n`, and every gamma rate is `2·tr(s)/(nd)`.
pub fn mclust_default(stats: &SuffStats) -> Result<HyperTriple> {
    let n = positive_scatter(stats)? as f64;
    let d = stats.d;
    let alpha = (d as f64 + 2.0) / 2.0;
    let beta = 2.0 * stats.s_total / (n * d as f64);
    Ok(HyperTriple {
        a: Hyper::wishart(alpha, stats.s.scale(2.0 / n))?,
        d: Hyper::gamma_vec(alpha, vec![beta; d])?,
        c: Hyper::gamma(alpha, beta)?,
    })
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(g.sample(rng))
}

/// Draws a half-precision from the prior. Wishart draws use the Bartlett
/// decomposition of the standard Wishart with `2α` degrees of freedom and
/// scale `(2B)⁻¹`.
pub fn sample_half_precision<R: Rng + ?Sized>(h: &Hyper, d: usize, rng: &mut R) -> Result<HalfPrecision> {
    h.check_dim(d)?;
    match h {
        Hyper::Gamma { alpha, rate } => HalfPrecision::iso(gamma_draw(*alpha, *rate, rng)?, d),
        Hyper::GammaVec { alpha, rates } => {
            let eta = rates
                .iter()
                .map(|b| gamma_draw(*alpha, *b, rng))
                .collect::<Result<Vec<_>>>()?;
            HalfPrecision::diag(eta)
        }
        Hyper::Wishart { alpha, rate } => {
            let df = 2.0 * alpha;
            if df <= d as f64 - 1.0 {
                return Err(Error::Domain(format!("Wishart shape {alpha} too small for d = {d}")));
            }
            let scale = rate.scale(2.0).inverse()?;
            let l = scale.cholesky()?.factor().clone();
            let mut a = DMatrix::<f64>::zeros(d, d);
            for i in 0..d {
                let chi = ChiSquared::new(df - i as f64).map_err(|e| Error::Domain(e.to_string()))?;
                a[(i, i)] = chi.sample(rng).sqrt();
                for j in 0..i {
                    a[(i, j)] = rng.sample(StandardNormal);
                }
            }
            let la = l * a;
            let w = &la * la.transpose();
            HalfPrecision::full(SymMatrix::new(w)?)
        }
    }
}

fn gamma_log_pdf(alpha: f64, beta: f64, x: f64) -> f64 {
    alpha * beta.ln() - ln_gamma(alpha) + (alpha - 1.0) * x.ln() - beta * x
}

/// Log prior density at `theta`.
///
/// A Wishart prior accepts any half-precision through the embedding into
/// full matrices, and a gamma-vector prior accepts isotropic values, so
/// nested parameters can be scored under a larger prior.
pub fn log_prior_density(h: &Hyper, theta: &HalfPrecision) -> Result<f64> {
    h.check_dim(theta.dim())?;
    match (h, theta) {
        (Hyper::Gamma { alpha, rate }, HalfPrecision::Iso { eta, .. }) => Ok(gamma_log_pdf(*alpha, *rate, *eta)),
        (Hyper::GammaVec { alpha, rates }, HalfPrecision::Diag { eta }) => {
            Ok(rates.iter().zip(eta).map(|(b, x)| gamma_log_pdf(*alpha, *b, *x)).sum())
        }
        (Hyper::GammaVec { alpha, rates }, HalfPrecision::Iso { eta, .. }) => {
            Ok(rates.iter().map(|b| gamma_log_pdf(*alpha, *b, *eta)).sum())
        }
        (Hyper::Wishart { alpha, rate }, _) => {
            let d = rate.dim();
            let full = theta.to_full();
            let log_det_h = full.cholesky().map_err(|e| Error::Support(e.to_string()))?.log_det();
            Ok(alpha * rate.cholesky()?.log_det() - log_mv_gamma(d, *alpha)?
                + (alpha - (d as f64 + 1.0) / 2.0) * log_det_h
                - rate.trace_product(&full))
        }
        _ => Err(Error::Support(format!(
            "a structure {} value has no density under a structure {} prior",
            theta.structure(),
            h.structure()
        ))),
    }
}

/// Exact marginal second moment `E[XXᵀ]` of one observation drawn through
/// the prior: `B/(2α−d−1)` for structure A, `β_j/(2α−2)` per axis for D and
/// `β/(2α−2)` for C.
pub fn marginal_second_moment(h: &Hyper, d: usize) -> Result<SymMatrix> {
    h.check_dim(d)?;
    let m = prior_sample_size(h, d);
    if !m.regular {
        return Err(Error::NonRegularPrior(m.m));
    }
    let df = d as f64;
    Ok(match h {
        Hyper::Wishart { alpha, rate } => rate.scale(1.0 / (2.0 * alpha - df - 1.0)),
        Hyper::GammaVec { alpha, rates } => {
            SymMatrix::from_diagonal(&rates.iter().map(|b| b / (2.0 * alpha - 2.0)).collect::<Vec<_>>())
        }
        Hyper::Gamma { alpha, rate } => SymMatrix::scaled_identity(d, rate / (2.0 * alpha - 2.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;

    fn beta_i(d: usize, b: f64) -> SymMatrix {
        SymMatrix::scaled_identity(d, b)
    }

    #[test]
    fn sample_sizes() {
        let a = Hyper::wishart(4.0, SymMatrix::identity(5)).unwrap();
        assert_eq!(prior_sample_size(&a, 5).m, 2.0);
        let c = Hyper::gamma(6.0, 0.5).unwrap();
        assert_eq!(prior_sample_size(&c, 5).m, 2.0);
        let d = Hyper::gamma_vec(1.0, vec![1.0; 3]).unwrap();
        let m = prior_sample_size(&d, 3);
        assert_eq!(m.m, 0.0);
        assert!(!m.regular);
    }

    #[test]
    fn conjugate_updates() {
        let a = Hyper::wishart(4.0, SymMatrix::identity(2)).unwrap();
        let stats = SuffStats::from_scatter(3, beta_i(2, 2.0));
        assert_eq!(
            conjugate_update(&a, &stats).unwrap(),
            Hyper::Wishart { alpha: 5.5, rate: beta_i(2, 3.0) }
        );
        let c = Hyper::gamma(2.0, 1.0).unwrap();
        let stats = SuffStats::from_scatter(1, beta_i(1, 1.0));
        assert_eq!(conjugate_update(&c, &stats).unwrap(), Hyper::Gamma { alpha: 2.5, rate: 2.0 });
        assert_eq!(conjugate_update(&c, &SuffStats::empty(4)).unwrap(), c);
        let bad = SuffStats::empty(3);
        assert!(matches!(conjugate_update(&a, &bad), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn matching_follows_the_reference_table() {
        let beta = 0.5;
        let a = Hyper::wishart(4.0, beta_i(5, beta)).unwrap();
        assert_eq!(match_down(&a, Structure::D).unwrap(), Hyper::GammaVec { alpha: 2.0, rates: vec![beta; 5] });
        let c = match_down(&a, Structure::C).unwrap();
        let Hyper::Gamma { alpha, rate } = c else { panic!() };
        assert_eq!(alpha, 6.0);
        assert_abs_diff_eq!(rate, 5.0 * beta, epsilon = 1e-15);

        let one = Hyper::wishart(3.0, beta_i(1, 2.0)).unwrap();
        assert_eq!(match_down(&one, Structure::C).unwrap(), Hyper::Gamma { alpha: 3.0, rate: 2.0 });

        let d = Hyper::gamma_vec(2.0, vec![beta; 5]).unwrap();
        assert_eq!(match_up(&d, 5).unwrap(), a);
        let c = Hyper::gamma(6.0, 5.0 * beta).unwrap();
        assert_eq!(match_up(&c, 5).unwrap(), a);

        let hd = Hyper::gamma_vec(2.7, vec![0.3, 1.0, 4.0]).unwrap();
        assert_eq!(match_down(&match_up(&hd, 3).unwrap(), Structure::D).unwrap(), hd);
    }

    #[test]
    fn matched_triple_preserves_sample_size() {
        let c = Hyper::gamma(3.5, 2.0).unwrap();
        let t = matched_triple(&c, 4).unwrap();
        for s in Structure::ALL {
            assert_abs_diff_eq!(prior_sample_size(t.get(s), 4).m, 1.25, epsilon = 1e-12);
        }
        assert_eq!(t.c, c);
    }

    #[test]
    fn empirical_bayes_example() {
        let stats = SuffStats::from_scatter(2, beta_i(5, 2.0));
        let t = empirical_bayes(&stats, 2.0).unwrap();
        assert_eq!(t.a, Hyper::Wishart { alpha: 4.0, rate: beta_i(5, 2.0) });
        assert_eq!(t.d, Hyper::GammaVec { alpha: 2.0, rates: vec![2.0; 5] });
        assert_eq!(t.c, Hyper::Gamma { alpha: 6.0, rate: 10.0 });
        assert_eq!(empirical_bayes(&SuffStats::empty(5), 2.0), Err(Error::EmptyDataset));

        let one = SuffStats::from_scatter(4, beta_i(1, 3.0));
        let t = empirical_bayes(&one, 2.0).unwrap();
        let Hyper::Wishart { rate, .. } = &t.a else { panic!() };
        let Hyper::GammaVec { rates, .. } = &t.d else { panic!() };
        let Hyper::Gamma { rate: rc, .. } = &t.c else { panic!() };
        assert_eq!(rate.get(0, 0), rates[0]);
        assert_eq!(rates[0], *rc);

        let singular = SuffStats::from_scatter(3, SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap());
        assert!(matches!(empirical_bayes(&singular, 2.0), Err(Error::DegenerateScatter(_))));
    }

    #[test]
    fn mclust_example() {
        let stats = SuffStats::from_scatter(2, beta_i(5, 2.0));
        let t = mclust_default(&stats).unwrap();
        for s in Structure::ALL {
            assert_eq!(t.get(s).alpha(), 3.5);
        }
        assert_eq!(t.a, Hyper::Wishart { alpha: 3.5, rate: beta_i(5, 2.0) });
        assert_eq!(t.c, Hyper::Gamma { alpha: 3.5, rate: 2.0 * 10.0 / 10.0 });
    }

    #[test]
    fn densities() {
        let h = Hyper::gamma(1.0, 1.0).unwrap();
        let eta = HalfPrecision::iso(1.0, 1).unwrap();
        assert_abs_diff_eq!(log_prior_density(&h, &eta).unwrap(), -1.0, epsilon = 1e-15);

        let w = Hyper::wishart(2.5, beta_i(1, 1.7)).unwrap();
        let g = Hyper::gamma(2.5, 1.7).unwrap();
        for x in [0.1, 1.0, 3.3] {
            let t = HalfPrecision::iso(x, 1).unwrap();
            assert_abs_diff_eq!(
                log_prior_density(&w, &t).unwrap(),
                log_prior_density(&g, &t).unwrap(),
                epsilon = 1e-12
            );
        }

        let step = 1e-3;
        let total: f64 = (1..40_000)
            .map(|i| {
                let t = HalfPrecision::iso(i as f64 * step, 1).unwrap();
                log_prior_density(&g, &t).unwrap().exp() * step
            })
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-4);

        let diag = HalfPrecision::diag(vec![1.0, 2.0]).unwrap();
        assert!(matches!(log_prior_density(&g, &diag), Err(Error::Support(_))));
    }

    #[test]
    fn json_round_trip() {
        let hs = [
            Hyper::wishart(4.0, SymMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap()).unwrap(),
            Hyper::gamma_vec(2.0, vec![1.0, 3.0]).unwrap(),
            Hyper::gamma(6.0, 2.5).unwrap(),
        ];
        for h in hs {
            let text = serde_json::to_string(&h).unwrap();
            assert!(text.contains("\"structure\""));
            assert_eq!(serde_json::from_str::<Hyper>(&text).unwrap(), h);
        }
        let bad = r#"{"structure":"C","alpha":2.0,"rate":[1.0]}"#;
        assert!(serde_json::from_str::<Hyper>(bad).is_err());
    }

    #[test]
    fn gamma_sampler_mean() {
        let h = Hyper::gamma(3.0, 2.0).unwrap();
        let mut rng = stream(11, &[]);
        let draws: Vec<f64> = (0..50_000)
            .map(|_| match sample_half_precision(&h, 2, &mut rng).unwrap() {
                HalfPrecision::Iso { eta, .. } => eta,
                _ => unreachable!(),
            })
            .collect();
        let est = McEstimate::from_samples(&draws);
        assert!((est.estimate - 1.5).abs() < 3.0 * est.std_error + 1e-12);
    }

    #[test]
    fn kl_objective_matched_is_the_normalizer_ratio() {
        let d = 3;
        let full = Hyper::gamma_vec(2.5, vec![1.0; d]).unwrap();
        let nested = match_down(&full, Structure::C).unwrap();
        let mut rng = stream(5, &[]);
        let est = kl_objective(&full, &nested, d, 1000, &mut rng).unwrap();
        let (ac, bc) = (nested.alpha(), 3.0);
        let expected = (ac * f64::ln(bc) - ln_gamma(ac)) - 3.0 * (2.5 * 0.0 - ln_gamma(2.5));
        assert_abs_diff_eq!(est.estimate, expected, epsilon = 1e-9);
    }
}
