//! Special functions and positive-definite kernels.
//!
//! Every gamma-family quantity is evaluated in log space. Positive
//! definiteness means one thing throughout the crate: a Cholesky
//! factorization that finishes with strictly positive pivots.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative asymmetry tolerated before a matrix input is rejected.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// A finite, exactly symmetric square matrix.
#[derive(Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Validates and symmetrizes `m` as `(m + mᵀ)/2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::Domain("matrix dimension must be positive".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let asym = (&m - m.transpose()).iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if scale > 0.0 && asym / scale > SYMMETRY_TOL {
            return Err(Error::Asymmetric(asym / scale));
        }
        Ok(Self::symmetrized(m))
    }

    fn symmetrized(m: DMatrix<f64>) -> Self {
        let d = m.nrows();
        let mut out = m;
        for i in 0..d {
            for j in (i + 1)..d {
                let v = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        SymMatrix(out)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Domain("matrix rows must form a square".into()));
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn identity(d: usize) -> Self {
        SymMatrix(DMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        SymMatrix(DMatrix::zeros(d, d))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn scaled_identity(d: usize, c: f64) -> Self {
        SymMatrix(DMatrix::identity(d, d) * c)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| i == j || self.0[(i, j)] == 0.0))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        check_dim(self.dim(), other.dim())?;
        Ok(SymMatrix(&self.0 + &other.0))
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix(&self.0 * c)
    }

    /// `tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &SymMatrix) -> f64 {
        self.0.component_mul(&other.0).sum()
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        Cholesky::new(self)
    }

    pub fn inverse(&self) -> Result<SymMatrix> {
        Ok(self.cholesky()?.inverse())
    }

    /// Extracts the sub-matrix over `idx` (rows and columns).
    pub fn select(&self, idx: &[usize]) -> SymMatrix {
        SymMatrix(DMatrix::from_fn(idx.len(), idx.len(), |i, j| {
            self.0[(idx[i], idx[j])]
        }))
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("SymMatrix").field(&self.to_rows()).finish()
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Lower-triangular Cholesky factor `L` with `S = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    pub fn new(s: &SymMatrix) -> Result<Self> {
        let d = s.dim();
        let a = s.as_matrix();
        let mut l = DMatrix::<f64>::zeros(d, d);
        for j in 0..d {
            let mut pivot = a[(j, j)];
            for k in 0..j {
                pivot -= l[(j, k)] * l[(j, k)];
            }
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: pivot });
            }
            let ljj = pivot.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..d {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / ljj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// Solves `S x = b`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let y = self
            .l
            .solve_lower_triangular(b)
            .expect("cholesky factor has a positive diagonal");
        self.l
            .transpose()
            .solve_upper_triangular(&y)
            .expect("cholesky factor has a positive diagonal")
    }

    pub fn inverse(&self) -> SymMatrix {
        let d = self.l.nrows();
        SymMatrix::symmetrized(self.solve(&DMatrix::identity(d, d)))
    }
}

/// Scalar log-gamma.
pub fn ln_gamma(a: f64) -> f64 {
    statrs::function::gamma::ln_gamma(a)
}

/// `log Γ_d(a) = d(d−1)/4 · log π + Σ_j log Γ(a + (1−j)/2)`.
pub fn log_mv_gamma(d: usize, a: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("multivariate gamma needs d >= 1".into()));
    }
    let bound = (d as f64 - 1.0) / 2.0;
    if !(a > bound) {
        return Err(Error::Domain(format!(
            "multivariate gamma argument {a} must exceed {bound}"
        )));
    }
    let df = d as f64;
    let mut acc = df * (df - 1.0) / 4.0 * PI.ln();
    for j in 1..=d {
        acc += ln_gamma(a + (1.0 - j as f64) / 2.0);
    }
    Ok(acc)
}

/// `log |S|` through a Cholesky factorization.
pub fn chol_log_det(s: &SymMatrix) -> Result<f64> {
    Ok(s.cholesky()?.log_det())
}

/// `½ log(∏ V_jj / |V|)`, zero exactly when `V` is diagonal.
pub fn hadamard_half_log_ratio(v: &SymMatrix) -> Result<f64> {
    let log_det = chol_log_det(v)?;
    if v.is_diagonal() {
        return Ok(0.0);
    }
    let log_diag: f64 = v.diagonal().iter().map(|x| x.ln()).sum();
    Ok(0.5 * (log_diag - log_det))
}

/// `(d/2) log((tr V / d) / |V|^{1/d})`, zero exactly for scalar multiples of
/// the identity.
pub fn amgm_half_log_ratio(v: &SymMatrix) -> Result<f64> {
    let log_det = chol_log_det(v)?;
    let d = v.dim() as f64;
    let diag = v.diagonal();
    if v.is_diagonal() && diag.iter().all(|x| *x == diag[0]) {
        return Ok(0.0);
    }
    Ok(d / 2.0 * (v.trace() / d).ln() - 0.5 * log_det)
}

/// Same ratio as [`amgm_half_log_ratio`] for a diagonal given as a vector.
pub fn amgm_half_log_ratio_vec(v: &[f64]) -> Result<f64> {
    if v.is_empty() || v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::Domain("entries must be positive and finite".into()));
    }
    if v.iter().all(|x| *x == v[0]) {
        return Ok(0.0);
    }
    let d = v.len() as f64;
    let mean = v.iter().sum::<f64>() / d;
    let mean_log = v.iter().map(|x| x.ln()).sum::<f64>() / d;
    Ok(d / 2.0 * (mean.ln() - mean_log))
}

/// Upper tail of the chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_sf(x: f64, dof: u32) -> f64 {
    if x <= 0.0 || dof == 0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let p = statrs::function::gamma::gamma_ur(dof as f64 / 2.0, x / 2.0);
    p.clamp(0.0, 1.0)
}
