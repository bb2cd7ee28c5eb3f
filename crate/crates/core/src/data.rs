//! Dataset ingestion and sufficient statistics for mean-zero Gaussian samples.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specialfn::SymMatrix;

/// Observations stored one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: DMatrix<f64>,
    names: Vec<String>,
}

impl Dataset {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let names = (1..=values.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(values, names)
    }

    pub fn with_names(values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::EmptySelection);
        }
        if names.len() != values.ncols() {
            return Err(Error::DimensionMismatch {
                expected: values.ncols(),
                found: names.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("dataset has non-finite entries".into()));
        }
        Ok(Dataset { values, names })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Domain("rows have unequal lengths".into()));
        }
        Self::new(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
    }

    pub fn empty(d: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(0, d))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Keeps the columns at `idx`, in that order.
    pub fn select_columns(&self, idx: &[usize]) -> Result<Dataset> {
        if idx.is_empty() {
            return Err(Error::EmptySelection);
        }
        for &j in idx {
            if j >= self.d() {
                return Err(Error::InvalidConfig(format!("column index {j} out of range")));
            }
        }
        let values = DMatrix::from_fn(self.n(), idx.len(), |i, k| self.values[(i, idx[k])]);
        let names = idx.iter().map(|&j| self.names[j].clone()).collect();
        Dataset::with_names(values, names)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|c| c == name)
    }

    /// Stacks the rows of `other` below these.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.d() != other.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                found: other.d(),
            });
        }
        let n1 = self.n();
        let values = DMatrix::from_fn(n1 + other.n(), self.d(), |i, j| {
            if i < n1 {
                self.values[(i, j)]
            } else {
                other.values[(i - n1, j)]
            }
        });
        Dataset::with_names(values, self.names.clone())
    }
}

/// How a column is picked out of a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnSel {
    Name(String),
    /// Zero-based position in the file.
    Index(usize),
}

impl ColumnSel {
    /// Numbers are read as zero-based positions, anything else as a name.
    pub fn parse(s: &str) -> ColumnSel {
        match s.parse::<usize>() {
            Ok(i) => ColumnSel::Index(i),
            Err(_) => ColumnSel::Name(s.to_string()),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub has_header: bool,
    /// `None` keeps every column.
    pub columns: Option<Vec<ColumnSel>>,
}

/// Reads a rectangular numeric CSV. Rows and columns in parse errors are
/// one-based, rows counting data records only.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, options)
}

pub fn read_csv<R: std::io::Read>(reader: R, options: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header: Option<Vec<String>> = if options.has_header {
        let h = rdr.headers().map_err(|e| Error::Io(e.to_string()))?;
        Some(h.iter().map(|s| s.to_string()).collect())
    } else {
        None
    };

    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| match e.position() {
            Some(p) => Error::Parse {
                row: p.record() as usize,
                column: 0,
                message: e.to_string(),
            },
            None => Error::Io(e.to_string()),
        })?;
        records.push(rec);
    }
    let width = header
        .as_ref()
        .map(|h| h.len())
        .or_else(|| records.first().map(|r| r.len()))
        .unwrap_or(0);

    let selected: Vec<usize> = match &options.columns {
        None => (0..width).collect(),
        Some(sel) => sel
            .iter()
            .map(|c| match c {
                ColumnSel::Index(i) if *i < width => Ok(*i),
                ColumnSel::Index(i) => Err(Error::InvalidConfig(format!(
                    "column index {i} out of range (file has {width} columns)"
                ))),
                ColumnSel::Name(name) => header
                    .as_ref()
                    .and_then(|h| h.iter().position(|c| c == name))
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown column `{name}`"))),
            })
            .collect::<Result<_>>()?,
    };
    if selected.is_empty() {
        return Err(Error::EmptySelection);
    }

    let mut values = DMatrix::<f64>::zeros(records.len(), selected.len());
    for (i, rec) in records.iter().enumerate() {
        for (k, &j) in selected.iter().enumerate() {
            let field = rec.get(j).ok_or_else(|| Error::Parse {
                row: i + 1,
                column: j + 1,
                message: "missing field".into(),
            })?;
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row: i + 1,
                column: j + 1,
                message: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: i + 1,
                    column: j + 1,
                    message: "non-finite value".into(),
                });
            }
            values[(i, k)] = v;
        }
    }
    let names = selected
        .iter()
        .map(|&j| match &header {
            Some(h) => h[j].clone(),
            None => format!("x{}", j + 1),
        })
        .collect();
    Dataset::with_names(values, names)
}

/// Scatter matrix `s = Σ xᵢxᵢᵀ` with its diagonal and trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuffStats {
    pub n: usize,
    pub d: usize,
    pub s: SymMatrix,
    pub s_diag: Vec<f64>,
    pub s_total: f64,
}

impl SuffStats {
    /// Builds statistics from a scatter matrix directly.
    pub fn from_scatter(n: usize, s: SymMatrix) -> SuffStats {
        let s_diag = s.diagonal();
        let s_total = exact_sum(s_diag.iter().copied());
        SuffStats {
            n,
            d: s.dim(),
            s,
            s_diag,
            s_total,
        }
    }

    pub fn empty(d: usize) -> SuffStats {
        Self::from_scatter(0, SymMatrix::zeros(d))
    }
}

/// Accumulates the scatter with correctly rounded sums, so the result does
/// not depend on row order.
pub fn suff_stats(data: &Dataset) -> SuffStats {
    let d = data.d();
    let x = data.values();
    let mut s = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = exact_sum((0..data.n()).map(|r| x[(r, i)] * x[(r, j)]));
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    let s = SymMatrix::new(s).expect("products of finite rows form a symmetric matrix");
    SuffStats::from_scatter(data.n(), s)
}

/// Subtracts each column mean.
pub fn center_columns(data: &Dataset) -> Result<Dataset> {
    let n = data.n();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let x = data.values();
    let means: Vec<f64> = (0..data.d())
        .map(|j| exact_sum(x.column(j).iter().copied()) / n as f64)
        .collect();
    let values = DMatrix::from_fn(n, data.d(), |i, j| x[(i, j)] - means[j]);
    Dataset::with_names(values, data.names().to_vec())
}

/// Correctly rounded floating-point sum (Shewchuk's partials, as in
/// Python's `math.fsum`).
pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut i = 0;
        for k in 0..partials.len() {
            let mut y = partials[k];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    // Round the partials, largest first, carrying the half-way correction.
    let mut hi = 0.0;
    let mut n = partials.len();
    if n > 0 {
        n -= 1;
        hi = partials[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = partials[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
    }
    hi
}
