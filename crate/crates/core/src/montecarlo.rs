//! Simulation harness: draw a half-precision from a structure's prior,
//! sample Gaussian data, score every structure, and tabulate how often each
//! criterion recovers the generating structure.
//!
//! Every replicate owns a random stream derived from
//! `(seed, truth, n, replicate)`, so results are identical for any thread
//! count.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::data::{suff_stats, Dataset, SuffStats};
use crate::error::{Error, Result};
use crate::priors::{empirical_bayes, matched_triple, mclust_default, sample_half_precision, Hyper, HyperTriple};
use crate::rng;
use crate::specialfn::{chi_square_sf, SymMatrix};
use crate::structures::{best_index, criteria, Criterion, Structure};

/// Draws `n` rows from `N(0, Σ)`.
pub fn sample_rows<R: Rng + ?Sized>(sigma: &SymMatrix, n: usize, rng: &mut R) -> Result<Dataset> {
    let d = sigma.dim();
    let l = sigma.cholesky()?.factor().clone();
    let mut values = DMatrix::<f64>::zeros(n, d);
    for i in 0..n {
        let z = DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
        let x = &l * z;
        for j in 0..d {
            values[(i, j)] = x[j];
        }
    }
    Dataset::new(values)
}

/// Draws the scatter of `n` rows from `N(0, Σ)` directly, through the
/// Bartlett decomposition when `n ≥ d`.
pub fn sample_scatter<R: Rng + ?Sized>(sigma: &SymMatrix, n: usize, rng: &mut R) -> Result<SuffStats> {
    let d = sigma.dim();
    if n < d {
        return Ok(suff_stats(&sample_rows(sigma, n, rng)?));
    }
    let l = sigma.cholesky()?.factor().clone();
    let mut a = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new((n - i) as f64).map_err(|e| Error::Domain(e.to_string()))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = l * a;
    Ok(SuffStats::from_scatter(n, SymMatrix::new(&la * la.transpose())?))
}

/// Draws a half-precision from `h`, then `n` observations from the
/// Gaussian it defines.
pub fn generate_instance<R: Rng + ?Sized>(truth: Structure, h: &Hyper, d: usize, n: usize, rng: &mut R) -> Result<Dataset> {
    if h.structure() != truth {
        return Err(Error::InvalidConfig(format!(
            "truth {truth} needs a structure {truth} prior, got {}",
            h.structure()
        )));
    }
    let theta = sample_half_precision(h, d, rng)?;
    sample_rows(&theta.covariance(), n, rng)
}

/// How the scoring priors are chosen for each replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HyperScheme {
    /// The generating priors, matched across structures.
    Oracle,
    /// Method-of-moments rates from the replicate's scatter.
    EmpiricalBayes,
    /// The mclust default regularization.
    Mclust,
}

impl HyperScheme {
    pub fn name(self) -> &'static str {
        match self {
            HyperScheme::Oracle => "oracle",
            HyperScheme::EmpiricalBayes => "empirical-bayes",
            HyperScheme::Mclust => "mclust",
        }
    }
}

impl FromStr for HyperScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<HyperScheme> {
        match s.trim().to_ascii_lowercase().as_str() {
            "oracle" => Ok(HyperScheme::Oracle),
            "empirical-bayes" | "eb" => Ok(HyperScheme::EmpiricalBayes),
            "mclust" | "mclust-default" => Ok(HyperScheme::Mclust),
            other => Err(Error::InvalidConfig(format!("unknown hyper scheme '{other}'"))),
        }
    }
}

/// A criterion evaluated under a scheme of priors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scorer {
    pub scheme: HyperScheme,
    pub criterion: Criterion,
}

impl Scorer {
    pub fn new(scheme: HyperScheme, criterion: Criterion) -> Scorer {
        Scorer { scheme, criterion }
    }

    pub fn label(&self) -> String {
        format!("{}:{}", self.scheme.name(), self.criterion.name())
    }
}

/// The comparisons printed in the published rate tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableKind {
    /// Evidence and pcBIC under the generating priors.
    Oracle,
    /// Evidence and pcBIC under empirical-Bayes priors.
    Eb,
    /// Empirical-Bayes evidence against mclust-default evidence.
    VsMclust,
}

impl TableKind {
    pub fn scorers(self) -> Vec<Scorer> {
        use Criterion::*;
        use HyperScheme::*;
        match self {
            TableKind::Oracle => vec![Scorer::new(Oracle, Evidence), Scorer::new(Oracle, PcBic)],
            TableKind::Eb => vec![Scorer::new(EmpiricalBayes, Evidence), Scorer::new(EmpiricalBayes, PcBic)],
            TableKind::VsMclust => vec![Scorer::new(EmpiricalBayes, Evidence), Scorer::new(Mclust, Evidence)],
        }
    }
}

impl FromStr for TableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<TableKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "oracle" => Ok(TableKind::Oracle),
            "eb" | "empirical-bayes" => Ok(TableKind::Eb),
            "vs-mclust" => Ok(TableKind::VsMclust),
            other => Err(Error::InvalidConfig(format!("unknown table '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub d: usize,
    /// The generating prior is Wishart with rate `B = I/beta_inverse` and
    /// prior sample size `m`, matched down to D and C.
    pub beta_inverse: f64,
    pub n_values: Vec<usize>,
    pub reps: usize,
    pub truths: Vec<Structure>,
    pub scorers: Vec<Scorer>,
    /// Prior sample size of the generating priors and of the
    /// empirical-Bayes shapes.
    pub m: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> SimConfig {
        SimConfig {
            d: 5,
            beta_inverse: 2.0,
            n_values: (5..=10).collect(),
            reps: 1000,
            truths: vec![Structure::A, Structure::D, Structure::C],
            scorers: TableKind::Oracle.scorers(),
            m: 2.0,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.d == 0 {
            return bad("d must be positive");
        }
        if self.reps == 0 {
            return bad("reps must be at least 1");
        }
        if !(self.beta_inverse > 0.0) || !self.beta_inverse.is_finite() {
            return bad("beta_inverse must be positive");
        }
        if !(self.m > 0.0) || !self.m.is_finite() {
            return bad("prior sample size must be positive");
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return bad("n values must be nonempty and positive");
        }
        if self.truths.is_empty() || self.scorers.is_empty() {
            return bad("need at least one truth and one scorer");
        }
        let data_driven = self.scorers.iter().any(|s| s.scheme != HyperScheme::Oracle);
        if data_driven && self.n_values.iter().any(|n| *n < self.d) {
            return bad("data-driven priors need n >= d for a positive definite scatter");
        }
        Ok(())
    }

    /// Generating priors, one per structure.
    pub fn generating_hypers(&self) -> Result<HyperTriple> {
        let alpha = (self.m + self.d as f64 + 1.0) / 2.0;
        let base = Hyper::wishart(alpha, SymMatrix::scaled_identity(self.d, 1.0 / self.beta_inverse))?;
        matched_triple(&base, self.d)
    }
}

/// Per-replicate choices, aligned with the configured scorers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub rep: usize,
    pub selected: Vec<Option<Structure>>,
}

/// Selection counts for one `(truth, n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub truth: Structure,
    pub n: usize,
    pub reps: usize,
    /// Replicates dropped because a data-driven prior could not be formed.
    pub excluded: usize,
    /// Per scorer, counts of selected structures indexed C, D, A.
    pub counts: Vec<[usize; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decisions: Option<Vec<Decision>>,
}

impl CellResult {
    pub fn correct_rate(&self, scorer: usize) -> f64 {
        let used = self.reps - self.excluded;
        self.counts[scorer][self.truth.index()] as f64 / used.max(1) as f64
    }
}

fn truth_code(s: Structure) -> u64 {
    s.index() as u64
}

fn hypers_for(scheme: HyperScheme, oracle: &HyperTriple, stats: &SuffStats, m: f64) -> Result<HyperTriple> {
    match scheme {
        HyperScheme::Oracle => Ok(oracle.clone()),
        HyperScheme::EmpiricalBayes => empirical_bayes(stats, m),
        HyperScheme::Mclust => mclust_default(stats),
    }
}

fn decide(hypers: &HyperTriple, stats: &SuffStats, criterion: Criterion) -> Option<Structure> {
    let values: Vec<f64> = Structure::ALL
        .iter()
        .map(|s| {
            criteria(hypers.get(*s), stats)
                .ok()
                .and_then(|r| r.value(criterion))
                .unwrap_or(f64::NEG_INFINITY)
        })
        .collect();
    best_index(&values).map(|i| Structure::ALL[i])
}

/// Runs all replicates of one `(truth, n)` cell.
pub fn run_cell(config: &SimConfig, truth: Structure, n: usize) -> Result<CellResult> {
    config.validate()?;
    let oracle = config.generating_hypers()?;
    let generator = oracle.get(truth).clone();
    let records: Vec<Option<Decision>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let mut r = rng::stream(config.seed, &[truth_code(truth), n as u64, config.beta_inverse.to_bits(), rep as u64]);
            let data = generate_instance(truth, &generator, config.d, n, &mut r)?;
            let stats = suff_stats(&data);
            let mut selected = Vec::with_capacity(config.scorers.len());
            for scorer in &config.scorers {
                match hypers_for(scorer.scheme, &oracle, &stats, config.m) {
                    Ok(h) => selected.push(decide(&h, &stats, scorer.criterion)),
                    Err(Error::DegenerateScatter(_)) | Err(Error::EmptyDataset) => return Ok(None),
                    Err(e) => return Err(e),
                }
            }
            Ok(Some(Decision { rep, selected }))
        })
        .collect::<Result<Vec<_>>>()?;
    let excluded = records.iter().filter(|r| r.is_none()).count();
    let decisions: Vec<Decision> = records.into_iter().flatten().collect();
    let mut counts = vec![[0usize; 3]; config.scorers.len()];
    for d in &decisions {
        for (k, s) in d.selected.iter().enumerate() {
            if let Some(s) = s {
                counts[k][s.index()] += 1;
            }
        }
    }
    Ok(CellResult { truth, n, reps: config.reps, excluded, counts, decisions: Some(decisions) })
}

/// Runs every configured `(truth, n)` cell.
pub fn run_simulation(config: &SimConfig) -> Result<Vec<CellResult>> {
    let mut out = Vec::new();
    for &n in &config.n_values {
        for &truth in &config.truths {
            out.push(run_cell(config, truth, n)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McNemarMethod {
    Exact,
    ContinuityCorrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    pub b: usize,
    pub c: usize,
    /// The smaller discordant count for the exact test, the
    /// continuity-corrected chi-square otherwise.
    pub statistic: f64,
    pub p_value: f64,
    pub method: McNemarMethod,
}

/// Discordant total below which the exact binomial test is used.
pub const EXACT_BELOW: usize = 25;

/// Two-sided McNemar test on discordant counts `b` and `c`.
pub fn mcnemar(b: usize, c: usize) -> McNemarResult {
    let method = if b + c < EXACT_BELOW {
        McNemarMethod::Exact
    } else {
        McNemarMethod::ContinuityCorrected
    };
    mcnemar_with(b, c, method)
}

pub fn mcnemar_with(b: usize, c: usize, method: McNemarMethod) -> McNemarResult {
    let total = b + c;
    if total == 0 {
        return McNemarResult { b, c, statistic: 0.0, p_value: 1.0, method };
    }
    match method {
        McNemarMethod::Exact => {
            let low = b.min(c);
            let bin = Binomial::new(0.5, total as u64).expect("p = 1/2 is a valid probability");
            let p = (2.0 * bin.cdf(low as u64)).min(1.0);
            McNemarResult { b, c, statistic: low as f64, p_value: p, method }
        }
        McNemarMethod::ContinuityCorrected => {
            let diff = (b as f64 - c as f64).abs() - 1.0;
            let stat = diff.max(0.0).powi(2) / total as f64;
            McNemarResult { b, c, statistic: stat, p_value: chi_square_sf(stat, 1), method }
        }
    }
}

/// 3×3 counts indexed `[truth][selected]` in the order C, D, A.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub scorer: Scorer,
    pub counts: [[usize; 3]; 3],
}

impl ConfusionMatrix {
    pub fn trace(&self) -> usize {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    pub fn get(&self, truth: Structure, selected: Structure) -> usize {
        self.counts[truth.index()][selected.index()]
    }
}

/// McNemar comparison of two scorers on a diagonal cell or on the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub first: usize,
    pub second: usize,
    /// `None` for the trace.
    pub truth: Option<Structure>,
    pub test: McNemarResult,
    /// Index of the scorer that is correct significantly more often.
    pub better: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionTable {
    pub n: usize,
    pub matrices: Vec<ConfusionMatrix>,
    pub comparisons: Vec<Comparison>,
}

/// Significance level for the table annotations.
pub const SIGNIFICANCE: f64 = 0.05;

/// Builds confusion matrices for one n from a full sweep over the three
/// truths and compares every pair of scorers.
pub fn confusion_table(cells: &[CellResult], scorers: &[Scorer]) -> Result<ConfusionTable> {
    let n = cells
        .first()
        .map(|c| c.n)
        .ok_or_else(|| Error::InvalidConfig("no cells".into()))?;
    let mut by_truth: [Option<&CellResult>; 3] = [None; 3];
    for c in cells {
        if c.n != n {
            return Err(Error::InvalidConfig("cells mix different n".into()));
        }
        by_truth[c.truth.index()] = Some(c);
    }
    let missing: Vec<String> = Structure::ALL
        .iter()
        .filter(|s| by_truth[s.index()].is_none())
        .map(|s| s.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::InvalidConfig(format!("incomplete sweep at n = {n}: missing truth {}", missing.join(", "))));
    }
    let cells: Vec<&CellResult> = by_truth.iter().map(|c| c.expect("checked above")).collect();
    let matrices = scorers
        .iter()
        .enumerate()
        .map(|(k, scorer)| {
            let mut counts = [[0usize; 3]; 3];
            for (t, cell) in cells.iter().enumerate() {
                counts[t] = cell.counts[k];
            }
            ConfusionMatrix { scorer: *scorer, counts }
        })
        .collect();

    let mut comparisons = Vec::new();
    for i in 0..scorers.len() {
        for j in (i + 1)..scorers.len() {
            let mut total = (0, 0);
            for cell in &cells {
                let decisions = cell
                    .decisions
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("comparisons need decision records".into()))?;
                let mut bc = (0, 0);
                for d in decisions {
                    let ok_i = d.selected[i] == Some(cell.truth);
                    let ok_j = d.selected[j] == Some(cell.truth);
                    match (ok_i, ok_j) {
                        (true, false) => bc.0 += 1,
                        (false, true) => bc.1 += 1,
                        _ => {}
                    }
                }
                total = (total.0 + bc.0, total.1 + bc.1);
                comparisons.push(compare(i, j, Some(cell.truth), bc));
            }
            comparisons.push(compare(i, j, None, total));
        }
    }
    Ok(ConfusionTable { n, matrices, comparisons })
}

fn compare(i: usize, j: usize, truth: Option<Structure>, (b, c): (usize, usize)) -> Comparison {
    let test = mcnemar(b, c);
    let better = (test.p_value < SIGNIFICANCE && b != c).then_some(if b > c { i } else { j });
    Comparison { first: i, second: j, truth, test, better }
}

const DISPLAY_ORDER: [Structure; 3] = [Structure::A, Structure::D, Structure::C];

impl ConfusionTable {
    fn is_bold(&self, scorer: usize, truth: Option<Structure>) -> bool {
        self.comparisons
            .iter()
            .any(|c| c.truth == truth && c.better == Some(scorer))
    }

    /// Markdown in the layout of published confusion tables; bold marks a
    /// significantly larger diagonal entry or trace.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let mut header = String::from("| n | M |");
        let mut rule = String::from("|---|---|");
        for m in &self.matrices {
            for s in DISPLAY_ORDER {
                let _ = write!(header, " {} {} |", m.scorer.label(), s);
                rule.push_str("---:|");
            }
        }
        let _ = writeln!(out, "{header}\n{rule}");
        for (row, truth) in DISPLAY_ORDER.iter().enumerate() {
            let n_label = if row == 0 { self.n.to_string() } else { String::new() };
            let _ = write!(out, "| {n_label} | {truth} |");
            for (k, m) in self.matrices.iter().enumerate() {
                for sel in DISPLAY_ORDER {
                    let v = m.get(*truth, sel);
                    if sel == *truth && self.is_bold(k, Some(*truth)) {
                        let _ = write!(out, " **{v}** |");
                    } else {
                        let _ = write!(out, " {v} |");
                    }
                }
            }
            out.push('\n');
        }
        let _ = write!(out, "| | Trace |");
        for (k, m) in self.matrices.iter().enumerate() {
            let t = m.trace();
            let cell = if self.is_bold(k, None) { format!("**{t}**") } else { t.to_string() };
            let _ = write!(out, " {cell} | | |");
        }
        out.push('\n');
        out
    }
}

/// Markdown table of correct-selection percentages (one decimal) per n for
/// one truth.
pub fn rate_table_markdown(cells: &[CellResult], scorers: &[Scorer], truth: Structure) -> String {
    let mut out = String::from("| n |");
    let mut rule = String::from("|---|");
    for s in scorers {
        let _ = write!(out, " {} |", s.label());
        rule.push_str("---:|");
    }
    let _ = writeln!(out, "\n{rule}");
    for cell in cells.iter().filter(|c| c.truth == truth) {
        let _ = write!(out, "| {} |", cell.n);
        for k in 0..scorers.len() {
            let _ = write!(out, " {:.1}% |", 100.0 * cell.correct_rate(k));
        }
        out.push('\n');
    }
    out
}
