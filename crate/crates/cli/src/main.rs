//! `covsel`: covariance-structure selection, simulation tables, regression
//! evidences and Bayes-factor rate studies from the command line.
//!
//! Exit codes: 0 on success, 2 for configuration or input errors, 3 for
//! numerical failures.

mod output;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use covsel::asymptotics::{rate_study, Pair, RateStudy, RateStudyConfig, Truth};
use covsel::data::{center_columns, load_csv, suff_stats, ColumnSel, CsvOptions, Dataset};
use covsel::montecarlo::{
    confusion_table, rate_table_markdown, run_simulation, CellResult, ConfusionTable, SimConfig, TableKind,
};
use covsel::priors::{empirical_bayes, matched_triple, mclust_default, Hyper, HyperTriple};
use covsel::regression::{enumerate_covariates, fit_subset, lambda_path, LambdaRow, RegressionData, RegressionFit, RegressionPriors};
use covsel::specialfn::SymMatrix;
use covsel::structures::{select_structure, strictly_better, Criterion, HalfPrecision, Selection, Structure};
use serde::Serialize;

use crate::output::{dec1, to_json, write_file, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "covsel", version, about = "Bayesian selection among Gaussian covariance structures")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "COVSEL_THREADS", default_value_t = 0, global = true)]
    threads: usize,
    /// Write the JSON result to this file.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    /// What to print on standard output.
    #[arg(long, value_enum, default_value_t = Format::Markdown, global = true)]
    format: Format,
    /// Write a run manifest to this file.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Markdown,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rank the structures C, D and A on one data set.
    Select(SelectArgs),
    /// Confusion tables from simulated data.
    Simulate(SimulateArgs),
    /// Regression evidences over covariate subsets, or penalty curves over λ.
    Regress(RegressArgs),
    /// Bayes-factor growth rates against their theoretical constants.
    Rates(RatesArgs),
}

#[derive(Args, Debug, Serialize)]
struct CsvArgs {
    /// Input CSV file.
    #[arg(long)]
    data: PathBuf,
    /// The file has no header row.
    #[arg(long)]
    no_header: bool,
    /// Subtract column means before fitting.
    #[arg(long)]
    center: bool,
}

#[derive(Args, Debug, Serialize)]
struct SelectArgs {
    #[command(flatten)]
    csv: CsvArgs,
    /// Columns by name or zero-based position; all columns by default.
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    /// `empirical-bayes`, `mclust`, or a JSON file holding one prior or a
    /// triple `{a, d, c}`. A single prior is matched to the other structures.
    #[arg(long, default_value = "empirical-bayes")]
    hyper: String,
    /// Prior sample size for empirical Bayes.
    #[arg(long, default_value_t = 2.0)]
    prior_size: f64,
    /// evidence, bic, pcbic or kic.
    #[arg(long, default_value = "evidence")]
    criterion: String,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// oracle, eb or vs-mclust.
    #[arg(long, default_value = "oracle")]
    table: String,
    #[arg(long, default_value_t = 5)]
    d: usize,
    /// Inverse rate of the generating Wishart prior.
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    beta_inv: f64,
    #[arg(long, num_args = 1.., default_values_t = [5usize, 6, 7, 8, 9, 10])]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Prior sample size of the generating and empirical-Bayes priors.
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    prior_size: f64,
}

#[derive(Args, Debug, Serialize)]
struct RegressArgs {
    #[command(flatten)]
    csv: CsvArgs,
    /// Response columns.
    #[arg(long, value_delimiter = ',', required = true)]
    responses: Vec<String>,
    /// Covariate columns.
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    /// Prepend an all-ones covariate named `Int`.
    #[arg(long)]
    intercept: bool,
    /// JSON file with `nu`, `lambda` and `covs` (one prior per structure).
    /// Without it, ν = 0, Λ = I and every prior has shape `--alpha` and rate
    /// `--beta` (times I for A).
    #[arg(long)]
    hyper: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Fit every nonempty covariate subset.
    #[arg(long)]
    enumerate: bool,
    /// Penalty curves over this λ grid (single response only).
    #[arg(long, num_args = 1.., value_delimiter = ',', allow_hyphen_values = true)]
    lambda_path: Vec<f64>,
    /// Write the λ-path table as CSV to this file.
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct RatesArgs {
    /// A-vs-D, A-vs-C or D-vs-C.
    #[arg(long, default_value = "A-vs-C")]
    pair: String,
    /// Structure whose prior generates a fresh truth per replicate.
    #[arg(long, default_value = "C")]
    truth: String,
    /// Fixed true covariance, rows separated by `;` (for example
    /// `1,0.5;0.5,1`). Overrides `--truth` and sets `--d`.
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, num_args = 1.., default_values_t = [100usize, 316, 1000, 3162, 10000])]
    n: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Prior sample size of the Wishart prior the others are matched to.
    #[arg(long, default_value_t = 2.0)]
    prior_size: f64,
    /// The Wishart rate is this multiple of I.
    #[arg(long, default_value_t = 0.5)]
    rate: f64,
    /// Write the study table as CSV to this file.
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Lib(covsel::Error),
    Output(String),
}

impl From<covsel::Error> for Failure {
    fn from(e: covsel::Error) -> Failure {
        Failure::Lib(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Failure {
        Failure::Output(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::Lib(covsel::Error::Io(e.to_string()))
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Lib(e) if e.is_config() => 2,
            _ => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Lib(e) => write!(f, "{e}"),
            Failure::Output(m) => write!(f, "{m}"),
        }
    }
}

fn config_error(msg: impl Into<String>) -> Failure {
    Failure::Lib(covsel::Error::InvalidConfig(msg.into()))
}

type CliResult<T> = std::result::Result<T, Failure>;

/// What a command produced: markdown for people, JSON for machines, and an
/// optional CSV side output.
struct Report {
    markdown: String,
    json: String,
    config: serde_json::Value,
    seed: Option<u64>,
    extra_outputs: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure::Output(e.to_string()))?;
    }
    let start = Instant::now();
    let (name, report) = match &cli.command {
        Command::Select(a) => ("select", cmd_select(a)?),
        Command::Simulate(a) => ("simulate", cmd_simulate(a)?),
        Command::Regress(a) => ("regress", cmd_regress(a)?),
        Command::Rates(a) => ("rates", cmd_rates(a)?),
    };
    let mut outputs = report.extra_outputs.clone();
    if let Some(path) = &cli.json {
        write_file(path, &report.json)?;
        outputs.push(path.clone());
    }
    match cli.format {
        Format::Markdown => print!("{}", report.markdown),
        Format::Json => print!("{}", report.json),
    }
    if let Some(path) = &cli.manifest {
        let manifest = RunManifest {
            command: name.to_string(),
            args: std::env::args().collect(),
            config: report.config,
            seed: report.seed,
            version: env!("CARGO_PKG_VERSION"),
            threads: rayon::current_num_threads(),
            elapsed_seconds: start.elapsed().as_secs_f64(),
            outputs,
        };
        write_file(path, &to_json(&manifest)?)?;
    }
    Ok(())
}

fn read_data(csv: &CsvArgs, columns: Option<Vec<ColumnSel>>) -> CliResult<Dataset> {
    let options = CsvOptions { has_header: !csv.no_header, columns };
    let data = load_csv(&csv.data, &options).map_err(|e| match e {
        covsel::Error::Io(m) => covsel::Error::Io(format!("{}: {m}", csv.data.display())),
        e => e,
    })?;
    Ok(if csv.center { center_columns(&data)? } else { data })
}

fn column_sels(cols: &[String]) -> Option<Vec<ColumnSel>> {
    (!cols.is_empty()).then(|| cols.iter().map(|c| ColumnSel::parse(c)).collect())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

fn load_hypers(spec: &str, data: &Dataset, prior_size: f64) -> CliResult<HyperTriple> {
    let stats = suff_stats(data);
    match spec {
        "empirical-bayes" | "eb" => Ok(empirical_bayes(&stats, prior_size)?),
        "mclust" => Ok(mclust_default(&stats)?),
        path => {
            let text = std::fs::read_to_string(path)?;
            if let Ok(triple) = serde_json::from_str::<HyperTriple>(&text) {
                return Ok(triple);
            }
            let single: Hyper = serde_json::from_str(&text).map_err(|e| config_error(format!("{path}: {e}")))?;
            Ok(matched_triple(&single, data.d())?)
        }
    }
}

#[derive(Serialize)]
struct SelectOutput<'a> {
    columns: &'a [String],
    n: usize,
    d: usize,
    hypers: &'a HyperTriple,
    winner: Option<Structure>,
    /// Structures whose score ties the winner's.
    tied: Vec<Structure>,
    selection: &'a Selection,
}

fn cmd_select(a: &SelectArgs) -> CliResult<Report> {
    let criterion: Criterion = a.criterion.parse()?;
    let data = read_data(&a.csv, column_sels(&a.columns))?;
    let stats = suff_stats(&data);
    let hypers = load_hypers(&a.hyper, &data, a.prior_size)?;
    let selection = select_structure(&stats, &hypers, criterion)?;
    let score = |i: usize| selection.ranked[i].value(criterion).unwrap_or(f64::NEG_INFINITY);
    let tied: Vec<Structure> = (1..selection.ranked.len())
        .filter(|&i| !strictly_better(score(0), score(i)))
        .map(|i| selection.ranked[i].structure)
        .collect();

    let mut md = format!("Selection by {} on n = {}, d = {}\n\n", criterion.name(), data.n(), data.d());
    md.push_str("| rank | structure | k | log evidence | BIC | pcBIC | KIC |\n|---:|---|---:|---:|---:|---:|---:|\n");
    for (i, r) in selection.ranked.iter().enumerate() {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {} |",
            i + 1,
            r.structure,
            r.k,
            dec1(Some(r.log_evidence)),
            dec1(r.bic),
            dec1(r.pc_bic),
            dec1(r.kic)
        );
    }
    for e in &selection.excluded {
        let _ = writeln!(md, "\n{} excluded: {}", e.structure, e.reason);
    }
    if let Some(w) = selection.winner() {
        if tied.is_empty() {
            let _ = writeln!(md, "\nSelected: {w}");
        } else {
            let others: Vec<String> = tied.iter().map(|s| s.to_string()).collect();
            let _ = writeln!(md, "\nSelected: {w} (tie with {}; the simpler structure wins)", others.join(", "));
        }
    }
    let out = SelectOutput {
        columns: data.names(),
        n: data.n(),
        d: data.d(),
        hypers: &hypers,
        winner: selection.winner(),
        tied,
        selection: &selection,
    };
    Ok(Report { markdown: md, json: to_json(&out)?, config: serde_json::to_value(a)?, seed: None, extra_outputs: vec![] })
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    config: &'a SimConfig,
    cells: Vec<CellResult>,
    tables: Vec<ConfusionTable>,
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<Report> {
    let kind: TableKind = a.table.parse()?;
    let config = SimConfig {
        d: a.d,
        beta_inverse: a.beta_inv,
        n_values: a.n.clone(),
        reps: a.reps,
        truths: vec![Structure::A, Structure::D, Structure::C],
        scorers: kind.scorers(),
        m: a.prior_size,
        seed: a.seed,
    };
    config.validate()?;
    let mut cells = run_simulation(&config)?;
    let mut tables = Vec::new();
    let mut md = String::new();
    for &n in &config.n_values {
        let at_n: Vec<CellResult> = cells.iter().filter(|c| c.n == n).cloned().collect();
        let table = confusion_table(&at_n, &config.scorers)?;
        md.push_str(&table.to_markdown());
        md.push('\n');
        tables.push(table);
    }
    // Per-replicate records are only needed for the paired tests.
    for c in &mut cells {
        c.decisions = None;
    }
    for truth in [Structure::A, Structure::D, Structure::C] {
        let _ = writeln!(md, "Correct selections, truth {truth}\n");
        md.push_str(&rate_table_markdown(&cells, &config.scorers, truth));
        md.push('\n');
    }
    let out = SimulateOutput { config: &config, cells, tables };
    Ok(Report {
        markdown: md,
        json: to_json(&out)?,
        config: serde_json::to_value(&config)?,
        seed: Some(a.seed),
        extra_outputs: vec![],
    })
}

fn resolve_columns(data: &Dataset, cols: &[String]) -> CliResult<Vec<usize>> {
    cols.iter()
        .map(|c| match ColumnSel::parse(c) {
            ColumnSel::Index(i) if i < data.d() => Ok(i),
            ColumnSel::Index(i) => Err(config_error(format!("column {i} out of range"))),
            ColumnSel::Name(name) => data.column_index(&name).ok_or_else(|| config_error(format!("no column named '{name}'"))),
        })
        .collect()
}

#[derive(Serialize)]
struct RegressOutput<'a> {
    priors: &'a RegressionPriors,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fits: Vec<RegressionFit>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    lambda_path: Vec<LambdaRow>,
}

fn regression_table(fits: &[RegressionFit]) -> String {
    let best = fits
        .iter()
        .flat_map(|f| f.fits.iter().map(|r| r.log_evidence))
        .fold(f64::NEG_INFINITY, f64::max);
    let order = [Structure::A, Structure::D, Structure::C];
    let mut md = String::from("| covariates | log E A | log E D | log E C | pcBIC A | pcBIC D | pcBIC C |\n");
    md.push_str("|---|---:|---:|---:|---:|---:|---:|\n");
    for f in fits {
        let _ = write!(md, "| {} |", f.subset_id);
        for s in order {
            let v = f.fit(s).map(|r| r.log_evidence);
            let cell = dec1(v);
            if v == Some(best) {
                let _ = write!(md, " **{cell}** |");
            } else {
                let _ = write!(md, " {cell} |");
            }
        }
        for s in order {
            let _ = write!(md, " {} |", dec1(f.fit(s).and_then(|r| r.pc_bic)));
        }
        md.push('\n');
    }
    md
}

fn lambda_csv(rows: &[LambdaRow]) -> String {
    let mut out = String::from("lambda,flexibility,bic_penalty,pcbic_penalty,log_evidence,non_regular\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.lambda, r.flexibility, r.bic_penalty, r.pcbic_penalty, r.log_evidence, r.non_regular
        );
    }
    out
}

fn cmd_regress(a: &RegressArgs) -> CliResult<Report> {
    let data = read_data(&a.csv, None)?;
    let responses = resolve_columns(&data, &a.responses)?;
    let covariates = resolve_columns(&data, &a.covariates)?;
    let reg = RegressionData::from_dataset(&data, &responses, &covariates, a.intercept)?;
    let priors = match &a.hyper {
        Some(path) => read_json::<RegressionPriors>(path)?,
        None => RegressionPriors::standard(reg.d1(), reg.d2(), a.alpha, a.beta)?,
    };
    if priors.nu.nrows() != reg.d1() || priors.lambda.nrows() != reg.d2() {
        return Err(config_error(format!(
            "prior is for {} responses and {} covariates, data have {} and {}",
            priors.nu.nrows(),
            priors.lambda.nrows(),
            reg.d1(),
            reg.d2()
        )));
    }
    let mut extra = Vec::new();
    let (md, out) = if !a.lambda_path.is_empty() {
        let rows = lambda_path(&reg, &a.lambda_path)?;
        let csv = lambda_csv(&rows);
        if let Some(path) = &a.csv_out {
            write_file(path, &csv)?;
            extra.push(path.clone());
        }
        (csv, RegressOutput { priors: &priors, fits: vec![], lambda_path: rows })
    } else {
        let all: Vec<usize> = (0..reg.d2()).collect();
        let fits = if a.enumerate {
            enumerate_covariates(&reg, &all, &priors, false)?
        } else {
            vec![fit_subset(&reg, &priors, &all)?]
        };
        (regression_table(&fits), RegressOutput { priors: &priors, fits, lambda_path: vec![] })
    };
    Ok(Report { markdown: md, json: to_json(&out)?, config: serde_json::to_value(a)?, seed: None, extra_outputs: extra })
}

fn parse_matrix(text: &str) -> CliResult<SymMatrix> {
    let rows = text
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| config_error(format!("bad matrix entry '{v}': {e}"))))
                .collect::<CliResult<Vec<f64>>>()
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(SymMatrix::from_rows(&rows)?)
}

fn rates_markdown(study: &RateStudy) -> String {
    let mut md = format!("{} with truth {}, statistic log(E_F/E_N) / {}\n\n", study.pair, study.truth, study.scale);
    md.push_str("| n | statistic | se | target |\n|---:|---:|---:|---:|\n");
    for r in &study.rows {
        // Rate statistics are small; four decimals keep them readable.
        let target = study.target.map(|t| format!("{t:.4}")).unwrap_or_else(|| "n/a".into());
        let _ = writeln!(md, "| {} | {:.4} | {:.4} | {} |", r.n, r.scaled_statistic, r.se, target);
    }
    if let Some(s) = study.slope {
        let _ = writeln!(md, "\nSlope of the mean log Bayes factor against {}: {s:.4}", study.scale);
    }
    md
}

fn cmd_rates(a: &RatesArgs) -> CliResult<Report> {
    let pair: Pair = a.pair.parse()?;
    let (d, truth) = match &a.sigma {
        Some(text) => {
            let sigma = parse_matrix(text)?;
            (sigma.dim(), Truth::Fixed { theta: HalfPrecision::from_covariance(&sigma)? })
        }
        None => (a.d, Truth::Prior { structure: a.truth.parse()? }),
    };
    if d == 0 {
        return Err(config_error("d must be positive"));
    }
    let alpha = (a.prior_size + d as f64 + 1.0) / 2.0;
    let hyper = Hyper::wishart(alpha, SymMatrix::scaled_identity(d, a.rate))?;
    let config = RateStudyConfig { pair, d, truth, hyper, n_grid: a.n.clone(), reps: a.reps, seed: a.seed };
    let study = rate_study(&config)?;
    let mut extra = Vec::new();
    if let Some(path) = &a.csv_out {
        write_file(path, &study.to_csv()?)?;
        extra.push(path.clone());
    }
    #[derive(Serialize)]
    struct RatesOutput<'a> {
        config: &'a RateStudyConfig,
        study: &'a RateStudy,
    }
    Ok(Report {
        markdown: rates_markdown(&study),
        json: to_json(&RatesOutput { config: &config, study: &study })?,
        config: serde_json::to_value(&config)?,
        seed: Some(a.seed),
        extra_outputs: extra,
    })
}
