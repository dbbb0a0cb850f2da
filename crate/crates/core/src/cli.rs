//! Command-line front end: `summarize`, `fit`, `select` and `bootstrap`.
//!
//! Every flag can also be given in a plain-text `--config` file of
//! `key = value` lines (`#` starts a comment), where `key` is the flag name
//! without the leading dashes. Flags on the command line override the file.
//!
//! Exit codes: 0 success, 2 input error, 3 non-convergence or an emptied
//! component, 4 internal numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use ndarray::Array2;

use crate::distance::pairwise_matrix;
use crate::ecm::{fit, Control, FittedModel, ModelSpec};
use crate::edm::ModelType;
use crate::error::MedseqError;
use crate::gating::{GatingConfig, GatingMode, NoiseGating, DEFAULT_MLR_ITER, DEFAULT_RIDGE};
use crate::report::{self, CoefficientLayout, ModelDocument};
use crate::selection::{grid_search, stepwise, wasw};
use crate::seqdata::{parse_csv, AggregationMap, CsvSchema, SequenceColumns, SequenceDataset};
use crate::wlbs::{gating_table, wlbs_se, wlbs_se_aggregated};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "medseq", version, about = "Cluster categorical sequences with exponential-distance mixtures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transversal state distributions, entropies, duplicates and weights.
    #[command(args_override_self = true)]
    Summarize(SummarizeArgs),
    /// Fit one model and write model.json, z.csv and gating.csv.
    #[command(args_override_self = true)]
    Fit(FitArgs),
    /// Grid or stepwise search by BIC; writes the table and the best model.
    #[command(args_override_self = true)]
    Select(SelectArgs),
    /// Weighted likelihood bootstrap standard errors for a saved fit.
    #[command(args_override_self = true)]
    Bootstrap(BootstrapArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// key = value file supplying defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Delimited file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    #[arg(long)]
    pub id_column: Option<String>,
    /// Sampling weight column; unweighted when absent.
    #[arg(long)]
    pub weight_column: Option<String>,
    /// Sequence columns: every column starting with this prefix.
    #[arg(long, group = "sequence")]
    pub sequence_prefix: Option<String>,
    /// Sequence columns: comma-separated list.
    #[arg(long, value_delimiter = ',', group = "sequence")]
    pub sequence_columns: Option<Vec<String>>,
    /// Sequence columns: inclusive header range `FIRST:LAST`.
    #[arg(long, group = "sequence")]
    pub sequence_range: Option<String>,
    /// Keep time positions `FIRST:LAST` (1-based, inclusive).
    #[arg(long)]
    pub trim: Option<String>,
    /// Merge identical rows before fitting.
    #[arg(long, action = ArgAction::Set, default_value_t = true)]
    pub aggregate: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ControlArgs {
    /// Seed for initialisation tie-breaking (mandatory).
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Also require parameters to move less than this per iteration.
    #[arg(long)]
    pub param_tol: Option<f64>,
    /// Starting noise proportion.
    #[arg(long, default_value_t = 0.05)]
    pub tau0_init: f64,
    #[arg(long, default_value_t = crate::edm::DEFAULT_LAMBDA_MAX)]
    pub lambda_max: f64,
    /// Ridge added to the gating Newton Hessian.
    #[arg(long, default_value_t = DEFAULT_RIDGE)]
    pub ridge: f64,
    #[arg(long, default_value_t = DEFAULT_MLR_ITER)]
    pub gating_max_iter: usize,
}

impl ControlArgs {
    fn control(&self) -> Control {
        Control {
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            tau0_init: self.tau0_init,
            lambda_max: self.lambda_max,
            param_tol: self.param_tol,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GatingArgs {
    /// equal, free or covariate; covariate when --covariates is given.
    #[arg(long)]
    pub gating: Option<GatingMode>,
    /// Gating covariates (select: the stepwise pool).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Whether covariates also drive the noise component.
    #[arg(long, default_value_t = NoiseGating::NGN)]
    pub noise_gating: NoiseGating,
}

impl GatingArgs {
    fn config(&self, control: &ControlArgs) -> Result<GatingConfig, MedseqError> {
        let mode = self.gating.unwrap_or(if self.covariates.is_empty() {
            GatingMode::Free
        } else {
            GatingMode::Covariate
        });
        if mode != GatingMode::Covariate && !self.covariates.is_empty() {
            return Err(MedseqError::InvalidInput(format!(
                "--covariates requires covariate gating, not '{mode}'"
            )));
        }
        Ok(GatingConfig {
            mode,
            covariates: if mode == GatingMode::Covariate { self.covariates.clone() } else { Vec::new() },
            noise_gating: self.noise_gating,
            ridge: control.ridge,
            max_iter: control.gating_max_iter,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub control: ControlArgs,
    #[command(flatten)]
    pub gating: GatingArgs,
    /// Model type: CC, UC, CU, UU, optionally followed by N.
    #[arg(long)]
    pub model: ModelType,
    /// Number of components, noise included.
    #[arg(long)]
    pub g: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Search {
    Grid,
    Forward,
    Backward,
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub control: ControlArgs,
    #[command(flatten)]
    pub gating: GatingArgs,
    #[arg(long, value_enum, default_value_t = Search::Grid)]
    pub search: Search,
    /// Grid model types.
    #[arg(long, value_delimiter = ',', default_value = "CC,UC,CU,UU,CCN,UCN,CUN,UUN")]
    pub models: Vec<ModelType>,
    /// Grid range of G, `FIRST:LAST`.
    #[arg(long, default_value = "1:9")]
    pub g_range: String,
    /// Stepwise starting model type.
    #[arg(long, default_value_t = ModelType::CC)]
    pub model: ModelType,
    /// Stepwise starting number of components.
    #[arg(long, default_value_t = 1)]
    pub g: usize,
}

#[derive(Debug, Clone, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    /// Directory holding model.json and z.csv from `fit` or `select`.
    #[arg(long)]
    pub model_dir: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[arg(long)]
    pub seed: u64,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<MedseqError> for Failure {
    fn from(e: MedseqError) -> Self {
        let code = match e {
            MedseqError::EmptyComponent { .. } => EXIT_NOT_CONVERGED,
            MedseqError::NonFinite(_) => EXIT_INTERNAL,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = std::result::Result<i32, Failure>;

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Messages go to stdout, errors to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {}", e.message);
            return e.code;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

/// Inserts `--key=value` for every line of the `--config` file directly
/// after the subcommand, so explicit flags (which come later) win. Keys the
/// subcommand does not accept are skipped so one file can serve all of them.
pub fn expand_config(args: Vec<OsString>) -> std::result::Result<Vec<OsString>, Failure> {
    let known: Vec<String> = args
        .get(1)
        .and_then(|sub| {
            let cmd = Cli::command();
            let sub = cmd.find_subcommand(sub.to_string_lossy().as_ref())?.clone();
            Some(sub.get_arguments().filter_map(|a| a.get_long()).map(str::to_string).collect())
        })
        .unwrap_or_default();
    let mut path = None;
    for (i, a) in args.iter().enumerate().skip(1) {
        let s = a.to_string_lossy();
        if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else if s == "--config" {
            path = args.get(i + 1).map(PathBuf::from);
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| Failure {
        code: EXIT_INPUT,
        message: format!("cannot read config {}: {e}", path.display()),
    })?;
    let mut injected = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Failure {
            code: EXIT_INPUT,
            message: format!("{}:{}: expected key = value", path.display(), lineno + 1),
        })?;
        let key = key.trim().trim_start_matches('-');
        if key == "config" || !known.iter().any(|k| k == key) {
            continue;
        }
        injected.push(OsString::from(format!("--{key}={}", value.trim())));
    }
    let mut out = args;
    let at = out.len().min(2);
    out.splice(at..at, injected);
    Ok(out)
}

fn execute(command: Command) -> CliResult {
    let threads = match &command {
        Command::Summarize(a) => a.common.threads,
        Command::Fit(a) => a.common.threads,
        Command::Select(a) => a.common.threads,
        Command::Bootstrap(a) => a.common.threads,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Failure {
        code: EXIT_INTERNAL,
        message: format!("cannot start worker pool: {e}"),
    })?;
    pool.install(|| match command {
        Command::Summarize(a) => cmd_summarize(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Select(a) => cmd_select(&a),
        Command::Bootstrap(a) => cmd_bootstrap(&a),
    })
}

fn parse_range(s: &str, what: &str) -> std::result::Result<(usize, usize), MedseqError> {
    let bad = || MedseqError::InvalidInput(format!("{what} must be FIRST:LAST, got '{s}'"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a = a.trim().parse::<usize>().map_err(|_| bad())?;
    let b = b.trim().parse::<usize>().map_err(|_| bad())?;
    if a == 0 || a > b {
        return Err(bad());
    }
    Ok((a, b))
}

/// Raw data plus 1-based labels for the retained time positions.
struct Loaded {
    data: SequenceDataset,
    times: Vec<String>,
}

fn load(input: &InputArgs, covariates: &[String]) -> std::result::Result<Loaded, MedseqError> {
    let sequence = if let Some(p) = &input.sequence_prefix {
        SequenceColumns::Prefix(p.clone())
    } else if let Some(names) = &input.sequence_columns {
        SequenceColumns::Names(names.clone())
    } else if let Some(r) = &input.sequence_range {
        let (first, last) = r.split_once(':').ok_or_else(|| {
            MedseqError::InvalidInput(format!("--sequence-range must be FIRST:LAST, got '{r}'"))
        })?;
        SequenceColumns::Range {
            first: first.trim().into(),
            last: last.trim().into(),
        }
    } else {
        return Err(MedseqError::InvalidInput(
            "one of --sequence-prefix, --sequence-columns or --sequence-range is required".into(),
        ));
    };
    if !input.delimiter.is_ascii() {
        return Err(MedseqError::InvalidInput("delimiter must be an ASCII character".into()));
    }
    let schema = CsvSchema {
        id: input.id_column.clone(),
        sequence,
        weight: input.weight_column.clone(),
        covariates: covariates.to_vec(),
        delimiter: input.delimiter as u8,
    };
    let mut data = parse_csv(&input.input, &schema)?;
    let mut first = 1;
    if let Some(t) = &input.trim {
        let (a, b) = parse_range(t, "--trim")?;
        data = data.trim_time_range(a - 1, b - 1)?;
        first = a;
    }
    let times = (first..first + data.t()).map(|t| t.to_string()).collect();
    Ok(Loaded { data, times })
}

/// Data the model is estimated on; aggregation keys include covariates when
/// any are loaded.
fn prepare(raw: &SequenceDataset, aggregate: bool) -> (SequenceDataset, Option<AggregationMap>) {
    if aggregate {
        let with_covs = !raw.covariates().names().is_empty();
        let (agg, map) = raw.aggregate_duplicates(with_covs);
        (agg, Some(map))
    } else {
        (raw.clone(), None)
    }
}

fn create_dir(dir: &Path) -> std::result::Result<(), MedseqError> {
    fs::create_dir_all(dir).map_err(|e| MedseqError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn cmd_summarize(a: &SummarizeArgs) -> CliResult {
    let loaded = load(&a.input, &[])?;
    let ds = &loaded.data;
    let dir = a.common.out.join("summary");
    create_dir(&dir)?;
    report::write_state_distribution(dir.join("state_distribution.csv"), ds, &loaded.times)?;
    report::write_entropy(dir.join("entropy.csv"), ds, &loaded.times)?;
    report::write_duplicates(dir.join("duplicates.csv"), ds)?;
    report::write_weight_summary(dir.join("weights.csv"), ds)?;
    let unique = ds.aggregate_duplicates(false).0.n();
    println!(
        "n={} T={} states={} unique sequences={}",
        ds.n(),
        ds.t(),
        ds.alphabet().labels().join(","),
        unique
    );
    Ok(EXIT_OK)
}

/// Writes model.json, z.csv and gating.csv for `fit` estimated on `fit_ds`,
/// reporting responsibilities and labels on the raw rows.
fn emit_model(
    dir: &Path,
    fitted: &FittedModel,
    raw: &SequenceDataset,
    fit_ds: &SequenceDataset,
    map: Option<&AggregationMap>,
) -> std::result::Result<(), MedseqError> {
    create_dir(dir)?;
    let (z, labels) = match map {
        Some(m) => (m.expand_rows(&fitted.z), m.expand(&fitted.map)),
        None => (fitted.z.clone(), fitted.map.clone()),
    };
    let silhouette = if fitted.spec.g >= 2 {
        wasw(&pairwise_matrix(raw), &labels, raw.weights()).ok()
    } else {
        None
    };
    let doc = ModelDocument::new(fitted, fit_ds, raw.ids().to_vec(), labels, silhouette);
    doc.write(dir.join("model.json"))?;
    report::write_z_csv(dir.join("z.csv"), raw.ids(), &z, fitted.spec.model.has_noise())?;
    let layout = CoefficientLayout::new(&fitted.spec, &fitted.gating, &fitted.design_names, &doc.theta_sps);
    report::write_coefficients(dir.join("gating.csv"), &gating_table(&fitted.gating), None, &layout)?;
    println!(
        "{}: loglik={} params={} BIC={} iterations={} converged={} wDBS={} wASW={}",
        fitted.spec.label(),
        fitted.loglik,
        fitted.n_params,
        fitted.bic,
        fitted.iterations,
        fitted.converged,
        fitted.wdbs.map_or("NA".into(), |x| format!("{x:.4}")),
        silhouette.map_or("NA".into(), |x| format!("{x:.4}")),
    );
    for (g, s) in doc.theta_sps.iter().enumerate() {
        println!("  theta[{}] = {s}", g + 1);
    }
    Ok(())
}

fn convergence_code(fitted: &FittedModel) -> i32 {
    if fitted.converged {
        EXIT_OK
    } else {
        eprintln!(
            "warning: {} did not converge in {} iterations",
            fitted.spec.label(),
            fitted.iterations
        );
        EXIT_NOT_CONVERGED
    }
}

fn cmd_fit(a: &FitArgs) -> CliResult {
    let gating = a.gating.config(&a.control)?;
    let spec = ModelSpec::new(a.model, a.g)
        .with_gating(gating)
        .with_control(a.control.control());
    spec.check()?;
    let loaded = load(&a.input, &spec.gating.covariates)?;
    let (fit_ds, map) = prepare(&loaded.data, a.input.aggregate);
    let fitted = fit(&fit_ds, &spec)?;
    emit_model(&a.common.out, &fitted, &loaded.data, &fit_ds, map.as_ref())?;
    Ok(convergence_code(&fitted))
}

fn cmd_select(a: &SelectArgs) -> CliResult {
    let control = a.control.control();
    match a.search {
        Search::Grid => {
            let gating = a.gating.config(&a.control)?;
            let (lo, hi) = parse_range(&a.g_range, "--g-range")?;
            let g_values: Vec<usize> = (lo..=hi).collect();
            let loaded = load(&a.input, &gating.covariates)?;
            let (fit_ds, map) = prepare(&loaded.data, a.input.aggregate);
            let result = grid_search(&fit_ds, &a.models, &g_values, &gating, &control);
            create_dir(&a.common.out)?;
            report::write_grid(a.common.out.join("grid.csv"), &result.entries)?;
            let failed = result.entries.iter().filter(|e| e.error.is_some()).count();
            if failed > 0 {
                eprintln!("warning: {failed} of {} grid fits failed", result.entries.len());
            }
            let best = result.best.ok_or_else(|| Failure {
                code: EXIT_NOT_CONVERGED,
                message: "no model in the grid could be fitted".into(),
            })?;
            emit_model(&a.common.out, &best, &loaded.data, &fit_ds, map.as_ref())?;
            Ok(convergence_code(&best))
        }
        Search::Forward | Search::Backward => {
            let pool = a.gating.covariates.clone();
            let start_gating = if a.search == Search::Backward && !pool.is_empty() {
                GatingConfig {
                    ridge: a.control.ridge,
                    max_iter: a.control.gating_max_iter,
                    ..GatingConfig::covariates(pool.clone(), a.gating.noise_gating)
                }
            } else {
                GatingConfig {
                    ridge: a.control.ridge,
                    max_iter: a.control.gating_max_iter,
                    ..GatingConfig::free()
                }
            };
            let start = ModelSpec::new(a.model, a.g)
                .with_gating(start_gating)
                .with_control(control);
            start.check()?;
            let loaded = load(&a.input, &pool)?;
            let (fit_ds, map) = prepare(&loaded.data, a.input.aggregate);
            let trace = stepwise(&fit_ds, &pool, &start)?;
            create_dir(&a.common.out)?;
            report::write_stepwise(a.common.out.join("stepwise.csv"), &trace.steps)?;
            for s in &trace.steps {
                println!(
                    "step {} {:<18} {} G={} [{}] BIC={} {}",
                    s.step,
                    s.action,
                    s.model,
                    s.g,
                    s.covariates.join(","),
                    s.bic,
                    if s.accepted { "accepted" } else { "rejected" }
                );
            }
            emit_model(&a.common.out, &trace.final_model, &loaded.data, &fit_ds, map.as_ref())?;
            Ok(convergence_code(&trace.final_model))
        }
    }
}

fn cmd_bootstrap(a: &BootstrapArgs) -> CliResult {
    let doc = ModelDocument::read(a.model_dir.join("model.json"))?;
    let (ids, z_raw) = report::read_z_csv(a.model_dir.join("z.csv"))?;
    let covariates = match doc.spec.gating.mode {
        GatingMode::Covariate => doc.spec.gating.covariates.clone(),
        _ => Vec::new(),
    };
    let loaded = load(&a.input, &covariates)?;
    let raw = &loaded.data;
    if ids != raw.ids() {
        return Err(MedseqError::InvalidInput("z.csv rows do not match the input data".into()).into());
    }
    let (fit_ds, map) = prepare(raw, a.input.aggregate);
    let z = match &map {
        Some(m) => first_rows(&z_raw, m, fit_ds.n()),
        None => z_raw,
    };
    let fitted = doc.to_fitted(&fit_ds, z)?;
    let result = match &map {
        Some(m) => wlbs_se_aggregated(&fitted, &fit_ds, raw.weights(), m, a.replicates, a.seed)?,
        None => wlbs_se(&fitted, &fit_ds, a.replicates, a.seed)?,
    };
    create_dir(&a.common.out)?;
    let layout = CoefficientLayout::new(&fitted.spec, &fitted.gating, &fitted.design_names, &doc.theta_sps);
    report::write_bootstrap(a.common.out.join("se.csv"), &result, &layout)?;
    report::write_draws(a.common.out.join("draws.csv"), &result, &layout)?;
    println!(
        "{} replicates: {} succeeded, {} failed",
        result.replicates,
        result.draws.len(),
        result.failed.len()
    );
    println!("estimates (approximate WLBS standard errors):");
    for c in layout.first_column..result.estimate.ncols() {
        println!("  {} {}", layout.components[c], layout.labels[c]);
        for (j, term) in layout.terms.iter().enumerate() {
            println!(
                "    {term:<16} {:>10.3} ({:.3})",
                result.estimate[[j, c]],
                result.se[[j, c]]
            );
        }
    }
    Ok(EXIT_OK)
}

/// Rows of `z` at the first occurrence of each unique row.
fn first_rows(z: &Array2<f64>, map: &AggregationMap, m: usize) -> Array2<f64> {
    let mut out = Array2::zeros((m, z.ncols()));
    let mut seen = vec![false; m];
    for (i, &u) in map.unique_index_of.iter().enumerate() {
        if !seen[u] {
            seen[u] = true;
            out.row_mut(u).assign(&z.row(i));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_lines_precede_explicit_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "# comment\nseed = 7\nmodel=UU\nreplicates = 5\n\n g = 2 \n").unwrap();
        let args = os(&["medseq", "fit", "--config", cfg.to_str().unwrap(), "--g", "3"]);
        let out = expand_config(args).unwrap();
        assert_eq!(out[2..5], os(&["--seed=7", "--model=UU", "--g=2"])[..]);
        let cli = Cli::try_parse_from(
            out.into_iter()
                .chain(os(&["--input", "x.csv", "--sequence-prefix", "s"]))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let Command::Fit(f) = cli.command else { panic!() };
        assert_eq!(f.g, 3);
        assert_eq!(f.model, ModelType::UU);
        assert_eq!(f.control.seed, 7);
    }

    #[test]
    fn seed_is_mandatory() {
        let r = Cli::try_parse_from(os(&[
            "medseq", "fit", "--input", "x", "--sequence-prefix", "s", "--model", "CC", "--g", "1",
        ]));
        assert!(r.is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(Failure::from(MedseqError::Schema("x".into())).code, EXIT_INPUT);
        let empty = MedseqError::EmptyComponent {
            component: 0,
            iteration: 1,
        };
        assert_eq!(Failure::from(empty).code, EXIT_NOT_CONVERGED);
        assert_eq!(Failure::from(MedseqError::NonFinite("x".into())).code, EXIT_INTERNAL);
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("3:72", "x").unwrap(), (3, 72));
        assert!(parse_range("0:2", "x").is_err());
        assert!(parse_range("4:2", "x").is_err());
        assert!(parse_range("4", "x").is_err());
    }
}
