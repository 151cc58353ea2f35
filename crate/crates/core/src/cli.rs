//! Batch front end. Every command reads an optional JSON config whose keys
//! mirror the long flags; flags given on the command line win.
//!
//! Exit status: 0 success, 1 check failure, 2 configuration error, 3 data
//! error, 4 solver failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{self, ConstraintReport, Factorization, FactorizationConfig};
use crate::groups::{GroupStructure, TreeStructure};
use crate::hkl::{self, Basis, HklOptions, KernelSpec, SubsetDag};
use crate::models::{self, FitResult, PathSpec, Problem};
use crate::norms::{LatentDecomposition, NormSpec};
use crate::proxcheck::{self, SuiteOptions};
use crate::solver::{Acceleration, LossKind, SolverConfig, StepRule, TraceRow};
use crate::synth::{self, Rect, Scenario, SynthData, SynthSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "structsparse", version, about = "Structured sparsity: fits, paths, factorizations, kernel selection")]
pub struct Cli {
    /// Worker threads for cross-validation folds, factorization columns and
    /// feature construction.
    #[arg(long, global = true, env = "STRUCTSPARSE_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit one penalized model.
    Fit(FitArgs),
    /// Fit along a decreasing λ grid.
    Path(PathArgs),
    /// K-fold cross-validation over the λ grid, with optional OLS-hybrid selection.
    Cv(CvArgs),
    /// Dictionary learning / sparse PCA on a sample-by-variable matrix.
    Dict(DictArgs),
    /// Hierarchical topics on a bag-of-words corpus.
    Topics(TopicsArgs),
    /// Hierarchical kernel selection over variable subsets.
    Hkl(HklArgs),
    /// Write a seeded synthetic dataset with its ground truth.
    Synth(SynthArgs),
    /// Check every proximal operator against an independent oracle.
    Proxcheck(ProxcheckArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// JSON config; keys mirror the long flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV with the target in the first column and features after it.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// The data file starts with a header row.
    #[arg(long)]
    pub header: bool,
    /// l1, group, latent-group or tv1d.
    #[arg(long)]
    pub norm: Option<String>,
    /// Group structure JSON for group and latent-group norms.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// square or logistic.
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub intercept: bool,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Plain proximal gradient instead of FISTA.
    #[arg(long)]
    pub ista: bool,
    /// Backtracking line search instead of a fixed step.
    #[arg(long)]
    pub backtracking: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Record wall-clock times in traces (outputs are then not reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GridArgs {
    #[arg(long)]
    pub n_lambdas: Option<usize>,
    /// Smallest λ as a fraction of the largest.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Upper end of the grid (required for tv1d).
    #[arg(long)]
    pub lambda_max: Option<f64>,
    /// Explicit comma-separated, strictly decreasing grid.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long)]
    pub no_warm_start: bool,
}

#[derive(Args, Debug, Clone)]
pub struct PathArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Args, Debug, Clone)]
pub struct CvArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also refit every path support by least squares and select by CV.
    #[arg(long)]
    pub ols_hybrid: bool,
}

#[derive(Args, Debug, Clone)]
pub struct DictArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV, one sample per row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub header: bool,
    #[arg(long)]
    pub atoms: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Code constraint: l1, l2 or none.
    #[arg(long)]
    pub omega_a: Option<String>,
    /// Dictionary penalty: l1, l2, none, or a group structure JSON file.
    #[arg(long)]
    pub omega_d: Option<String>,
    #[arg(long)]
    pub nonneg_d: bool,
    #[arg(long)]
    pub nonneg_a: bool,
    #[arg(long)]
    pub unit_l1_dict: bool,
    #[arg(long)]
    pub outer_iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct TopicsArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// "doc_id term_id count" lines.
    #[arg(long)]
    pub triplets: Option<PathBuf>,
    /// "term_id token" lines.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Topic tree as JSON `{"parent": [null, 0, 1]}`; a 3-node chain by default.
    #[arg(long)]
    pub tree: Option<PathBuf>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub outer_iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct HklArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub header: bool,
    #[arg(long)]
    pub max_order: Option<usize>,
    /// polynomials or gaussian_bumps.
    #[arg(long)]
    pub basis: Option<String>,
    /// Basis functions per variable.
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated per-node weights.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(long)]
    pub penalize_root: bool,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// lasso, group, interval, rectangle, tree, latent, dict, topics or hkl.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub group_size: Option<usize>,
    /// Planted rectangle as r0,r1,c0,c1 (inclusive).
    #[arg(long, value_delimiter = ',')]
    pub rect: Option<Vec<usize>>,
    #[arg(long)]
    pub doc_length: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ProxcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub cases: usize,
    /// Write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Perturb operator outputs to confirm the suite fails.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

/// Parses `args` (program name first) and runs the command; returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return EXIT_CONFIG;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_CONFIG;
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e.root(), Error::Config(_)) {
                eprintln!("run `structsparse help` for usage");
            }
            e.exit_code()
        }
    }
}

fn dispatch(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Fit(a) => cmd_fit(a),
        Command::Path(a) => cmd_path(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Dict(a) => cmd_dict(a),
        Command::Topics(a) => cmd_topics(a),
        Command::Hkl(a) => cmd_hkl(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Proxcheck(a) => cmd_proxcheck(a),
    }
}

/// JSON run configuration. Keys mirror the long flags of every command;
/// unknown keys are rejected.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub header: Option<bool>,
    pub norm: Option<String>,
    pub groups: Option<PathBuf>,
    pub loss: Option<String>,
    pub intercept: Option<bool>,
    pub lambda: Option<f64>,
    pub solver: Option<SolverConfig>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub path: Option<PathSpec>,
    pub n_lambdas: Option<usize>,
    pub ratio: Option<f64>,
    pub lambda_max: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub ols_hybrid: Option<bool>,
    pub out: Option<PathBuf>,
    pub timing: Option<bool>,
    pub factorization: Option<FactorizationConfig>,
    pub atoms: Option<usize>,
    pub omega_a: Option<String>,
    pub omega_d: Option<String>,
    pub outer_iters: Option<usize>,
    pub triplets: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub tree: Option<PathBuf>,
    pub top_k: Option<usize>,
    pub max_order: Option<usize>,
    pub basis: Option<String>,
    pub b: Option<usize>,
    pub gamma: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub penalize_root: Option<bool>,
    pub synth: Option<SynthSpec>,
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else { return Ok(RunConfig::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// A boolean switch is on when the flag is given or the config sets it.
fn switch(flag: bool, cfg: Option<bool>) -> bool {
    flag || cfg.unwrap_or(false)
}

fn required<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing --{name}")))
}

fn parse_loss(s: Option<&str>) -> Result<LossKind> {
    match s.unwrap_or("square") {
        "square" => Ok(LossKind::Square),
        "logistic" => Ok(LossKind::Logistic),
        other => Err(Error::Config(format!("unknown loss `{other}`"))),
    }
}

/// Reads a group structure file. Unreadable or malformed files are data
/// errors; structurally invalid groups are configuration errors.
pub fn read_groups(path: &Path) -> Result<GroupStructure> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let file: crate::groups::GroupStructureFile =
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    file.try_into()
}

pub fn build_norm(kind: &str, groups: Option<&Path>, p: usize) -> Result<NormSpec> {
    let structure = || -> Result<GroupStructure> {
        let path = groups.ok_or_else(|| Error::Config(format!("norm `{kind}` needs --groups")))?;
        let s = read_groups(path)?;
        if s.p() != p {
            return Err(Error::Config(format!("group file covers {} variables, data has {p}", s.p())));
        }
        Ok(s)
    };
    Ok(match kind {
        "l1" => NormSpec::L1,
        "tv1d" => NormSpec::Tv1d,
        "group" => NormSpec::Group { structure: structure()? },
        "latent-group" | "latent_group" | "latent" => NormSpec::LatentGroup { structure: structure()? },
        other => return Err(Error::Config(format!("unknown norm `{other}`"))),
    })
}

/// Reads a numeric CSV (optionally with a header row) into a matrix.
pub fn read_matrix_csv(path: &Path, header: bool) -> Result<Array2<f64>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(header).trim(csv::Trim::All).from_reader(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let row: std::result::Result<Vec<f64>, _> = rec.iter().map(|f| f.parse::<f64>()).collect();
        let row = row.map_err(|_| Error::Data(format!("{}: row {} is not numeric", path.display(), i + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Data(format!("{}: row {} has {} fields, expected {}", path.display(), i + 1, row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::Data(format!("{}: no data", path.display())));
    }
    let (n, m) = (rows.len(), rows[0].len());
    Ok(Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect()).expect("rectangular"))
}

/// Target in the first column, features after it.
pub fn read_regression_csv(path: &Path, header: bool) -> Result<(Array2<f64>, Array1<f64>)> {
    let m = read_matrix_csv(path, header)?;
    if m.ncols() < 2 {
        return Err(Error::Data(format!("{}: need a target and at least one feature", path.display())));
    }
    let y = m.column(0).to_owned();
    let x = m.slice(ndarray::s![.., 1..]).to_owned();
    Ok((x, y))
}

pub fn write_matrix_csv(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_io)?;
    for row in m.rows() {
        wtr.write_record(row.iter().map(|v| v.to_string())).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

fn write_regression_csv(path: &Path, x: &Array2<f64>, y: &Array1<f64>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_io)?;
    for (i, row) in x.rows().into_iter().enumerate() {
        let rec: Vec<String> = std::iter::once(y[i].to_string()).chain(row.iter().map(|v| v.to_string())).collect();
        wtr.write_record(rec).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(csv_io)?;
    wtr.write_record(header).map_err(csv_io)?;
    for r in rows {
        wtr.write_record(r).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn prepare_out(out: Option<PathBuf>) -> Result<PathBuf> {
    let dir = required(out, "out")?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

/// Everything needed to rebuild a [`Problem`] from flags and config.
struct ModelSetup {
    problem: Problem,
    solver: SolverConfig,
    out: PathBuf,
    timing: bool,
    cfg: RunConfig,
}

fn setup_model(a: &ModelArgs, lambda: f64) -> Result<ModelSetup> {
    let cfg = load_config(a.config.as_deref())?;
    let mut solver = cfg.solver.clone().unwrap_or_default();
    if let Some(t) = a.tol.or(cfg.tol) {
        solver.tol = t;
    }
    if let Some(m) = a.max_iter.or(cfg.max_iter) {
        solver.max_iter = m;
    }
    if a.ista {
        solver.acceleration = Acceleration::Ista;
    }
    if a.backtracking {
        solver.step_rule = StepRule::Backtracking;
    }
    solver.validate()?;
    let loss = parse_loss(a.loss.as_deref().or(cfg.loss.as_deref()))?;
    let norm_kind = a.norm.clone().or(cfg.norm.clone()).unwrap_or_else(|| "l1".into());
    let data = required(a.data.clone().or(cfg.data.clone()), "data")?;
    let (x, y) = read_regression_csv(&data, switch(a.header, cfg.header))?;
    let groups = a.groups.clone().or(cfg.groups.clone());
    let norm = build_norm(&norm_kind, groups.as_deref(), x.ncols())?;
    let problem = Problem::new(x, y, loss, norm, lambda)?.with_intercept(switch(a.intercept, cfg.intercept));
    let out = prepare_out(a.out.clone().or(cfg.out.clone()))?;
    Ok(ModelSetup { problem, solver, out, timing: switch(a.timing, cfg.timing), cfg })
}

/// Model file written by `fit`; readable with [`read_model`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub norm: NormSpec,
    pub loss: LossKind,
    pub lambda: f64,
    pub intercept: f64,
    pub w: Vec<f64>,
    pub support: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<LatentDecomposition>,
    pub diagnostics: models::Diagnostics,
}

impl ModelFile {
    pub fn new(problem: &Problem, fit: &FitResult) -> Self {
        Self {
            norm: problem.norm.clone(),
            loss: problem.loss,
            lambda: fit.lambda,
            intercept: fit.intercept,
            w: fit.w.clone(),
            support: fit.support.clone(),
            latent: fit.latent.clone(),
            diagnostics: fit.diagnostics.clone(),
        }
    }
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn write_trace(path: &Path, trace: &[TraceRow], timing: bool) -> Result<()> {
    let rows: Vec<Vec<String>> = trace
        .iter()
        .map(|r| {
            vec![
                r.iter.to_string(),
                r.objective.to_string(),
                r.residual.to_string(),
                if timing { r.wall_time_ns.to_string() } else { "0".into() },
            ]
        })
        .collect();
    write_table(path, &["iter", "objective", "residual", "wall_time_ns"], &rows)
}

/// Reads a trace CSV back into rows.
pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Data(e.to_string()))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
        let bad = || Error::Data(format!("{}: malformed trace row", path.display()));
        out.push(TraceRow {
            iter: rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(bad)?,
            objective: rec.get(1).and_then(|v| v.parse().ok()).ok_or_else(bad)?,
            residual: rec.get(2).and_then(|v| v.parse().ok()).ok_or_else(bad)?,
            wall_time_ns: rec.get(3).and_then(|v| v.parse().ok()).ok_or_else(bad)?,
        });
    }
    Ok(out)
}

fn cmd_fit(a: &FitArgs) -> Result<i32> {
    let cfg = load_config(a.model.config.as_deref())?;
    let lambda = a.lambda.or(cfg.lambda).ok_or_else(|| Error::Config("missing --lambda".into()))?;
    let s = setup_model(&a.model, lambda)?;
    let fit = models::fit(&s.problem, &s.solver)?;
    write_json(&s.out.join("model.json"), &ModelFile::new(&s.problem, &fit))?;
    write_trace(&s.out.join("trace.csv"), &fit.trace, s.timing)?;
    let d = &fit.diagnostics;
    println!("norm: {}", s.problem.norm.name());
    println!("lambda: {}", fit.lambda);
    println!("support size: {}", fit.support.len());
    println!("support: {:?}", fit.support);
    println!("objective: {}", d.objective);
    println!("iterations: {}", d.iterations);
    println!("residual: {} ({})", d.residual, if d.kkt { "kkt" } else { "relative objective change" });
    if !d.converged {
        eprintln!("error: solver stopped at the iteration cap without meeting the tolerance");
        return Ok(EXIT_SOLVER);
    }
    Ok(EXIT_OK)
}

fn path_spec(g: &GridArgs, cfg: &RunConfig) -> PathSpec {
    let mut spec = cfg.path.clone().unwrap_or_default();
    if let Some(n) = g.n_lambdas.or(cfg.n_lambdas) {
        spec.n_lambdas = n;
    }
    if let Some(r) = g.ratio.or(cfg.ratio) {
        spec.ratio = r;
    }
    if let Some(l) = g.lambda_max.or(cfg.lambda_max) {
        spec.lambda_max = Some(l);
    }
    if let Some(l) = g.lambdas.clone().or(cfg.lambdas.clone()) {
        spec.lambdas = Some(l);
    }
    if g.no_warm_start {
        spec.warm_start = false;
    }
    spec
}

fn path_rows(path: &models::RegPath) -> Vec<Vec<String>> {
    path.lambdas
        .iter()
        .zip(&path.points)
        .map(|(l, pt)| match pt {
            Ok(f) => vec![
                l.to_string(),
                f.diagnostics.objective.to_string(),
                f.support.len().to_string(),
                f.diagnostics.iterations.to_string(),
                f.diagnostics.converged.to_string(),
                String::new(),
            ],
            Err(e) => vec![l.to_string(), "NaN".into(), String::new(), String::new(), "false".into(), e.clone()],
        })
        .collect()
}

fn all_failed(path: &models::RegPath) -> Option<String> {
    if path.fits().next().is_none() {
        path.points.iter().find_map(|p| p.as_ref().err().cloned())
    } else {
        None
    }
}

fn cmd_path(a: &PathArgs) -> Result<i32> {
    let s = setup_model(&a.model, 0.0)?;
    let spec = path_spec(&a.grid, &s.cfg);
    let path = models::regularization_path(&s.problem, &spec, &s.solver)?;
    write_table(
        &s.out.join("path.csv"),
        &["lambda", "objective", "support_size", "iterations", "converged", "error"],
        &path_rows(&path),
    )?;
    let failed = path.points.iter().filter(|p| p.is_err()).count();
    println!("path: {} points, {} failed", path.lambdas.len(), failed);
    if let Some(e) = all_failed(&path) {
        eprintln!("error: every path point failed: {e}");
        return Ok(EXIT_SOLVER);
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CvSummary<'a> {
    folds: usize,
    seed: u64,
    best_lambda: f64,
    best_index: usize,
    cv_model: ModelFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    ols_hybrid: Option<HybridSummary<'a>>,
}

#[derive(Serialize)]
struct HybridSummary<'a> {
    lambda: f64,
    path_index: usize,
    support: &'a [usize],
    w: &'a [f64],
    intercept: f64,
    cv_errors: &'a [f64],
}

fn cmd_cv(a: &CvArgs) -> Result<i32> {
    let s = setup_model(&a.model, 0.0)?;
    let spec = path_spec(&a.grid, &s.cfg);
    let folds = a.folds.or(s.cfg.folds).unwrap_or(5);
    let seed = a.seed.or(s.cfg.seed).unwrap_or(0);
    let cv = models::cross_validate(&s.problem, &spec, folds, seed, &s.solver)?;
    let path = models::regularization_path(&s.problem, &spec, &s.solver)?;
    let mut rows = path_rows(&path);
    for (r, c) in rows.iter_mut().zip(&cv.table) {
        r.truncate(3);
        r.push(c.mean.to_string());
        r.push(c.sd.to_string());
    }
    write_table(&s.out.join("cv.csv"), &["lambda", "objective", "support_size", "cv_mean", "cv_sd"], &rows)?;
    let best = match &path.points[cv.best_index] {
        Ok(f) => f.clone(),
        Err(e) => return Err(Error::Convergence { iterations: 0, residual: f64::NAN }.context(format!("fit at the selected λ failed: {e}"))),
    };
    let hybrid = if switch(a.ols_hybrid, s.cfg.ols_hybrid) {
        Some(models::ols_hybrid(&s.problem, &path, folds, seed)?)
    } else {
        None
    };
    let summary = CvSummary {
        folds,
        seed,
        best_lambda: cv.best_lambda,
        best_index: cv.best_index,
        cv_model: ModelFile::new(&s.problem, &best),
        ols_hybrid: hybrid.as_ref().map(|h| HybridSummary {
            lambda: h.fit.lambda,
            path_index: h.path_index,
            support: &h.fit.support,
            w: &h.fit.w,
            intercept: h.fit.intercept,
            cv_errors: &h.cv_errors,
        }),
    };
    write_json(&s.out.join("cv.json"), &summary)?;
    println!("best lambda: {} (index {})", cv.best_lambda, cv.best_index);
    println!("support size at best lambda: {}", best.support.len());
    if let Some(h) = &hybrid {
        println!("ols-hybrid lambda: {} support {:?}", h.fit.lambda, h.fit.support);
    }
    Ok(EXIT_OK)
}

fn parse_code_norm(s: &str, atoms: usize) -> Result<Option<NormSpec>> {
    match s {
        "none" => Ok(None),
        "l1" => Ok(Some(NormSpec::L1)),
        "l2" => Ok(Some(NormSpec::l2(atoms)?)),
        other => Err(Error::Config(format!("unknown code constraint `{other}`"))),
    }
}

fn parse_dict_norm(s: &str, m: usize) -> Result<Option<NormSpec>> {
    match s {
        "none" => Ok(None),
        "l1" => Ok(Some(NormSpec::L1)),
        "l2" => Ok(Some(NormSpec::l2(m)?)),
        path => {
            let s = read_groups(Path::new(path))?;
            if s.p() != m {
                return Err(Error::Config(format!("dictionary groups cover {} variables, data has {m}", s.p())));
            }
            Ok(Some(NormSpec::Group { structure: s }))
        }
    }
}

#[derive(Serialize)]
struct FactorizationManifest<'a> {
    m: usize,
    n: usize,
    atoms: usize,
    objective: f64,
    outer_iterations: usize,
    constraints: &'a ConstraintReport,
    dictionary: &'static str,
    codes: &'static str,
    objective_curve: &'static str,
    config: &'a FactorizationConfig,
}

fn write_factorization(out: &Path, f: &Factorization) -> Result<ConstraintReport> {
    let report = factorization::constraint_report(f)?;
    write_matrix_csv(&out.join("D.csv"), &f.d)?;
    write_matrix_csv(&out.join("A.csv"), &f.a)?;
    let rows: Vec<Vec<String>> = f.objective_curve.iter().enumerate().map(|(i, v)| vec![i.to_string(), v.to_string()]).collect();
    write_table(&out.join("objective.csv"), &["half_step", "objective"], &rows)?;
    write_json(&out.join("constraints.json"), &report)?;
    write_json(
        &out.join("manifest.json"),
        &FactorizationManifest {
            m: f.d.nrows(),
            n: f.a.ncols(),
            atoms: f.d.ncols(),
            objective: f.objective(),
            outer_iterations: f.outer_iterations,
            constraints: &report,
            dictionary: "D.csv",
            codes: "A.csv",
            objective_curve: "objective.csv",
            config: &f.config,
        },
    )?;
    Ok(report)
}

fn factorization_verdict(f: &Factorization, report: &ConstraintReport) -> i32 {
    println!("objective: {}", f.objective());
    println!("alternations: {}", f.outer_iterations);
    println!("constraints: {}", if report.pass { "all pass" } else { "VIOLATED" });
    if report.pass {
        EXIT_OK
    } else {
        EXIT_CHECK
    }
}

fn cmd_dict(a: &DictArgs) -> Result<i32> {
    let cfg = load_config(a.config.as_deref())?;
    let data = required(a.data.clone().or(cfg.data.clone()), "data")?;
    let samples = read_matrix_csv(&data, switch(a.header, cfg.header))?;
    let x = samples.t().to_owned();
    let m = x.nrows();
    let mut fc = cfg.factorization.clone().unwrap_or_default();
    if let Some(k) = a.atoms.or(cfg.atoms) {
        fc.atoms = k;
    }
    if let Some(l) = a.lambda.or(cfg.lambda) {
        fc.lambda = l;
    }
    if let Some(s) = a.omega_a.clone().or(cfg.omega_a.clone()) {
        fc.omega_a = parse_code_norm(&s, fc.atoms)?;
    }
    if let Some(s) = a.omega_d.clone().or(cfg.omega_d.clone()) {
        fc.omega_d = parse_dict_norm(&s, m)?;
    }
    fc.nonneg_a |= switch(a.nonneg_a, None);
    fc.nonneg_d |= switch(a.nonneg_d, None);
    fc.unit_l1_dict |= switch(a.unit_l1_dict, None);
    if let Some(it) = a.outer_iters.or(cfg.outer_iters) {
        fc.outer_iters = it;
    }
    if let Some(seed) = a.seed.or(cfg.seed) {
        fc.seed = seed;
    }
    let out = prepare_out(a.out.clone().or(cfg.out.clone()))?;
    let f = factorization::fit_factorization(x.view(), &fc)?;
    let report = write_factorization(&out, &f)?;
    Ok(factorization_verdict(&f, &report))
}

#[derive(Deserialize)]
struct TreeFile {
    parent: Vec<Option<usize>>,
}

fn cmd_topics(a: &TopicsArgs) -> Result<i32> {
    let cfg = load_config(a.config.as_deref())?;
    let triplets = required(a.triplets.clone().or(cfg.triplets.clone()), "triplets")?;
    let vocab = required(a.vocab.clone().or(cfg.vocab.clone()), "vocab")?;
    let corpus = factorization::read_corpus(&triplets, &vocab)?;
    let tree = match a.tree.clone().or(cfg.tree.clone()) {
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| Error::Data(format!("{}: {e}", p.display())))?;
            let tf: TreeFile = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            TreeStructure::new(tf.parent)?
        }
        None => TreeStructure::chain(3)?,
    };
    let mut fc = cfg.factorization.clone().unwrap_or_default();
    if let Some(it) = a.outer_iters.or(cfg.outer_iters) {
        fc.outer_iters = it;
    }
    if let Some(seed) = a.seed.or(cfg.seed) {
        fc.seed = seed;
    }
    let top_k = a.top_k.or(cfg.top_k).unwrap_or(5);
    let out = prepare_out(a.out.clone().or(cfg.out.clone()))?;
    let f = factorization::fit_topics(corpus.counts.view(), &tree, &fc)?;
    let report = write_factorization(&out, &f)?;
    let topics = factorization::topic_report(&f, &tree, &corpus.vocab, top_k);
    write_json(&out.join("topics.json"), &topics)?;
    let mut rows = Vec::new();
    for t in &topics {
        for (rank, (tok, w)) in t.top_tokens.iter().zip(&t.top_weights).enumerate() {
            rows.push(vec![
                t.node.to_string(),
                t.parent.map_or(String::new(), |p| p.to_string()),
                (rank + 1).to_string(),
                tok.clone(),
                w.to_string(),
                t.usage.to_string(),
            ]);
        }
    }
    write_table(&out.join("topics.csv"), &["node", "parent", "rank", "token", "weight", "usage"], &rows)?;
    let mut summary = String::new();
    for t in &topics {
        let depth = std::iter::successors(t.parent, |&p| tree.parent(p)).count();
        writeln!(summary, "{}topic {} (usage {:.2}): {}", "  ".repeat(depth), t.node, t.usage, t.top_tokens.join(" ")).expect("string write");
    }
    print!("{summary}");
    Ok(factorization_verdict(&f, &report))
}

fn cmd_hkl(a: &HklArgs) -> Result<i32> {
    let cfg = load_config(a.config.as_deref())?;
    let data = required(a.data.clone().or(cfg.data.clone()), "data")?;
    let lambda = a.lambda.or(cfg.lambda).ok_or_else(|| Error::Config("missing --lambda".into()))?;
    let basis = match a.basis.clone().or(cfg.basis.clone()).as_deref().unwrap_or("polynomials") {
        "polynomials" => Basis::Polynomials,
        "gaussian_bumps" | "gaussian" => Basis::GaussianBumps,
        other => return Err(Error::Config(format!("unknown basis `{other}`"))),
    };
    let spec = KernelSpec { basis, b: a.b.or(cfg.b).unwrap_or(2), gamma: a.gamma.or(cfg.gamma) };
    let (x, y) = read_regression_csv(&data, switch(a.header, cfg.header))?;
    let order = a.max_order.or(cfg.max_order).unwrap_or(2);
    let dag = SubsetDag::new(x.ncols(), order, spec.b)?;
    let options = HklOptions {
        weights: a.weights.clone().or(cfg.weights.clone()),
        penalize_root: switch(a.penalize_root, cfg.penalize_root),
        loss: LossKind::Square,
    };
    let mut solver = cfg.solver.clone().unwrap_or_default();
    if let Some(t) = a.tol.or(cfg.tol) {
        solver.tol = t;
    }
    let out = prepare_out(a.out.clone().or(cfg.out.clone()))?;
    let fit = hkl::fit_hkl(x.view(), y.view(), &dag, &spec, lambda, &options, &solver)?;
    write_json(&out.join("report.json"), &fit.report)?;
    println!("selected: {:?}", fit.selected_subsets());
    println!("hull closed: {}", fit.report.hull_closed);
    if !fit.report.converged {
        eprintln!("error: solver stopped at the iteration cap without meeting the tolerance");
        return Ok(EXIT_SOLVER);
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct RegressionTruth<'a> {
    scenario: Scenario,
    spec: &'a SynthSpec,
    w_star: &'a [f64],
    support: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    active_groups: Option<&'a [usize]>,
}

fn cmd_synth(a: &SynthArgs) -> Result<i32> {
    let cfg = load_config(a.config.as_deref())?;
    let mut spec = cfg.synth.clone().unwrap_or_default();
    if let Some(s) = a.scenario.clone() {
        spec.scenario = s.parse()?;
    }
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = a.$field {
                spec.$field = v;
            }
        };
    }
    set!(n);
    set!(p);
    set!(rows);
    set!(cols);
    set!(sigma);
    set!(k);
    set!(group_size);
    set!(doc_length);
    if let Some(seed) = a.seed.or(cfg.seed) {
        spec.seed = seed;
    }
    if let Some(r) = &a.rect {
        let [r0, r1, c0, c1] = r[..] else {
            return Err(Error::Config("--rect takes r0,r1,c0,c1".into()));
        };
        spec.rect = Some(Rect { r0, r1, c0, c1 });
    }
    let out = prepare_out(a.out.clone().or(cfg.out.clone()))?;
    match synth::generate(&spec)? {
        SynthData::Regression { x, y, w_star, structure, active_groups, .. } => {
            write_regression_csv(&out.join("data.csv"), &x, &y)?;
            if let Some(s) = &structure {
                write_json(&out.join("groups.json"), s)?;
            }
            let support = (0..w_star.len()).filter(|&j| w_star[j] != 0.0).collect();
            write_json(
                &out.join("truth.json"),
                &RegressionTruth { scenario: spec.scenario, spec: &spec, w_star: &w_star, support, active_groups: active_groups.as_deref() },
            )?;
        }
        SynthData::Dictionary { x, d_star, a_star } => {
            write_matrix_csv(&out.join("data.csv"), &x.t().to_owned())?;
            write_matrix_csv(&out.join("D_true.csv"), &d_star)?;
            write_matrix_csv(&out.join("A_true.csv"), &a_star)?;
            write_json(&out.join("truth.json"), &serde_json::json!({ "scenario": spec.scenario, "spec": spec }))?;
        }
        SynthData::Topics { corpus, tree, root_tokens } => {
            factorization::write_corpus(&corpus, &out.join("triplets.txt"), &out.join("vocab.txt"))?;
            write_json(&out.join("tree.json"), &serde_json::json!({ "parent": tree.parents() }))?;
            write_json(&out.join("truth.json"), &serde_json::json!({ "scenario": spec.scenario, "spec": spec, "root_tokens": root_tokens }))?;
        }
        SynthData::Hkl { x, y, true_subsets } => {
            write_regression_csv(&out.join("data.csv"), &x, &y)?;
            write_json(&out.join("truth.json"), &serde_json::json!({ "scenario": spec.scenario, "spec": spec, "subsets": true_subsets }))?;
        }
    }
    println!("wrote {:?} scenario to {}", spec.scenario, out.display());
    Ok(EXIT_OK)
}

fn cmd_proxcheck(a: &ProxcheckArgs) -> Result<i32> {
    let opts = SuiteOptions { seed: a.seed, cases: a.cases.max(1), inject_fault: a.inject_fault };
    let reports = proxcheck::run_suite(&opts)?;
    println!("{:<36} {:<40} {:>12} {:>8}  verdict", "operator", "oracle", "max dev", "tol");
    for r in &reports {
        println!(
            "{:<36} {:<40} {:>12.3e} {:>8.0e}  {}",
            r.operator,
            r.oracle,
            r.max_deviation,
            r.tolerance,
            if r.pass { "ok" } else { "FAIL" }
        );
    }
    if let Some(p) = &a.out {
        write_json(p, &reports)?;
    }
    let failing: Vec<_> = reports.iter().filter(|r| !r.pass).collect();
    for r in &failing {
        eprintln!("tolerance breach: {} vs {}: deviation {:e} on {}", r.operator, r.oracle, r.max_deviation, r.worst_input);
    }
    Ok(if failing.is_empty() { EXIT_OK } else { EXIT_CHECK })
}
