//! Reproduction harness behind the `sparse-ica` binary.
//!
//! ```text
//! sparse-ica simulate --n 10 --samples 1000 --out data/
//! sparse-ica run --data data/ --method sparseica-likelihood --out run/
//! sparse-ica sweep --axis sample-size --grid 1000,10000 --trials 10 --out sweep/
//! sparse-ica verify matrix.csv
//! ```
//!
//! Exit codes: `0` success, `2` usage or configuration error, `3` numeric
//! failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::causal::{a_to_sem, dag_check, mec_is_singleton};
use crate::io::{self, Truth};
use crate::metrics::{evaluate, fastica_baseline};
use crate::model::{support_of, Dataset, MixingMatrix};
use crate::simulate::{self, generate, Regime, SimConfig};
use crate::solver::{solve, Method, SolverConfig};
use crate::structure;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RESULT_FILE: &str = "result.json";

pub const METRICS_HEADER: &str =
    "method,regime,n,T,gaussian_ratio,seed,trial,mcc,amari,runtime_ms,config_hash,status";

#[derive(Debug, Parser)]
#[command(name = "sparse-ica", version, about = "Sparse ICA from second-order statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset: X.csv, S.csv and truth.json.
    Simulate(SimulateArgs),
    /// Estimate the mixing matrix of one dataset and score it.
    Run(RunArgs),
    /// Grid of simulate + run cells with a median/stderr summary.
    Sweep(SweepArgs),
    /// Structural-assumption report for a matrix CSV.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    SparseicaLikelihood,
    SparseicaDecomposition,
    VanillaLikelihood,
    VanillaDecomposition,
    Fastica,
}

impl MethodName {
    pub fn label(self) -> &'static str {
        match self {
            MethodName::SparseicaLikelihood => "sparseica-likelihood",
            MethodName::SparseicaDecomposition => "sparseica-decomposition",
            MethodName::VanillaLikelihood => "vanilla-likelihood",
            MethodName::VanillaDecomposition => "vanilla-decomposition",
            MethodName::Fastica => "fastica",
        }
    }

    fn solver_method(self) -> Option<Method> {
        match self {
            MethodName::SparseicaLikelihood | MethodName::VanillaLikelihood => Some(Method::Likelihood),
            MethodName::SparseicaDecomposition | MethodName::VanillaDecomposition => {
                Some(Method::Decomposition)
            }
            MethodName::Fastica => None,
        }
    }

    fn uses_g(self) -> bool {
        matches!(self, MethodName::SparseicaLikelihood | MethodName::SparseicaDecomposition)
    }

    /// Data regime the method is benchmarked on.
    fn paired_regime(self) -> Regime {
        match self {
            MethodName::VanillaLikelihood | MethodName::VanillaDecomposition => Regime::Violating,
            _ => Regime::Valid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Valid,
    Violating,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Valid => Regime::Valid,
            RegimeArg::Violating => Regime::Violating,
        }
    }
}

fn regime_label(r: Regime) -> &'static str {
    match r {
        Regime::Valid => "valid",
        Regime::Violating => "violating",
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Sample size T.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1.0)]
    pub gaussian_ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = RegimeArg::Valid)]
    pub regime: RegimeArg,
}

impl DataArgs {
    fn sim_config(&self) -> SimConfig {
        SimConfig {
            n: self.n,
            t: self.samples,
            gaussian_ratio: self.gaussian_ratio,
            seed: self.seed,
            regime: self.regime.into(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Random restarts (default 30).
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Initial penalty coefficient (method default when omitted).
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// MCP λ.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// MCP α.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Drop the triangularity penalty regardless of the method name.
    #[arg(long)]
    pub no_g_constraint: bool,
}

impl SolverArgs {
    /// Solver configuration for `method`, seeded with `seed`.
    pub fn config(&self, method: MethodName, seed: u64) -> Option<SolverConfig> {
        let mut cfg = SolverConfig::for_method(method.solver_method()?);
        cfg.seed = seed;
        cfg.use_g_constraint = method.uses_g() && !self.no_g_constraint;
        if let Some(v) = self.restarts {
            cfg.restarts = v;
        }
        if let Some(v) = self.c1 {
            cfg.c1 = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.lambda {
            cfg.mcp.lambda = v;
        }
        if let Some(v) = self.alpha {
            cfg.mcp.alpha = v;
        }
        if let Some(v) = self.threshold {
            cfg.threshold = v;
        }
        Some(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// SimConfig JSON; overrides the data flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Dataset directory written by `simulate`. Without it a dataset is
    /// generated in memory from the data flags.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: MethodName,
    #[command(flatten)]
    pub sim: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    SampleSize,
    GaussianRatio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pairing {
    /// Every method on data from `--regime`.
    Same,
    /// The benchmark pairing: sparse methods on valid data, vanilla on
    /// assumption-violating data, FastICA on both (reported as `fastica-d`
    /// on valid data).
    Benchmark,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// Comma-separated grid values (sample sizes or Gaussian ratios).
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "sparseica-likelihood,vanilla-likelihood,fastica"
    )]
    pub methods: Vec<MethodName>,
    #[arg(long, value_enum, default_value_t = Pairing::Same)]
    pub pairing: Pairing,
    #[command(flatten)]
    pub sim: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Square matrix CSV; any nonzero entry counts as support.
    pub matrix: PathBuf,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// One scored estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub method: String,
    pub regime: String,
    pub n: usize,
    pub t: usize,
    pub gaussian_ratio: f64,
    pub seed: u64,
    pub trial: usize,
    pub mcc: f64,
    pub amari: f64,
    pub runtime_ms: u128,
    pub config_hash: String,
    pub status: String,
}

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.method,
            self.regime,
            self.n,
            self.t,
            self.gaussian_ratio,
            self.seed,
            self.trial,
            self.mcc,
            self.amari,
            self.runtime_ms,
            self.config_hash,
            self.status
        )
    }
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

/// Hex SHA-256 of the JSON encoding of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Serialize)]
struct HashedConfig<'a> {
    method: &'a str,
    data: &'a SimConfig,
    solver: Option<&'a SolverConfig>,
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimate {
    Solver(Box<crate::solver::SolveResult>),
    Fastica {
        mixing: MixingMatrix,
        converged: bool,
        iterations: usize,
    },
}

impl Estimate {
    pub fn mixing(&self) -> &MixingMatrix {
        match self {
            Estimate::Solver(r) => &r.a_hat,
            Estimate::Fastica { mixing, .. } => mixing,
        }
    }
}

/// Runs `method` on `data` and scores it when the truth is known.
///
/// `label` names the row (`fastica-d` in paired sweeps); `sim` describes the
/// data for the row and the config hash.
pub fn run_method(
    method: MethodName,
    label: &str,
    data: &Dataset,
    sim: &SimConfig,
    solver: &SolverArgs,
    trial: usize,
) -> (MetricsRow, Option<Estimate>) {
    let cfg = solver.config(method, sim.seed);
    let hash = config_hash(&HashedConfig {
        method: label,
        data: sim,
        solver: cfg.as_ref(),
    });
    let mut row = MetricsRow {
        method: label.to_string(),
        regime: regime_label(sim.regime).to_string(),
        n: data.x.ncols(),
        t: data.x.nrows(),
        gaussian_ratio: sim.gaussian_ratio,
        seed: sim.seed,
        trial,
        mcc: f64::NAN,
        amari: f64::NAN,
        runtime_ms: 0,
        config_hash: hash,
        status: "ok".into(),
    };
    let start = Instant::now();
    let estimate = match &cfg {
        Some(cfg) => simulate::empirical_covariance(&data.x)
            .and_then(|sigma| solve(&sigma, cfg))
            .map(|r| Estimate::Solver(Box::new(r))),
        None => fastica_baseline(&data.x, data.x.ncols(), sim.seed).map(|f| Estimate::Fastica {
            mixing: f.mixing,
            converged: f.converged,
            iterations: f.iterations,
        }),
    };
    row.runtime_ms = start.elapsed().as_millis();
    let estimate = match estimate {
        Ok(e) => e,
        Err(e) => {
            row.status = status_of(&e);
            return (row, None);
        }
    };
    if let (Some(a), Some(s)) = (&data.true_a, &data.true_s) {
        match evaluate(estimate.mixing(), a, &data.x, s) {
            Ok(m) => {
                row.mcc = m.mcc;
                row.amari = m.amari;
            }
            Err(e) => row.status = status_of(&e),
        }
    }
    if let Estimate::Solver(r) = &estimate {
        if row.status == "ok" && !r.feasibility.feasible {
            row.status = "infeasible".into();
        }
    }
    (row, Some(estimate))
}

fn status_of(e: &Error) -> String {
    let kind = match e {
        Error::Input(_) | Error::Parse(_) => "input_error",
        Error::Singular { .. } => "singular",
        Error::Numeric(_) => "numeric_error",
        Error::Generation { .. } => "generation_error",
        Error::Io(_) | Error::Json(_) => "io_error",
    };
    kind.to_string()
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Singular { .. } | Error::Numeric(_) => EXIT_NUMERIC,
        _ => EXIT_USAGE,
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<String> {
    let cfg = match &args.config {
        Some(path) => io::read_json::<SimConfig>(path)?,
        None => args.data.sim_config(),
    };
    let sim = generate(&cfg)?;
    let truth = Truth {
        config: cfg.clone(),
        seed: cfg.seed,
        a: sim.truth().clone(),
        attempts: sim.attempts,
    };
    io::save_dataset(&args.out, &sim.dataset, Some(&truth))?;
    Ok(format!(
        "seed {} n {} T {}: support accepted after {} draw(s) (acceptance rate {:.4})\n",
        cfg.seed,
        cfg.n,
        cfg.t,
        sim.attempts,
        1.0 / sim.attempts as f64
    ))
}

pub fn cmd_run(args: &RunArgs) -> Result<String> {
    let (data, sim) = match &args.data {
        Some(dir) => {
            let (data, truth) = io::load_dataset(dir)?;
            let sim = match truth {
                Some(t) => t.config,
                None => SimConfig {
                    n: data.x.ncols(),
                    t: data.x.nrows(),
                    seed: args.sim.seed,
                    ..Default::default()
                },
            };
            (data, sim)
        }
        None => {
            let sim = args.sim.sim_config();
            (generate(&sim)?.dataset, sim)
        }
    };
    if args.solver.restarts == Some(0) {
        return Err(Error::Input("restarts must be at least 1".into()));
    }
    let (row, estimate) = run_method(args.method, args.method.label(), &data, &sim, &args.solver, 0);
    let estimate = match estimate {
        Some(e) => e,
        None => return Err(Error::Numeric(format!("{} failed: {}", row.method, row.status))),
    };
    fs::create_dir_all(&args.out)?;
    io::write_json(&args.out.join(RESULT_FILE), &estimate)?;
    fs::write(args.out.join(METRICS_FILE), metrics_csv(std::slice::from_ref(&row)))?;
    Ok(format!(
        "{} mcc {:.4} amari {:.4} ({} ms, {})\n",
        row.method, row.mcc, row.amari, row.runtime_ms, row.status
    ))
}

/// Every `(grid value, trial, method)` cell of a sweep, in output order.
#[derive(Debug, Clone)]
pub struct Cell {
    pub method: MethodName,
    pub label: &'static str,
    pub sim: SimConfig,
    pub trial: usize,
}

pub fn sweep_cells(args: &SweepArgs) -> Result<Vec<Cell>> {
    if args.grid.is_empty() {
        return Err(Error::Input("grid must not be empty".into()));
    }
    if args.trials == 0 || args.methods.is_empty() {
        return Err(Error::Input("need at least one trial and one method".into()));
    }
    let mut cells = Vec::new();
    for &value in &args.grid {
        let mut base = args.sim.sim_config();
        match args.axis {
            Axis::SampleSize => {
                if value.fract() != 0.0 || value < 2.0 {
                    return Err(Error::Input(format!("sample size {value} is not an integer >= 2")));
                }
                base.t = value as usize;
            }
            Axis::GaussianRatio => base.gaussian_ratio = value,
        }
        base.validate()?;
        for trial in 0..args.trials {
            for &method in &args.methods {
                let mut sim = base.clone();
                sim.seed = args.sim.seed + trial as u64;
                let mut push = |regime: Regime, label: &'static str| {
                    let mut s = sim.clone();
                    s.regime = regime;
                    cells.push(Cell {
                        method,
                        label,
                        sim: s,
                        trial,
                    });
                };
                match args.pairing {
                    Pairing::Same => push(sim.regime, method.label()),
                    Pairing::Benchmark if method == MethodName::Fastica => {
                        push(Regime::Valid, "fastica-d");
                        push(Regime::Violating, "fastica");
                    }
                    Pairing::Benchmark => push(method.paired_regime(), method.label()),
                }
            }
        }
    }
    Ok(cells)
}

/// Runs all cells (in parallel) and returns rows in cell order.
pub fn run_cells(cells: &[Cell], solver: &SolverArgs) -> Vec<MetricsRow> {
    cells
        .par_iter()
        .map(|cell| match generate(&cell.sim) {
            Ok(sim) => run_method(cell.method, cell.label, &sim.dataset, &cell.sim, solver, cell.trial).0,
            Err(e) => MetricsRow {
                method: cell.label.to_string(),
                regime: regime_label(cell.sim.regime).to_string(),
                n: cell.sim.n,
                t: cell.sim.t,
                gaussian_ratio: cell.sim.gaussian_ratio,
                seed: cell.sim.seed,
                trial: cell.trial,
                mcc: f64::NAN,
                amari: f64::NAN,
                runtime_ms: 0,
                config_hash: String::new(),
                status: status_of(&e),
            },
        })
        .collect()
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Standard error of the mean (sample standard deviation over `√k`).
pub fn stderr(values: &[f64]) -> f64 {
    let k = values.len();
    if k < 2 {
        return f64::NAN;
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (var / k as f64).sqrt()
}

pub const SUMMARY_HEADER: &str =
    "method,regime,axis,value,trials,ok,median_mcc,stderr_mcc,median_amari,stderr_amari";

/// Per `(method, regime, grid value)` medians and standard errors over the
/// rows that scored.
pub fn summarize(rows: &[MetricsRow], axis: Axis) -> String {
    let axis_name = match axis {
        Axis::SampleSize => "sample_size",
        Axis::GaussianRatio => "gaussian_ratio",
    };
    let value_of = |r: &MetricsRow| match axis {
        Axis::SampleSize => r.t as f64,
        Axis::GaussianRatio => r.gaussian_ratio,
    };
    let mut keys: Vec<(String, String, f64)> = Vec::new();
    for r in rows {
        let key = (r.method.clone(), r.regime.clone(), value_of(r));
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for (method, regime, value) in keys {
        let cell: Vec<&MetricsRow> = rows
            .iter()
            .filter(|r| r.method == method && r.regime == regime && value_of(r) == value)
            .collect();
        let scored: Vec<&&MetricsRow> = cell.iter().filter(|r| r.mcc.is_finite()).collect();
        let mcc: Vec<f64> = scored.iter().map(|r| r.mcc).collect();
        let amari: Vec<f64> = scored.iter().map(|r| r.amari).collect();
        let _ = writeln!(
            out,
            "{method},{regime},{axis_name},{value},{},{},{},{},{},{}",
            cell.len(),
            scored.len(),
            median(&mcc),
            stderr(&mcc),
            median(&amari),
            stderr(&amari)
        );
    }
    out
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<String> {
    let cells = sweep_cells(args)?;
    if args.solver.restarts == Some(0) {
        return Err(Error::Input("restarts must be at least 1".into()));
    }
    let rows = run_cells(&cells, &args.solver);
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join(METRICS_FILE), metrics_csv(&rows))?;
    let summary = summarize(&rows, args.axis);
    fs::write(args.out.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

/// Assumption report for one matrix. The conversion fields are `null` when
/// the matrix is singular.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub assumption1: bool,
    pub assumption2: bool,
    pub column_subset: bool,
    pub zheng_a4: bool,
    pub zheng_a5: bool,
    pub dag_after_conversion: Option<bool>,
    pub mec_singleton: Option<bool>,
}

pub fn verify_matrix(a: &MixingMatrix) -> Result<VerifyReport> {
    let xi = support_of(a, 0.0);
    let assumption2 = structure::check_lower_triangularizable(a).unwrap_or(false);
    let (dag, mec) = match a_to_sem(a) {
        Ok((sem, _)) => {
            let dag = dag_check(sem.b())?;
            let mec = if dag { Some(mec_is_singleton(sem.b())?) } else { Some(false) };
            (Some(dag), mec)
        }
        Err(Error::Singular { .. }) => (None, None),
        Err(Error::Input(_)) => (Some(false), Some(false)),
        Err(e) => return Err(e),
    };
    Ok(VerifyReport {
        assumption1: structure::check_structural_variability(&xi),
        assumption2,
        column_subset: structure::check_column_subset(&xi),
        zheng_a4: structure::check_zheng_assumption4(&xi).unwrap_or(false),
        zheng_a5: structure::check_zheng_assumption5(&xi),
        dag_after_conversion: dag,
        mec_singleton: mec,
    })
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<String> {
    let m = io::read_matrix_csv(&args.matrix)?;
    if !m.is_square() {
        return Err(Error::Input(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
    }
    let report = verify_matrix(&MixingMatrix::new(m)?)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    if let Some(path) = &args.out {
        write_parent(path)?;
        fs::write(path, &text)?;
    }
    Ok(text)
}

fn write_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code, printing output and errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
