//! Batch front-end: `generate`, `train`, `compare` and `report`.

use std::ffi::OsString;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cuts::Policy;
use crate::engine::{self, AnchorMode, EngineError, RunConfig};
use crate::eval;
use crate::lp::LpError;
use crate::portfolio::{generate_instance, GeneratorParams, PortfolioError, PortfolioInstance};
use crate::scenario::{HorizonDistribution, ScenarioError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("infeasible subproblem: {0}")]
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Infeasible(_) => 4,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::InvalidParameter(m) => CliError::Config(m),
            EngineError::SubproblemInfeasible { .. } => CliError::Infeasible(e.to_string()),
            EngineError::Lp(LpError::Malformed(m)) => CliError::Config(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<PortfolioError> for CliError {
    fn from(e: PortfolioError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "sddp-tsto", version, about = "Multistage stochastic LPs with a random number of stages")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random portfolio instance and its horizon distribution.
    Generate(GenerateArgs),
    /// Train a policy on an instance.
    Train(TrainArgs),
    /// Compare two policies on common simulated trajectories.
    Compare(CompareArgs),
    /// Run a matrix of experiments and write a summary table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct InstanceFlags {
    /// Number of risky assets (even).
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub t_max: usize,
    /// Realizations per stage.
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    /// Rate of the truncated exponential horizon.
    #[arg(long, default_value_t = 0.15)]
    pub lambda: f64,
    /// Proportional buying and selling cost.
    #[arg(long, default_value_t = 0.01)]
    pub cost: f64,
    #[arg(long, default_value_t = 1.01)]
    pub rf: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

impl InstanceFlags {
    fn params(&self) -> GeneratorParams {
        GeneratorParams {
            n: self.n,
            t_max: self.t_max,
            m_realizations: self.m,
            lambda: self.lambda,
            cost: self.cost,
            rf: self.rf,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub instance: InstanceFlags,
    /// Output instance file.
    #[arg(long = "instance-out", alias = "out")]
    pub instance_out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainMode {
    /// Random horizon.
    Tsto,
    /// Horizon fixed at `t_max`.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnchorArg {
    Running,
    Zero,
}

#[derive(Debug, Args)]
pub struct RunFlags {
    #[arg(long = "window", default_value_t = 200)]
    pub n_window: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub tol: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
    #[arg(long = "train-seed", default_value_t = 0)]
    pub train_seed: u64,
    #[arg(long, value_enum, default_value_t = AnchorArg::Running)]
    pub anchor: AnchorArg,
    /// Worker threads for backward passes and simulations.
    #[arg(long, env = "SDDP_TSTO_THREADS", default_value_t = 1)]
    pub threads: usize,
}

impl RunFlags {
    fn config(&self) -> RunConfig {
        RunConfig {
            n_window: self.n_window,
            alpha: self.alpha,
            tol: self.tol,
            max_iters: self.max_iters,
            seed: self.train_seed,
            threads: self.threads,
            anchor_mode: match self.anchor {
                AnchorArg::Running => AnchorMode::RunningObjective,
                AnchorArg::Zero => AnchorMode::ZeroObjective,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "instance-in")]
    pub instance_in: PathBuf,
    #[arg(long, value_enum, default_value_t = TrainMode::Tsto)]
    pub mode: TrainMode,
    #[command(flatten)]
    pub run: RunFlags,
    /// Output policy (cut pools).
    #[arg(long = "policy-out")]
    pub policy_out: PathBuf,
    /// Output bounds history.
    #[arg(long = "log-out")]
    pub log_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long = "instance-in")]
    pub instance_in: PathBuf,
    #[arg(long = "policy-a")]
    pub policy_a: PathBuf,
    #[arg(long = "policy-b")]
    pub policy_b: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub n_sims: usize,
    #[arg(long = "eval-seed", default_value_t = 12345)]
    pub eval_seed: u64,
    /// Fraction of paired differences that must be nonnegative.
    #[arg(long, default_value_t = 0.9)]
    pub threshold: f64,
    #[arg(long, env = "SDDP_TSTO_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[arg(long = "csv-out")]
    pub csv_out: Option<PathBuf>,
    #[arg(long = "summary-out")]
    pub summary_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Experiment matrix as JSON; flags below are ignored when given.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated asset counts.
    #[arg(long, value_delimiter = ',', default_values_t = vec![4, 8, 20])]
    pub ns: Vec<usize>,
    /// Comma-separated transaction costs.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.01, 0.1, 0.3, 0.5, 0.7])]
    pub costs: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub n_sims: usize,
    #[arg(long, env = "SDDP_TSTO_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

/// A full experiment matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub ns: Vec<usize>,
    pub costs: Vec<f64>,
    pub t_max: usize,
    pub m_realizations: usize,
    pub lambda: f64,
    pub rf: f64,
    pub instance_seed: u64,
    pub run: RunConfig,
    pub n_sims: usize,
    pub eval_seed: u64,
    pub threshold: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let g = GeneratorParams::default();
        Self {
            ns: vec![4, 8, 20],
            costs: vec![0.01, 0.1, 0.3, 0.5, 0.7],
            t_max: g.t_max,
            m_realizations: g.m_realizations,
            lambda: g.lambda,
            rf: g.rf,
            instance_seed: g.seed,
            run: RunConfig::default(),
            n_sims: 500,
            eval_seed: 12345,
            threshold: 0.9,
        }
    }
}

/// One line of the experiment table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: usize,
    pub t_max: usize,
    pub cost: f64,
    pub mean_income_tsto: f64,
    pub mean_income_fixed: f64,
    pub fraction_nonnegative: f64,
    pub iterations_tsto: usize,
    pub iterations_fixed: usize,
}

/// Runs every `(n, cost)` cell: generate, train both policies, compare.
pub fn run_experiments(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>, CliError> {
    let mut rows = Vec::new();
    for &n in &cfg.ns {
        for &cost in &cfg.costs {
            let (inst, horizon) = generate_instance(&GeneratorParams {
                n,
                t_max: cfg.t_max,
                m_realizations: cfg.m_realizations,
                lambda: cfg.lambda,
                cost,
                rf: cfg.rf,
                seed: cfg.instance_seed,
            })?;
            let tsto = train_policy(&inst, &horizon, TrainMode::Tsto, &cfg.run)?;
            let fixed = train_policy(&inst, &horizon, TrainMode::Fixed, &cfg.run)?;
            let rep = eval::compare(
                &inst,
                &tsto.policy,
                &fixed.policy,
                &horizon,
                cfg.n_sims,
                cfg.eval_seed,
                cfg.threshold,
                cfg.run.threads > 1,
            )?;
            rows.push(ReportRow {
                n,
                t_max: cfg.t_max,
                cost,
                mean_income_tsto: rep.mean_a,
                mean_income_fixed: rep.mean_b,
                fraction_nonnegative: rep.fraction_nonnegative,
                iterations_tsto: tsto.iterations(),
                iterations_fixed: fixed.iterations(),
            });
        }
    }
    Ok(rows)
}

/// Trains with the instance horizon (`Tsto`) or with death surely at `t_max`
/// (`Fixed`), labelling the policy accordingly.
pub fn train_policy(
    inst: &PortfolioInstance,
    horizon: &HorizonDistribution,
    mode: TrainMode,
    cfg: &RunConfig,
) -> Result<engine::RunResult, CliError> {
    let (h, label) = match mode {
        TrainMode::Tsto => (horizon.clone(), "sddp_tsto"),
        TrainMode::Fixed => (HorizonDistribution::fixed(inst.t_max)?, "sddp_fixed_horizon"),
    };
    let mut result = engine::run(inst, &h, cfg)?;
    result.policy.label = label.to_string();
    Ok(result)
}

/// Markdown table of the report rows.
pub fn render_table(rows: &[ReportRow]) -> String {
    let mut s = String::from("| n | T_max | cost | SDDP-TSto | SDDP | nonneg diffs |\n|---|---|---|---|---|---|\n");
    for r in rows {
        s.push_str(&format!(
            "| {} | {} | {} | {:.1} | {:.1} | {:.1}% |\n",
            r.n,
            r.t_max,
            r.cost,
            r.mean_income_tsto,
            r.mean_income_fixed,
            100.0 * r.fraction_nonnegative
        ));
    }
    s
}

struct FloatFormatter;

impl serde_json::ser::Formatter for FloatFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// JSON with sorted keys and every float written with 17 significant digits.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let v = serde_json::to_value(value).map_err(|e| CliError::Config(e.to_string()))?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FloatFormatter);
    v.serialize(&mut ser).map_err(|e| CliError::Config(e.to_string()))?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|e| CliError::Config(e.to_string()))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_instance(path: &Path) -> Result<(PortfolioInstance, HorizonDistribution), CliError> {
    Ok(PortfolioInstance::from_json(&read(path)?)?)
}

fn load_policy(path: &Path) -> Result<Policy, CliError> {
    Policy::from_json(&read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => {
            let (inst, horizon) = generate_instance(&args.instance.params())?;
            let doc = crate::portfolio::InstanceDoc {
                instance: inst,
                horizon_pmf: horizon.pmf().to_vec(),
            };
            write(&args.instance_out, &canonical_json(&doc)?)
        }
        Command::Train(args) => {
            let (inst, horizon) = load_instance(&args.instance_in)?;
            let cfg = args.run.config();
            let result = train_policy(&inst, &horizon, args.mode, &cfg)?;
            write(&args.policy_out, &canonical_json(&result.policy)?)?;
            if let Some(log) = &args.log_out {
                write(log, &canonical_json(&result.report(&cfg))?)?;
            }
            Ok(())
        }
        Command::Compare(args) => {
            let (inst, horizon) = load_instance(&args.instance_in)?;
            let a = load_policy(&args.policy_a)?;
            let b = load_policy(&args.policy_b)?;
            if args.threads == 0 {
                return Err(CliError::Config("threads must be positive".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(args.threads)
                .build()
                .map_err(|e| CliError::Config(e.to_string()))?;
            let rep = pool.install(|| {
                eval::compare(&inst, &a, &b, &horizon, args.n_sims, args.eval_seed, args.threshold, args.threads > 1)
            })?;
            if let Some(path) = &args.csv_out {
                let mut buf = Vec::new();
                rep.write_csv(&mut buf).map_err(|e| CliError::Config(e.to_string()))?;
                write(path, &String::from_utf8_lossy(&buf))?;
            }
            let summary = canonical_json(&rep.summary())?;
            match &args.summary_out {
                Some(path) => write(path, &summary),
                None => {
                    print!("{summary}");
                    Ok(())
                }
            }
        }
        Command::Report(args) => {
            let cfg = match &args.config {
                Some(path) => serde_json::from_str::<ExperimentConfig>(&read(path)?)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
                None => ExperimentConfig {
                    ns: args.ns.clone(),
                    costs: args.costs.clone(),
                    instance_seed: args.seed,
                    n_sims: args.n_sims,
                    run: RunConfig {
                        threads: args.threads,
                        ..RunConfig::default()
                    },
                    ..ExperimentConfig::default()
                },
            };
            let rows = run_experiments(&cfg)?;
            write(
                &args.out_dir.join("report.json"),
                &canonical_json(&serde_json::json!({ "config": cfg, "rows": rows }))?,
            )?;
            let table = render_table(&rows);
            write(&args.out_dir.join("table.md"), &table)?;
            print!("{table}");
            Ok(())
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_json_sorts_and_formats() {
        let v = serde_json::json!({"b": 1.5, "a": [0.1, 2], "c": {"z": 1, "y": -3.25}});
        let s = canonical_json(&v).unwrap();
        assert_eq!(
            s,
            "{\"a\":[1.0000000000000001e-1,2],\"b\":1.5000000000000000e0,\"c\":{\"y\":-3.2500000000000000e0,\"z\":1}}\n"
        );
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"][0].as_f64(), Some(0.1));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Numerical("x".into()).exit_code(), 3);
        assert_eq!(CliError::Infeasible("x".into()).exit_code(), 4);
        let e: CliError = EngineError::SubproblemInfeasible {
            stage: 2,
            realization: None,
            branch: engine::Branch::Stop,
        }
        .into();
        assert_eq!(e.exit_code(), 4);
    }

    #[test]
    fn odd_asset_count_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("inst.json");
        let code = run(["sddp-tsto", "generate", "--n", "3", "--instance-out", out.to_str().unwrap()]);
        assert_eq!(code, 2);
        assert!(!out.exists());
    }
}
