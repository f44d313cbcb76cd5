//! The training loop for problems whose number of stages is random.
//!
//! Each stage `t >= 2` keeps a cut pool approximating the cost-to-go
//! `Q_t(x_{t-1}, 1)`, the expected cost from stage `t` on given the process is
//! still alive at `t - 1`. Per realization the stage has two branches: the
//! process survives (running cost plus the next pool as future) or it dies
//! (terminal cost, no future). Cuts weight the two by `1 - q_t` and `q_t`.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::cuts::{assemble_cut, Cut, CutError, CutPool, Policy};
use crate::lp::{self, LpError, LpProblem, LpSolution, LpStatus};
use crate::scenario::{sample_trajectory, HorizonDistribution, SeedStream, StageDistribution, Trajectory};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("stage {stage} {branch:?} subproblem is infeasible (realization {realization:?})")]
    SubproblemInfeasible {
        stage: usize,
        realization: Option<usize>,
        branch: Branch,
    },
    #[error("stage {stage} {branch:?} subproblem is unbounded (realization {realization:?})")]
    SubproblemUnbounded {
        stage: usize,
        realization: Option<usize>,
        branch: Branch,
    },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Cut(#[from] CutError),
}

/// Which cost family a stage LP carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostKind {
    /// Cost paid at a stage the process survives.
    Running,
    /// Cost paid once, at the stage where the process dies.
    Terminal,
}

/// The two subproblems solved per realization in the backward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Continue,
    Stop,
}

/// One stage LP at a fixed incoming state and noise.
///
/// The constraints are `A v + B x_prev = b` and `A_ub v + B_ub x_prev <= b_ub`;
/// `problem` already has `B x_prev` moved to the right-hand side, and the `B`
/// matrices are kept alongside so subgradients in `x_prev` can be read off the
/// duals.
#[derive(Debug, Clone, PartialEq)]
pub struct StageLp {
    pub problem: LpProblem,
    pub coupling_eq: Vec<Vec<f64>>,
    pub coupling_ub: Vec<Vec<f64>>,
    /// Columns of `problem` holding the outgoing state.
    pub state_cols: Vec<usize>,
}

impl StageLp {
    /// `-B^T y` over both row families.
    pub fn generic_subgradient(&self, duals_eq: &[f64], duals_ub: &[f64]) -> Vec<f64> {
        let dim = self
            .coupling_eq
            .first()
            .or(self.coupling_ub.first())
            .map_or(0, Vec::len);
        let mut g = vec![0.0; dim];
        for (row, &y) in self
            .coupling_eq
            .iter()
            .zip(duals_eq)
            .chain(self.coupling_ub.iter().zip(duals_ub))
        {
            for (gi, &b) in g.iter_mut().zip(row) {
                *gi -= b * y;
            }
        }
        g
    }

    pub fn state_of(&self, x: &[f64]) -> Vec<f64> {
        self.state_cols.iter().map(|&c| x[c]).collect()
    }
}

/// A multistage linear model with stagewise independent finite noise.
pub trait StageModel: Sync {
    fn t_max(&self) -> usize;

    fn state_dim(&self) -> usize;

    /// `x_0`.
    fn initial_state(&self) -> Vec<f64>;

    /// Noise distributions, stage `t` at index `t - 1`; stage 1 is deterministic.
    fn noise(&self) -> &[StageDistribution];

    fn stage_lp(&self, t: usize, x_prev: &[f64], xi: &[f64], kind: CostKind) -> StageLp;

    /// A known affine minorant of `Q_t(., 1)` for `t` in `2..=t_max`.
    fn initial_cut(&self, t: usize) -> Cut;

    /// Subgradient in `x_prev` of the stage value at an optimal solve. The
    /// duals are those of the base rows of `lp` (cut rows excluded).
    fn subgradient(
        &self,
        _t: usize,
        _x_prev: &[f64],
        _xi: &[f64],
        lp: &StageLp,
        duals_eq: &[f64],
        duals_ub: &[f64],
    ) -> Vec<f64> {
        lp.generic_subgradient(duals_eq, duals_ub)
    }
}

/// How trial states are produced at stages after the sampled death.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorMode {
    /// Keep solving the running problem with the current pools.
    #[default]
    RunningObjective,
    /// Zero objective and zero future: any feasible point.
    ZeroObjective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Number of most recent forward costs in the upper-bound window.
    pub n_window: usize,
    pub alpha: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub threads: usize,
    pub anchor_mode: AnchorMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_window: 200,
            alpha: 0.05,
            tol: 0.05,
            max_iters: 2000,
            seed: 0,
            threads: 1,
            anchor_mode: AnchorMode::RunningObjective,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.n_window < 2 {
            return Err(EngineError::InvalidParameter("n_window must be at least 2".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(EngineError::InvalidParameter("alpha must lie in (0, 1)".into()));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(EngineError::InvalidParameter("tol must lie in (0, 1)".into()));
        }
        if self.max_iters == 0 {
            return Err(EngineError::InvalidParameter("max_iters must be positive".into()));
        }
        if self.threads == 0 {
            return Err(EngineError::InvalidParameter("threads must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRecord {
    pub iter: usize,
    pub cost: f64,
    pub lower: f64,
    pub upper: Option<f64>,
    pub sigma_hat: Option<f64>,
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
}

/// Largest certificate residuals seen over a set of LP solves.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub solves: usize,
    pub max_primal_residual: f64,
    pub max_dual_residual: f64,
    pub max_relative_gap: f64,
}

impl SolveStats {
    pub fn record(&mut self, sol: &LpSolution) {
        self.solves += 1;
        if let Some(cert) = &sol.certificate {
            self.max_primal_residual = self.max_primal_residual.max(cert.primal_residual);
            self.max_dual_residual = self.max_dual_residual.max(cert.dual_residual);
            self.max_relative_gap = self.max_relative_gap.max(cert.relative_gap(sol.objective));
        }
    }

    pub fn merge(&mut self, other: &SolveStats) {
        self.solves += other.solves;
        self.max_primal_residual = self.max_primal_residual.max(other.max_primal_residual);
        self.max_dual_residual = self.max_dual_residual.max(other.max_dual_residual);
        self.max_relative_gap = self.max_relative_gap.max(other.max_relative_gap);
    }

    /// All recorded solves met the feasibility and strong-duality tolerances.
    pub fn all_certified(&self) -> bool {
        self.max_primal_residual <= lp::FEAS_TOL
            && self.max_dual_residual <= lp::FEAS_TOL
            && self.max_relative_gap <= lp::GAP_TOL
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub policy: Policy,
    pub history: Vec<BoundsRecord>,
    pub termination: Termination,
    pub wall_seconds: f64,
    pub lp_stats: SolveStats,
}

impl RunResult {
    pub fn final_lower(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.lower)
    }

    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    /// Results document: config echo, bounds per iteration, termination and
    /// timing.
    pub fn report(&self, config: &RunConfig) -> serde_json::Value {
        serde_json::json!({
            "config": config,
            "history": self.history,
            "termination": self.termination,
            "wall_seconds": self.wall_seconds,
            "lp_stats": self.lp_stats,
        })
    }
}

/// One solved stage subproblem.
#[derive(Debug, Clone)]
pub struct StageSolve {
    pub lp: StageLp,
    pub solution: LpSolution,
    /// Optimal value including the future term, if any.
    pub value: f64,
    /// Stage cost excluding the future term.
    pub stage_cost: f64,
    pub state: Vec<f64>,
}

impl StageSolve {
    /// Duals of the base inequality rows (cut rows dropped).
    pub fn base_duals_ub(&self) -> &[f64] {
        &self.solution.duals_ub[..self.lp.problem.b_ub.len()]
    }
}

/// Solves stage `t` at `(x_prev, xi)` with cost family `kind`, adding the
/// epigraph of `future` when given.
pub fn solve_stage<M: StageModel + ?Sized>(
    model: &M,
    t: usize,
    x_prev: &[f64],
    xi: &[f64],
    kind: CostKind,
    future: Option<&CutPool>,
    realization: Option<usize>,
) -> Result<StageSolve, EngineError> {
    let lp = model.stage_lp(t, x_prev, xi, kind);
    solve_stage_lp(lp, t, future, realization, branch_of(kind))
}

fn branch_of(kind: CostKind) -> Branch {
    match kind {
        CostKind::Running => Branch::Continue,
        CostKind::Terminal => Branch::Stop,
    }
}

fn solve_stage_lp(
    lp: StageLp,
    t: usize,
    future: Option<&CutPool>,
    realization: Option<usize>,
    branch: Branch,
) -> Result<StageSolve, EngineError> {
    let solution = match future {
        Some(pool) => lp::solve_with_cuts(&lp.problem, pool, &lp.state_cols)?,
        None => lp::solve(&lp.problem)?,
    };
    match solution.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(EngineError::SubproblemInfeasible { stage: t, realization, branch })
        }
        LpStatus::Unbounded => {
            return Err(EngineError::SubproblemUnbounded { stage: t, realization, branch })
        }
    }
    let n = lp.problem.num_vars();
    let stage_cost = lp.problem.objective_at(&solution.x[..n]);
    let state = lp.state_of(&solution.x);
    Ok(StageSolve {
        value: solution.objective,
        stage_cost,
        state,
        lp,
        solution,
    })
}

/// Fresh pools for stages `2..=t_max`, each holding the model's initial cut.
pub fn initial_pools<M: StageModel + ?Sized>(model: &M) -> Vec<CutPool> {
    (2..=model.t_max())
        .map(|t| CutPool::new(t, model.initial_cut(t)))
        .collect()
}

fn future_pool(pools: &[CutPool], t: usize, t_max: usize) -> Option<&CutPool> {
    (t < t_max).then(|| &pools[t - 1])
}

/// Trial states and realized cost of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    /// `states[t]` is `x_t`, from `x_0` up to `x_{t_max - 1}` at least.
    pub states: Vec<Vec<f64>>,
    pub cost: f64,
}

/// Runs the current policy along `traj`: running problems with the next pool
/// as future while alive, the terminal problem at the death stage, and anchor
/// solves afterwards so every stage has a trial state.
pub fn forward_pass<M: StageModel + ?Sized>(
    model: &M,
    pools: &[CutPool],
    traj: &Trajectory,
    anchor_mode: AnchorMode,
    stats: &mut SolveStats,
) -> Result<ForwardPass, EngineError> {
    let t_max = model.t_max();
    let mut states = vec![model.initial_state()];
    let mut cost = 0.0;
    for t in 1..=t_max {
        let x_prev = &states[t - 1];
        let xi = traj.noise(t);
        let realization = Some(traj.xi_index[t - 1]);
        let solved = if traj.d(t) {
            let s = solve_stage(model, t, x_prev, xi, CostKind::Running, future_pool(pools, t, t_max), realization)?;
            cost += s.stage_cost;
            s
        } else if t == traj.horizon {
            let s = solve_stage(model, t, x_prev, xi, CostKind::Terminal, None, realization)?;
            cost += s.stage_cost;
            s
        } else if t == t_max {
            break;
        } else {
            match anchor_mode {
                AnchorMode::RunningObjective => solve_stage(
                    model,
                    t,
                    x_prev,
                    xi,
                    CostKind::Running,
                    future_pool(pools, t, t_max),
                    realization,
                )?,
                AnchorMode::ZeroObjective => {
                    let mut lp = model.stage_lp(t, x_prev, xi, CostKind::Running);
                    lp.problem.c.iter_mut().for_each(|c| *c = 0.0);
                    solve_stage_lp(lp, t, None, realization, Branch::Continue)?
                }
            }
        };
        stats.record(&solved.solution);
        states.push(solved.state);
    }
    Ok(ForwardPass { states, cost })
}

/// Per-realization outcome of the two branch solves at one stage.
struct BranchResult {
    cont_val: f64,
    cont_grad: Vec<f64>,
    stop_val: f64,
    stop_grad: Vec<f64>,
    stats: SolveStats,
}

fn branch_solves<M: StageModel + ?Sized>(
    model: &M,
    t: usize,
    j: usize,
    anchor: &[f64],
    q: f64,
    future: Option<&CutPool>,
) -> Result<BranchResult, EngineError> {
    let dist = &model.noise()[t - 1];
    let xi = &dist.support[j];
    let dim = anchor.len();
    let mut out = BranchResult {
        cont_val: 0.0,
        cont_grad: vec![0.0; dim],
        stop_val: 0.0,
        stop_grad: vec![0.0; dim],
        stats: SolveStats::default(),
    };
    if dist.probs[j] == 0.0 {
        return Ok(out);
    }
    if q < 1.0 {
        let s = solve_stage(model, t, anchor, xi, CostKind::Running, future, Some(j))?;
        out.stats.record(&s.solution);
        out.cont_grad = model.subgradient(t, anchor, xi, &s.lp, &s.solution.duals_eq, s.base_duals_ub());
        out.cont_val = s.value;
    }
    if q > 0.0 {
        let s = solve_stage(model, t, anchor, xi, CostKind::Terminal, None, Some(j))?;
        out.stats.record(&s.solution);
        out.stop_grad = model.subgradient(t, anchor, xi, &s.lp, &s.solution.duals_eq, s.base_duals_ub());
        out.stop_val = s.value;
    }
    Ok(out)
}

/// Adds one cut to every pool, stages `t_max` down to 2, at the trial states
/// `states[t - 1]`. Returns the new cuts in stage order `2..=t_max`.
pub fn backward_pass<M: StageModel + ?Sized>(
    model: &M,
    pools: &mut [CutPool],
    states: &[Vec<f64>],
    horizon: &HorizonDistribution,
    parallel: bool,
    stats: &mut SolveStats,
) -> Result<Vec<Cut>, EngineError> {
    let t_max = model.t_max();
    let mut new_cuts = Vec::with_capacity(t_max - 1);
    for t in (2..=t_max).rev() {
        let anchor = &states[t - 1];
        let q = horizon.q(t);
        let dist = &model.noise()[t - 1];
        let future = future_pool(pools, t, t_max);
        let results: Vec<Result<BranchResult, EngineError>> = if parallel {
            (0..dist.len())
                .into_par_iter()
                .map(|j| branch_solves(model, t, j, anchor, q, future))
                .collect()
        } else {
            (0..dist.len())
                .map(|j| branch_solves(model, t, j, anchor, q, future))
                .collect()
        };
        let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
        for r in &results {
            stats.merge(&r.stats);
        }
        let cont_vals: Vec<f64> = results.iter().map(|r| r.cont_val).collect();
        let stop_vals: Vec<f64> = results.iter().map(|r| r.stop_val).collect();
        let cont_grads: Vec<Vec<f64>> = results.iter().map(|r| r.cont_grad.clone()).collect();
        let stop_grads: Vec<Vec<f64>> = results.iter().map(|r| r.stop_grad.clone()).collect();
        let cut = assemble_cut(q, &dist.probs, &cont_vals, &cont_grads, &stop_vals, &stop_grads, anchor)?;
        pools[t - 2].push(cut.clone())?;
        new_cuts.push(cut);
    }
    new_cuts.reverse();
    Ok(new_cuts)
}

/// Optimal value of the first-stage problem with `pools[0]` (stage 2) as
/// future.
pub fn lower_bound<M: StageModel + ?Sized>(
    model: &M,
    pools: &[CutPool],
    stats: &mut SolveStats,
) -> Result<f64, EngineError> {
    let xi = &model.noise()[0].support[0];
    let s = solve_stage(model, 1, &model.initial_state(), xi, CostKind::Running, pools.first(), Some(0))?;
    stats.record(&s.solution);
    Ok(s.value)
}

/// Statistical upper bound over a window of forward costs:
/// `mean + sigma / sqrt(N) * t_{N-1, 1-alpha}`, where `sigma` divides by `N`.
/// Returns `(bound, sigma)`.
pub fn upper_bound(window: &[f64], alpha: f64) -> Result<(f64, f64), EngineError> {
    let n = window.len();
    if n < 2 {
        return Err(EngineError::InvalidParameter("upper-bound window needs at least 2 costs".into()));
    }
    let nf = n as f64;
    let mean = window.iter().sum::<f64>() / nf;
    let sigma = (window.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / nf).sqrt();
    let factor = student_quantile(n - 1, 1.0 - alpha)?;
    Ok((mean + sigma / nf.sqrt() * factor, sigma))
}

/// Relative gap `(upper - lower) / max(|upper|, 1e-9)`.
pub fn relative_gap(upper: f64, lower: f64) -> f64 {
    (upper - lower) / upper.abs().max(1e-9)
}

/// Inverse CDF of Student's t distribution with `df` degrees of freedom.
pub fn student_quantile(df: usize, prob: f64) -> Result<f64, EngineError> {
    if df == 0 {
        return Err(EngineError::InvalidParameter("degrees of freedom must be positive".into()));
    }
    if !(prob > 0.0 && prob < 1.0) {
        return Err(EngineError::InvalidParameter(format!("probability {prob} outside (0, 1)")));
    }
    if prob == 0.5 {
        return Ok(0.0);
    }
    let dist = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| EngineError::InvalidParameter(e.to_string()))?;
    Ok(dist.inverse_cdf(prob))
}

/// Trains a policy on `model` under `horizon`, one sampled trajectory per
/// iteration, until the relative gap closes or `max_iters` is reached.
pub fn run<M: StageModel + ?Sized>(
    model: &M,
    horizon: &HorizonDistribution,
    config: &RunConfig,
) -> Result<RunResult, EngineError> {
    config.validate()?;
    check_model(model, horizon)?;
    let worker = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| EngineError::InvalidParameter(e.to_string()))?;
    worker.install(|| run_loop(model, horizon, config))
}

fn check_model<M: StageModel + ?Sized>(model: &M, horizon: &HorizonDistribution) -> Result<(), EngineError> {
    let t_max = model.t_max();
    if horizon.t_max() != t_max {
        return Err(EngineError::InvalidParameter(format!(
            "horizon has t_max {}, model has {t_max}",
            horizon.t_max()
        )));
    }
    if model.noise().len() != t_max {
        return Err(EngineError::InvalidParameter("one noise distribution per stage required".into()));
    }
    if model.noise()[0].len() != 1 {
        return Err(EngineError::InvalidParameter("stage 1 noise must be deterministic".into()));
    }
    if model.initial_state().len() != model.state_dim() {
        return Err(EngineError::InvalidParameter("initial state has wrong dimension".into()));
    }
    Ok(())
}

fn run_loop<M: StageModel + ?Sized>(
    model: &M,
    horizon: &HorizonDistribution,
    config: &RunConfig,
) -> Result<RunResult, EngineError> {
    let start = Instant::now();
    let mut pools = initial_pools(model);
    let mut stats = SolveStats::default();
    let mut history: Vec<BoundsRecord> = Vec::new();
    let mut costs: Vec<f64> = Vec::new();
    let mut termination = Termination::MaxIters;
    let parallel = config.threads > 1;

    for k in 1..=config.max_iters {
        let traj = sample_trajectory(SeedStream::new(config.seed, k as u64), horizon, model.noise());
        let fwd = forward_pass(model, &pools, &traj, config.anchor_mode, &mut stats)?;
        backward_pass(model, &mut pools, &fwd.states, horizon, parallel, &mut stats)?;
        let lower = lower_bound(model, &pools, &mut stats)?;
        costs.push(fwd.cost);

        let mut record = BoundsRecord {
            iter: k,
            cost: fwd.cost,
            lower,
            upper: None,
            sigma_hat: None,
            gap: None,
        };
        if k >= config.n_window {
            let (upper, sigma) = upper_bound(&costs[k - config.n_window..], config.alpha)?;
            let gap = relative_gap(upper, lower);
            record.upper = Some(upper);
            record.sigma_hat = Some(sigma);
            record.gap = Some(gap);
            history.push(record);
            if gap <= config.tol {
                termination = Termination::Converged;
                break;
            }
        } else {
            history.push(record);
        }
    }

    Ok(RunResult {
        policy: Policy {
            label: String::new(),
            pools,
        },
        history,
        termination,
        wall_seconds: start.elapsed().as_secs_f64(),
        lp_stats: stats,
    })
}

/// Stage data for [`LinearModel`]: the equality right-hand side is
/// `rhs_eq + xi`, so the noise shifts every equality row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearStage {
    pub a_eq: Vec<Vec<f64>>,
    pub coupling_eq: Vec<Vec<f64>>,
    pub rhs_eq: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub coupling_ub: Vec<Vec<f64>>,
    pub rhs_ub: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub running_cost: Vec<f64>,
    pub terminal_cost: Vec<f64>,
    pub state_cols: Vec<usize>,
}

/// A generic linear model given by explicit stage data and user-supplied
/// initial cuts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub stages: Vec<LinearStage>,
    pub noise: Vec<StageDistribution>,
    pub x0: Vec<f64>,
    /// Initial cuts for stages `2..=t_max`, in order.
    pub initial_cuts: Vec<Cut>,
}

impl StageModel for LinearModel {
    fn t_max(&self) -> usize {
        self.stages.len()
    }

    fn state_dim(&self) -> usize {
        self.x0.len()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.x0.clone()
    }

    fn noise(&self) -> &[StageDistribution] {
        &self.noise
    }

    fn stage_lp(&self, t: usize, x_prev: &[f64], xi: &[f64], kind: CostKind) -> StageLp {
        let s = &self.stages[t - 1];
        let c = match kind {
            CostKind::Running => s.running_cost.clone(),
            CostKind::Terminal => s.terminal_cost.clone(),
        };
        let mut problem = LpProblem::new(c);
        problem.lower = s.lower.clone();
        problem.upper = s.upper.clone();
        for (i, row) in s.a_eq.iter().enumerate() {
            let shift = xi.get(i).copied().unwrap_or(0.0);
            problem.add_eq(row.clone(), s.rhs_eq[i] + shift - lp::dot(&s.coupling_eq[i], x_prev));
        }
        for (i, row) in s.a_ub.iter().enumerate() {
            problem.add_ub(row.clone(), s.rhs_ub[i] - lp::dot(&s.coupling_ub[i], x_prev));
        }
        StageLp {
            problem,
            coupling_eq: s.coupling_eq.clone(),
            coupling_ub: s.coupling_ub.clone(),
            state_cols: s.state_cols.clone(),
        }
    }

    fn initial_cut(&self, t: usize) -> Cut {
        self.initial_cuts[t - 2].clone()
    }
}
