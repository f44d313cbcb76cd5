//! Exact reference values for tiny instances.
//!
//! Two independent routes: one LP over the whole joint noise/death tree, and
//! an exact backward recursion evaluated at query points by nested solves.

use thiserror::Error;

use crate::cuts::{Cut, CutPool};
use crate::engine::{CostKind, EngineError, SolveStats, StageModel};
use crate::lp::{self, LpError, LpProblem, LpStatus};
use crate::scenario::HorizonDistribution;

/// Largest horizon the oracles accept.
pub const MAX_STAGES: usize = 4;
/// Largest support size per stage the oracles accept.
pub const MAX_REALIZATIONS: usize = 3;
/// Largest state dimension the oracles accept.
pub const MAX_STATE_DIM: usize = 4;
/// Largest joint tree that will be built.
pub const MAX_NODES: usize = 1_000_000;

const KELLEY_TOL: f64 = 1e-11;
const KELLEY_MAX_ROUNDS: usize = 2000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("joint tree would exceed {MAX_NODES} nodes")]
    TreeTooLarge,
    #[error("instance exceeds the oracle budget: {0}")]
    Budget(String),
    #[error("reference LP is {0:?}")]
    NotOptimal(LpStatus),
    #[error("exact recursion did not settle at stage {0}")]
    NotConverged(usize),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub stage: usize,
    pub parent: Option<usize>,
    /// Index into the stage support.
    pub realization: usize,
    /// `D_t` at this node.
    pub alive: bool,
    /// Probability of the path from the root.
    pub prob: f64,
}

impl TreeNode {
    /// The horizon ends exactly at this node.
    pub fn is_death(&self, tree: &JointTree) -> bool {
        !self.alive && self.parent.is_some_and(|p| tree.nodes[p].alive)
    }
}

/// The joint tree of `(xi_t, D_t)`: a living node branches into every
/// realization crossed with survive/die, a dead node has one dead child.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTree {
    pub t_max: usize,
    pub nodes: Vec<TreeNode>,
    /// Node indices per stage, stage `t` at index `t - 1`.
    pub stages: Vec<Vec<usize>>,
}

impl JointTree {
    pub fn leaves(&self) -> &[usize] {
        &self.stages[self.t_max - 1]
    }

    /// Total path probability of nodes where the horizon ends at `t`.
    pub fn death_mass(&self, t: usize) -> f64 {
        self.stages[t - 1]
            .iter()
            .filter(|&&i| self.nodes[i].is_death(self))
            .map(|&i| self.nodes[i].prob)
            .sum()
    }
}

pub fn build_joint_tree<M: StageModel + ?Sized>(
    model: &M,
    horizon: &HorizonDistribution,
) -> Result<JointTree, OracleError> {
    let t_max = model.t_max();
    let noise = model.noise();
    let mut count = 1usize;
    let mut living = 1usize;
    let mut dead = 0usize;
    for t in 2..=t_max {
        let m = noise[t - 1].len();
        let next_living = living.checked_mul(m).ok_or(OracleError::TreeTooLarge)?;
        dead = next_living.checked_add(dead).ok_or(OracleError::TreeTooLarge)?;
        living = next_living;
        count = count.saturating_add(living).saturating_add(dead);
        if count > MAX_NODES {
            return Err(OracleError::TreeTooLarge);
        }
    }

    let mut nodes = vec![TreeNode {
        stage: 1,
        parent: None,
        realization: 0,
        alive: true,
        prob: 1.0,
    }];
    let mut stages = vec![vec![0usize]];
    for t in 2..=t_max {
        let dist = &noise[t - 1];
        let q = horizon.q(t);
        let mut layer = Vec::new();
        for &parent in &stages[t - 2] {
            let pn = nodes[parent].clone();
            if pn.alive {
                for (j, &p) in dist.probs.iter().enumerate() {
                    for (alive, w) in [(true, 1.0 - q), (false, q)] {
                        nodes.push(TreeNode {
                            stage: t,
                            parent: Some(parent),
                            realization: j,
                            alive,
                            prob: pn.prob * p * w,
                        });
                        layer.push(nodes.len() - 1);
                    }
                }
            } else {
                nodes.push(TreeNode {
                    stage: t,
                    parent: Some(parent),
                    realization: 0,
                    alive: false,
                    prob: pn.prob,
                });
                layer.push(nodes.len() - 1);
            }
        }
        stages.push(layer);
    }
    Ok(JointTree { t_max, nodes, stages })
}

fn check_budget<M: StageModel + ?Sized>(model: &M) -> Result<(), OracleError> {
    if model.t_max() > MAX_STAGES {
        return Err(OracleError::Budget(format!("t_max {} > {MAX_STAGES}", model.t_max())));
    }
    if let Some(d) = model.noise().iter().find(|d| d.len() > MAX_REALIZATIONS) {
        return Err(OracleError::Budget(format!("{} realizations > {MAX_REALIZATIONS}", d.len())));
    }
    if model.state_dim() > MAX_STATE_DIM {
        return Err(OracleError::Budget(format!(
            "state dimension {} > {MAX_STATE_DIM}",
            model.state_dim()
        )));
    }
    Ok(())
}

/// Optimal expected cost from one LP over every decision node of the joint
/// tree: running costs at living nodes, terminal cost where the horizon ends.
/// Nodes of probability zero carry no decisions.
pub fn extensive_form_value<M: StageModel + ?Sized>(
    model: &M,
    horizon: &HorizonDistribution,
) -> Result<f64, OracleError> {
    check_budget(model)?;
    let tree = build_joint_tree(model, horizon)?;
    let lp = extensive_form_lp(model, &tree)?;
    let sol = lp::solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(OracleError::NotOptimal(sol.status));
    }
    Ok(sol.objective)
}

/// The deterministic equivalent LP over `tree`.
pub fn extensive_form_lp<M: StageModel + ?Sized>(model: &M, tree: &JointTree) -> Result<LpProblem, OracleError> {
    let noise = model.noise();
    let zero_state = vec![0.0; model.state_dim()];
    let x0 = model.initial_state();

    struct Block {
        offset: usize,
        state_cols: Vec<usize>,
    }
    let mut blocks: Vec<Option<Block>> = (0..tree.nodes.len()).map(|_| None).collect();
    let mut big = LpProblem::new(Vec::new());

    for (id, node) in tree.nodes.iter().enumerate() {
        let decides = node.alive || node.is_death(tree);
        if !decides || node.prob == 0.0 {
            continue;
        }
        let t = node.stage;
        let xi = &noise[t - 1].support[node.realization];
        let kind = if node.alive { CostKind::Running } else { CostKind::Terminal };
        let parent_block = node.parent.map(|p| blocks[p].as_ref().expect("parent decides before child"));
        let x_prev = if node.parent.is_some() { &zero_state } else { &x0 };
        let stage = model.stage_lp(t, x_prev, xi, kind);

        let offset = big.num_vars();
        let width = stage.problem.num_vars();
        for j in 0..width {
            big.add_var(node.prob * stage.problem.c[j], stage.problem.lower[j], stage.problem.upper[j]);
        }
        let place = |row: &[f64], coupling: &[f64], n_vars: usize| {
            let mut full = vec![0.0; n_vars];
            full[offset..offset + width].copy_from_slice(row);
            if let Some(pb) = parent_block {
                for (&col, &b) in pb.state_cols.iter().zip(coupling) {
                    full[pb.offset + col] += b;
                }
            }
            full
        };
        let n_vars = big.num_vars();
        for ((row, &rhs), coupling) in stage.problem.a_eq.iter().zip(&stage.problem.b_eq).zip(&stage.coupling_eq) {
            big.add_eq(place(row, coupling, n_vars), rhs);
        }
        for ((row, &rhs), coupling) in stage.problem.a_ub.iter().zip(&stage.problem.b_ub).zip(&stage.coupling_ub) {
            big.add_ub(place(row, coupling, n_vars), rhs);
        }
        blocks[id] = Some(Block {
            offset,
            state_cols: stage.state_cols.clone(),
        });
    }
    Ok(big)
}

/// Exact cost-to-go `Q_t(x, 1)` by backward recursion at query points.
///
/// The continuation `min f_t + Q_{t+1}` is solved by a cutting-plane loop in
/// which every cut is an exact supporting hyperplane of `Q_{t+1}`, computed
/// recursively. Cuts are cached per stage and reused across queries.
pub struct ExactDp<'a, M: StageModel + ?Sized> {
    model: &'a M,
    horizon: &'a HorizonDistribution,
    /// Valid cuts for `Q_t`, stage `t` at index `t - 2`.
    cache: Vec<CutPool>,
    pub stats: SolveStats,
}

impl<'a, M: StageModel + ?Sized> ExactDp<'a, M> {
    pub fn new(model: &'a M, horizon: &'a HorizonDistribution) -> Result<Self, OracleError> {
        check_budget(model)?;
        Ok(Self {
            model,
            horizon,
            cache: (2..=model.t_max())
                .map(|t| CutPool::new(t, model.initial_cut(t)))
                .collect(),
            stats: SolveStats::default(),
        })
    }

    /// `Q_t(x, 1)`; zero beyond `t_max`.
    pub fn value(&mut self, t: usize, x: &[f64]) -> Result<f64, OracleError> {
        Ok(self.value_and_subgradient(t, x)?.0)
    }

    /// `Q_t(x, 0)`, which is zero: nothing is paid once the horizon has ended.
    pub fn stopped_value(&self, _t: usize, _x: &[f64]) -> f64 {
        0.0
    }

    /// `Q_t(x, 1)` and a subgradient in `x`.
    pub fn value_and_subgradient(&mut self, t: usize, x: &[f64]) -> Result<(f64, Vec<f64>), OracleError> {
        let dim = self.model.state_dim();
        if t > self.model.t_max() {
            return Ok((0.0, vec![0.0; dim]));
        }
        let q = self.horizon.q(t);
        let dist = self.model.noise()[t - 1].clone();
        let mut value = 0.0;
        let mut grad = vec![0.0; dim];
        for (j, xi) in dist.support.iter().enumerate() {
            let p = dist.probs[j];
            if p == 0.0 {
                continue;
            }
            if q < 1.0 {
                let (v, g) = self.continuation(t, x, xi)?;
                value += p * (1.0 - q) * v;
                for (gi, gj) in grad.iter_mut().zip(&g) {
                    *gi += p * (1.0 - q) * gj;
                }
            }
            if q > 0.0 {
                let (v, g) = self.branch_solve(t, x, xi, CostKind::Terminal, None)?;
                value += p * q * v;
                for (gi, gj) in grad.iter_mut().zip(&g) {
                    *gi += p * q * gj;
                }
            }
        }
        if t >= 2 {
            let cut = Cut::new(value - lp::dot(&grad, x), grad.clone());
            self.cache[t - 2].push(cut).map_err(EngineError::from)?;
        }
        Ok((value, grad))
    }

    /// Optimal value of the whole problem: the first stage with the exact
    /// continuation.
    pub fn root_value(&mut self) -> Result<f64, OracleError> {
        let x0 = self.model.initial_state();
        let xi = self.model.noise()[0].support[0].clone();
        Ok(self.continuation(1, &x0, &xi)?.0)
    }

    fn branch_solve(
        &mut self,
        t: usize,
        x: &[f64],
        xi: &[f64],
        kind: CostKind,
        future: Option<&CutPool>,
    ) -> Result<(f64, Vec<f64>), OracleError> {
        let s = crate::engine::solve_stage(self.model, t, x, xi, kind, future, None)?;
        self.stats.record(&s.solution);
        let g = self
            .model
            .subgradient(t, x, xi, &s.lp, &s.solution.duals_eq, s.base_duals_ub());
        Ok((s.value, g))
    }

    /// `min f_t(v) + Q_{t+1}(state(v), 1)` over the stage feasible set.
    fn continuation(&mut self, t: usize, x: &[f64], xi: &[f64]) -> Result<(f64, Vec<f64>), OracleError> {
        if t >= self.model.t_max() {
            return self.branch_solve(t, x, xi, CostKind::Running, None);
        }
        for _ in 0..KELLEY_MAX_ROUNDS {
            let pool = self.cache[t - 1].clone();
            let s = crate::engine::solve_stage(self.model, t, x, xi, CostKind::Running, Some(&pool), None)?;
            self.stats.record(&s.solution);
            let model_future = s.value - s.stage_cost;
            let exact_future = self.value(t + 1, &s.state)?;
            if exact_future - model_future <= KELLEY_TOL * (1.0 + exact_future.abs()) {
                let g = self
                    .model
                    .subgradient(t, x, xi, &s.lp, &s.solution.duals_eq, s.base_duals_ub());
                return Ok((s.value, g));
            }
        }
        Err(OracleError::NotConverged(t))
    }
}

/// `Q_t(x, 1)` at each `(t, x)` query.
pub fn exact_dp<M: StageModel + ?Sized>(
    model: &M,
    horizon: &HorizonDistribution,
    queries: &[(usize, Vec<f64>)],
) -> Result<Vec<f64>, OracleError> {
    let mut dp = ExactDp::new(model, horizon)?;
    queries.iter().map(|(t, x)| dp.value(*t, x)).collect()
}
