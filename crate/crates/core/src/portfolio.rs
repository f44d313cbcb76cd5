//! Multistage portfolio selection with proportional transaction costs.
//!
//! Holdings are `n` risky assets plus cash (the last component). At stage `t`
//! the incoming holdings grow by the realized returns `xi_t` and are then
//! rebalanced by selling `y` and buying `z`, paying `eta` per unit sold and
//! `nu` per unit bought. Running costs are zero; the terminal cost at the
//! stage the horizon ends is minus the expected next-stage wealth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cuts::Cut;
use crate::engine::{CostKind, StageLp, StageModel};
use crate::lp::LpProblem;
use crate::scenario::{truncated_exponential_horizon, HorizonDistribution, ScenarioError, StageDistribution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PortfolioError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioInstance {
    /// Number of risky assets.
    pub n: usize,
    pub t_max: usize,
    pub rf: f64,
    /// Return distributions over `R^{n+1}`, stage `t` at index `t - 1`.
    pub returns: Vec<StageDistribution>,
    /// `E[xi_{t+1}]`, stage `t` at index `t - 1`.
    pub mean_next: Vec<Vec<f64>>,
    /// Selling costs, `eta[t-1][i]`.
    pub eta: Vec<Vec<f64>>,
    /// Buying costs, `nu[t-1][i]`.
    pub nu: Vec<Vec<f64>>,
    /// Largest fraction of wealth held in each risky asset.
    pub u: Vec<f64>,
    pub x0: Vec<f64>,
}

/// Rebalancing decision at one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDecision {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl PortfolioInstance {
    pub fn validate(&self) -> Result<(), PortfolioError> {
        let n = self.n;
        let t_max = self.t_max;
        let bad = |msg: String| Err(PortfolioError::InvalidParameter(msg));
        if t_max < 2 {
            return bad("t_max must be at least 2".into());
        }
        if self.returns.len() != t_max || self.mean_next.len() != t_max {
            return Err(PortfolioError::DimensionMismatch(
                "need one return distribution and one next-stage mean per stage".into(),
            ));
        }
        if self.eta.len() != t_max || self.nu.len() != t_max {
            return Err(PortfolioError::DimensionMismatch("need transaction costs for every stage".into()));
        }
        if self.eta.iter().chain(&self.nu).any(|c| c.len() != n || c.iter().any(|&v| !(v > 0.0 && v < 1.0))) {
            return bad("transaction costs must lie in (0, 1) for every asset".into());
        }
        if self.u.len() != n || self.u.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
            return bad("position caps must lie in (0, 1]".into());
        }
        if self.x0.len() != n + 1 || self.x0.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return bad("initial holdings must be n + 1 nonnegative numbers".into());
        }
        if self.returns[0].len() != 1 {
            return bad("stage 1 returns must be deterministic".into());
        }
        for (t, dist) in self.returns.iter().enumerate() {
            dist.validate()?;
            if dist.dim() != n + 1 {
                return Err(PortfolioError::DimensionMismatch(format!(
                    "stage {} returns have dimension {}",
                    t + 1,
                    dist.dim()
                )));
            }
            for xi in &dist.support {
                if xi.iter().any(|&r| !(r > 0.0)) {
                    return bad(format!("stage {} has a nonpositive return", t + 1));
                }
                if (xi[n] - self.rf).abs() > 1e-12 {
                    return bad(format!("stage {} cash return differs from the risk-free rate", t + 1));
                }
            }
        }
        if self.mean_next.iter().any(|m| m.len() != n + 1 || m.iter().any(|&v| !(v > 0.0))) {
            return bad("next-stage means must be positive vectors of length n + 1".into());
        }
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        3 * self.n + 1
    }

    /// Stage LP over `[x (n+1), y (n), z (n)]`.
    ///
    /// Equality rows: per risky asset `x_i + y_i - z_i = xi_i xp_i`, then cash
    /// `x_c - sum (1-eta_i) y_i + sum (1+nu_i) z_i = xi_c xp_c`. Inequality
    /// rows: sales caps `y_i <= xi_i xp_i`, then position caps
    /// `x_i <= u_i sum_j xi_j xp_j`.
    pub fn build_stage_lp(&self, t: usize, x_prev: &[f64], xi: &[f64], kind: CostKind) -> StageLp {
        let n = self.n;
        let nv = self.num_vars();
        let (xc, yc, zc) = (0, n + 1, 2 * n + 1);
        let eta = &self.eta[t - 1];
        let nu = &self.nu[t - 1];

        let mut c = vec![0.0; nv];
        if kind == CostKind::Terminal {
            for (ci, &m) in c.iter_mut().zip(&self.mean_next[t - 1]) {
                *ci = -m;
            }
        }
        let mut problem = LpProblem::new(c);
        let mut coupling_eq = Vec::with_capacity(n + 1);
        let mut coupling_ub = Vec::with_capacity(2 * n);

        for i in 0..n {
            let mut row = vec![0.0; nv];
            row[xc + i] = 1.0;
            row[yc + i] = 1.0;
            row[zc + i] = -1.0;
            problem.add_eq(row, xi[i] * x_prev[i]);
            let mut b = vec![0.0; n + 1];
            b[i] = -xi[i];
            coupling_eq.push(b);
        }
        let mut cash = vec![0.0; nv];
        cash[xc + n] = 1.0;
        for i in 0..n {
            cash[yc + i] = -(1.0 - eta[i]);
            cash[zc + i] = 1.0 + nu[i];
        }
        problem.add_eq(cash, xi[n] * x_prev[n]);
        let mut b = vec![0.0; n + 1];
        b[n] = -xi[n];
        coupling_eq.push(b);

        for i in 0..n {
            let mut row = vec![0.0; nv];
            row[yc + i] = 1.0;
            problem.add_ub(row, xi[i] * x_prev[i]);
            let mut b = vec![0.0; n + 1];
            b[i] = -xi[i];
            coupling_ub.push(b);
        }
        let wealth = crate::lp::dot(xi, x_prev);
        for i in 0..n {
            let mut row = vec![0.0; nv];
            row[xc + i] = 1.0;
            problem.add_ub(row, self.u[i] * wealth);
            coupling_ub.push(xi.iter().map(|&r| -self.u[i] * r).collect());
        }

        StageLp {
            problem,
            coupling_eq,
            coupling_ub,
            state_cols: (0..=n).collect(),
        }
    }

    pub fn decision_of(&self, v: &[f64]) -> StageDecision {
        let n = self.n;
        StageDecision {
            x: v[..=n].to_vec(),
            y: v[n + 1..2 * n + 1].to_vec(),
            z: v[2 * n + 1..3 * n + 1].to_vec(),
        }
    }

    /// Largest violation of the stage constraints by `d`, scaled by
    /// `1 + |rhs|` per row.
    pub fn constraint_violation(&self, t: usize, x_prev: &[f64], xi: &[f64], d: &StageDecision) -> f64 {
        let n = self.n;
        let eta = &self.eta[t - 1];
        let nu = &self.nu[t - 1];
        let scaled = |v: f64, rhs: f64| v / (1.0 + rhs.abs());
        let mut worst = 0.0_f64;
        for v in d.x.iter().chain(&d.y).chain(&d.z) {
            worst = worst.max(-v);
        }
        for i in 0..n {
            let rhs = xi[i] * x_prev[i];
            worst = worst.max(scaled((d.x[i] + d.y[i] - d.z[i] - rhs).abs(), rhs));
            worst = worst.max(scaled(d.y[i] - rhs, rhs));
        }
        let rhs = xi[n] * x_prev[n];
        let flow: f64 = (0..n).map(|i| (1.0 - eta[i]) * d.y[i] - (1.0 + nu[i]) * d.z[i]).sum();
        worst = worst.max(scaled((d.x[n] - rhs - flow).abs(), rhs));
        let wealth = crate::lp::dot(xi, x_prev);
        for i in 0..n {
            let cap = self.u[i] * wealth;
            worst = worst.max(scaled(d.x[i] - cap, cap));
        }
        worst
    }

    /// Wealth leaked to transaction costs by `d`.
    pub fn cost_leakage(&self, t: usize, d: &StageDecision) -> f64 {
        (0..self.n)
            .map(|i| self.eta[t - 1][i] * d.y[i] + self.nu[t - 1][i] * d.z[i])
            .sum()
    }

    /// `G_t`: a bound on expected terminal wealth per unit of holdings entering
    /// stage `t`, taken over every possible stopping stage `T >= t`.
    pub fn growth_bound(&self, t: usize) -> f64 {
        let mut best = 0.0_f64;
        let mut growth = 1.0;
        for s in t..=self.t_max {
            let stage_max = self.returns[s - 1]
                .support
                .iter()
                .flatten()
                .fold(0.0_f64, |a, &r| a.max(r));
            growth *= stage_max;
            let mean_max = self.mean_next[s - 1].iter().fold(0.0_f64, |a, &r| a.max(r));
            best = best.max(growth * mean_max);
        }
        best
    }

    pub fn to_json(&self, horizon: &HorizonDistribution) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&InstanceDoc {
            instance: self.clone(),
            horizon_pmf: horizon.pmf().to_vec(),
        })
    }

    pub fn from_json(s: &str) -> Result<(Self, HorizonDistribution), PortfolioError> {
        let doc: InstanceDoc =
            serde_json::from_str(s).map_err(|e| PortfolioError::InvalidParameter(e.to_string()))?;
        doc.instance.validate()?;
        let horizon = HorizonDistribution::from_pmf(doc.horizon_pmf)?;
        if horizon.t_max() != doc.instance.t_max {
            return Err(PortfolioError::DimensionMismatch("horizon and instance disagree on t_max".into()));
        }
        Ok((doc.instance, horizon))
    }
}

/// Serialized instance plus its horizon pmf on `2..=t_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub instance: PortfolioInstance,
    pub horizon_pmf: Vec<f64>,
}

/// Subgradient in `x_prev` from the stage duals:
/// `(lambda - (u . delta) e - [mu; 0]) o xi`, where `lambda` are the balance
/// multipliers, `mu >= 0` those of the sales caps and `delta >= 0` those of
/// the position caps.
pub fn cut_coeffs_from_duals(
    inst: &PortfolioInstance,
    xi: &[f64],
    duals_eq: &[f64],
    duals_ub: &[f64],
) -> Result<Vec<f64>, PortfolioError> {
    let n = inst.n;
    if xi.len() != n + 1 || duals_eq.len() != n + 1 || duals_ub.len() != 2 * n {
        return Err(PortfolioError::DimensionMismatch(format!(
            "expected {} returns, {} balance duals and {} cap duals",
            n + 1,
            n + 1,
            2 * n
        )));
    }
    let mu: Vec<f64> = duals_ub[..n].iter().map(|v| -v).collect();
    let delta: Vec<f64> = duals_ub[n..].iter().map(|v| -v).collect();
    let u_delta = crate::lp::dot(&inst.u, &delta);
    Ok((0..=n)
        .map(|i| {
            let m = if i < n { mu[i] } else { 0.0 };
            (duals_eq[i] - u_delta - m) * xi[i]
        })
        .collect())
}

impl StageModel for PortfolioInstance {
    fn t_max(&self) -> usize {
        self.t_max
    }

    fn state_dim(&self) -> usize {
        self.n + 1
    }

    fn initial_state(&self) -> Vec<f64> {
        self.x0.clone()
    }

    fn noise(&self) -> &[StageDistribution] {
        &self.returns
    }

    fn stage_lp(&self, t: usize, x_prev: &[f64], xi: &[f64], kind: CostKind) -> StageLp {
        self.build_stage_lp(t, x_prev, xi, kind)
    }

    fn initial_cut(&self, t: usize) -> Cut {
        Cut::new(0.0, vec![-self.growth_bound(t); self.n + 1])
    }

    fn subgradient(
        &self,
        _t: usize,
        _x_prev: &[f64],
        xi: &[f64],
        _lp: &StageLp,
        duals_eq: &[f64],
        duals_ub: &[f64],
    ) -> Vec<f64> {
        cut_coeffs_from_duals(self, xi, duals_eq, duals_ub).expect("duals come from the matching stage LP")
    }
}

/// Parameters of the random instance family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n: usize,
    pub t_max: usize,
    pub m_realizations: usize,
    pub lambda: f64,
    pub cost: f64,
    pub rf: f64,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            n: 4,
            t_max: 10,
            m_realizations: 20,
            lambda: 0.15,
            cost: 0.01,
            rf: 1.01,
            seed: 1,
        }
    }
}

/// Standard deviation of every generated return.
pub const RETURN_SD: f64 = 0.02;

/// Mean return of risky asset `i` (1-based) at stage `t`.
pub fn mean_return(n: usize, t: usize, i: usize) -> f64 {
    if i > n / 2 {
        1.05
    } else if t <= 4 {
        1.06
    } else {
        1.04
    }
}

/// Random instance: returns drawn from normals around [`mean_return`],
/// `m_realizations` equally likely points per stage, uniform initial holdings
/// on `[0, 1000]`, no position limits, and a truncated exponential horizon.
pub fn generate_instance(p: &GeneratorParams) -> Result<(PortfolioInstance, HorizonDistribution), PortfolioError> {
    let bad = |msg: &str| Err(PortfolioError::InvalidParameter(msg.into()));
    if p.n == 0 || !p.n.is_multiple_of(2) {
        return bad("n must be a positive even number");
    }
    if p.t_max < 2 {
        return bad("t_max must be at least 2");
    }
    if p.m_realizations == 0 {
        return bad("m_realizations must be positive");
    }
    if !(p.cost > 0.0 && p.cost < 1.0) {
        return bad("transaction cost must lie in (0, 1)");
    }
    if !(p.rf > 0.0 && p.rf.is_finite()) {
        return bad("risk-free rate must be positive");
    }
    let horizon = truncated_exponential_horizon(p.lambda, p.t_max)?;

    let n = p.n;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let x0: Vec<f64> = (0..=n).map(|_| rng.random_range(0.0..=1000.0)).collect();

    let draw = |t: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut xi: Vec<f64> = (1..=n)
            .map(|i| {
                Normal::new(mean_return(n, t, i), RETURN_SD)
                    .expect("positive standard deviation")
                    .sample(rng)
            })
            .collect();
        xi.push(p.rf);
        xi
    };

    let mut returns = vec![StageDistribution::deterministic(draw(1, &mut rng))];
    let mut later = Vec::with_capacity(p.t_max);
    for t in 2..=p.t_max + 1 {
        let support: Vec<Vec<f64>> = (0..p.m_realizations).map(|_| draw(t, &mut rng)).collect();
        later.push(StageDistribution::uniform(support)?);
    }
    let mean_next: Vec<Vec<f64>> = later.iter().map(StageDistribution::mean).collect();
    later.pop();
    returns.extend(later);

    let inst = PortfolioInstance {
        n,
        t_max: p.t_max,
        rf: p.rf,
        returns,
        mean_next,
        eta: vec![vec![p.cost; n]; p.t_max],
        nu: vec![vec![p.cost; n]; p.t_max],
        u: vec![1.0; n],
        x0,
    };
    inst.validate()?;
    Ok((inst, horizon))
}

/// A hand-sized instance: two risky assets, three stages, two equally
/// likely return scenarios per stage, and a horizon ending at stage 2 or 3.
pub fn tiny_instance() -> (PortfolioInstance, HorizonDistribution) {
    let rf = 1.01;
    let returns = vec![
        StageDistribution::deterministic(vec![1.02, 1.03, rf]),
        StageDistribution::new(vec![vec![1.10, 0.98, rf], vec![0.95, 1.08, rf]], vec![0.5, 0.5])
            .expect("valid stage 2"),
        StageDistribution::new(vec![vec![1.07, 1.00, rf], vec![0.97, 1.05, rf]], vec![0.4, 0.6])
            .expect("valid stage 3"),
    ];
    let mean_next = vec![returns[1].mean(), returns[2].mean(), vec![1.04, 1.03, rf]];
    let inst = PortfolioInstance {
        n: 2,
        t_max: 3,
        rf,
        returns,
        mean_next,
        eta: vec![vec![0.01, 0.02]; 3],
        nu: vec![vec![0.02, 0.01]; 3],
        u: vec![0.6, 0.7],
        x0: vec![1.0, 2.0, 3.0],
    };
    let horizon = HorizonDistribution::from_pmf(vec![0.4, 0.6]).expect("valid pmf");
    (inst, horizon)
}
