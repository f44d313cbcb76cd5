//! Monte-Carlo evaluation of trained policies and paired comparisons.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cuts::Policy;
use crate::engine::{solve_stage, CostKind, EngineError, SolveStats, StageModel};
use crate::scenario::{sample_trajectory, HorizonDistribution, SeedStream, StageDistribution, Trajectory};

/// Evaluation trajectories use stream ids from here on, disjoint from the
/// per-iteration training streams.
pub const EVAL_STREAM_BASE: u64 = 1 << 40;

/// Paired differences at or above this count as nonnegative.
pub const DIFF_TOL: f64 = 1e-6;

pub fn evaluation_trajectories(
    horizon: &HorizonDistribution,
    noise: &[StageDistribution],
    n_sims: usize,
    seed: u64,
) -> Vec<Trajectory> {
    (0..n_sims as u64)
        .map(|i| sample_trajectory(SeedStream::new(seed, EVAL_STREAM_BASE + i), horizon, noise))
        .collect()
}

/// SHA-256 over realization indices, noise bits and death indicators.
pub fn trajectory_checksum(trajs: &[Trajectory]) -> String {
    let mut h = Sha256::new();
    for tr in trajs {
        h.update((tr.horizon as u64).to_le_bytes());
        for ((xi, &j), &alive) in tr.xi.iter().zip(&tr.xi_index).zip(&tr.alive) {
            h.update((j as u64).to_le_bytes());
            h.update([alive as u8]);
            for v in xi {
                h.update(v.to_bits().to_le_bytes());
            }
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub incomes: Vec<f64>,
    pub horizons: Vec<usize>,
    /// Largest scaled constraint violation over every simulated decision.
    pub max_violation: f64,
    pub lp_stats: SolveStats,
}

impl Simulation {
    pub fn mean_income(&self) -> f64 {
        mean(&self.incomes)
    }
}

struct Rollout {
    income: f64,
    violation: f64,
    stats: SolveStats,
}

fn rollout<M: StageModel + ?Sized>(model: &M, policy: &Policy, traj: &Trajectory) -> Result<Rollout, EngineError> {
    let t_max = model.t_max();
    let mut x = model.initial_state();
    let mut cost = 0.0;
    let mut violation = 0.0_f64;
    let mut stats = SolveStats::default();
    for t in 1..=traj.horizon {
        let xi = traj.noise(t);
        let realization = Some(traj.xi_index[t - 1]);
        let s = if t < traj.horizon {
            let future = if t < t_max { policy.pool(t + 1) } else { None };
            solve_stage(model, t, &x, xi, CostKind::Running, future, realization)?
        } else {
            solve_stage(model, t, &x, xi, CostKind::Terminal, None, realization)?
        };
        stats.record(&s.solution);
        if let Some(cert) = &s.solution.certificate {
            violation = violation.max(cert.primal_residual);
        }
        cost += s.stage_cost;
        x = s.state;
    }
    Ok(Rollout {
        income: -cost,
        violation,
        stats,
    })
}

/// Rolls `policy` along each trajectory: running problems with the policy's
/// next pool while alive, the terminal problem at the death stage. Income is
/// minus the realized cost.
pub fn simulate_policy<M: StageModel + ?Sized>(
    model: &M,
    policy: &Policy,
    trajs: &[Trajectory],
    parallel: bool,
) -> Result<Simulation, EngineError> {
    let outcomes: Vec<Result<Rollout, EngineError>> = if parallel {
        trajs.par_iter().map(|tr| rollout(model, policy, tr)).collect()
    } else {
        trajs.iter().map(|tr| rollout(model, policy, tr)).collect()
    };
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut stats = SolveStats::default();
    for o in &outcomes {
        stats.merge(&o.stats);
    }
    Ok(Simulation {
        incomes: outcomes.iter().map(|o| o.income).collect(),
        horizons: trajs.iter().map(|t| t.horizon).collect(),
        max_violation: outcomes.iter().map(|o| o.violation).fold(0.0, f64::max),
        lp_stats: stats,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Equal-width bins over the data range.
    pub fn of(data: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if data.is_empty() || lo == hi {
            let center = if data.is_empty() { 0.0 } else { lo };
            return Self {
                edges: vec![center - 0.5, center + 0.5],
                counts: vec![data.len()],
            };
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| lo + width * k as f64).collect();
        let mut counts = vec![0; bins];
        for &v in data {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Self { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub label_a: String,
    pub label_b: String,
    pub seed: u64,
    pub trajectory_checksum: String,
    pub horizons: Vec<usize>,
    pub incomes_a: Vec<f64>,
    pub incomes_b: Vec<f64>,
    /// `income_a - income_b` per trajectory.
    pub diffs: Vec<f64>,
    /// `income_a / income_b` per trajectory.
    pub ratios: Vec<f64>,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Fraction of differences at or above `-DIFF_TOL`.
    pub fraction_nonnegative: f64,
    pub nearly_all_threshold: f64,
    pub diff_histogram: Histogram,
    pub ratio_histogram: Histogram,
    pub max_violation: f64,
    pub lp_stats: SolveStats,
}

impl ComparisonReport {
    pub fn n_sims(&self) -> usize {
        self.diffs.len()
    }

    pub fn nearly_all_nonnegative(&self) -> bool {
        self.fraction_nonnegative >= self.nearly_all_threshold
    }

    /// One row per trajectory: `id,T,income_a,income_b,diff,ratio`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["id", "T", "income_a", "income_b", "diff", "ratio"])?;
        for i in 0..self.n_sims() {
            w.write_record([
                i.to_string(),
                self.horizons[i].to_string(),
                format!("{:.17e}", self.incomes_a[i]),
                format!("{:.17e}", self.incomes_b[i]),
                format!("{:.17e}", self.diffs[i]),
                format!("{:.17e}", self.ratios[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Summary without the per-trajectory vectors.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "label_a": self.label_a,
            "label_b": self.label_b,
            "n_sims": self.n_sims(),
            "seed": self.seed,
            "evaluation_streams": "independent of training streams",
            "trajectory_checksum": self.trajectory_checksum,
            "mean_income_a": self.mean_a,
            "mean_income_b": self.mean_b,
            "mean_diff": mean(&self.diffs),
            "mean_ratio": mean(&self.ratios),
            "fraction_nonnegative": self.fraction_nonnegative,
            "nearly_all_threshold": self.nearly_all_threshold,
            "nearly_all_nonnegative": self.nearly_all_nonnegative(),
            "diff_histogram": self.diff_histogram,
            "ratio_histogram": self.ratio_histogram,
            "max_violation": self.max_violation,
        })
    }
}

/// Paired comparison of two policies on the same `n_sims` trajectories drawn
/// from `horizon` with evaluation seed `seed`.
#[allow(clippy::too_many_arguments)]
pub fn compare<M: StageModel + ?Sized>(
    model: &M,
    policy_a: &Policy,
    policy_b: &Policy,
    horizon: &HorizonDistribution,
    n_sims: usize,
    seed: u64,
    threshold: f64,
    parallel: bool,
) -> Result<ComparisonReport, EngineError> {
    let trajs = evaluation_trajectories(horizon, model.noise(), n_sims, seed);
    let checksum = trajectory_checksum(&trajs);
    let sim_a = simulate_policy(model, policy_a, &trajs, parallel)?;
    let sim_b = simulate_policy(model, policy_b, &trajs, parallel)?;
    assert_eq!(checksum, trajectory_checksum(&trajs), "paired runs share trajectories");

    let diffs: Vec<f64> = sim_a.incomes.iter().zip(&sim_b.incomes).map(|(a, b)| a - b).collect();
    let ratios: Vec<f64> = sim_a.incomes.iter().zip(&sim_b.incomes).map(|(a, b)| a / b).collect();
    let nonneg = diffs.iter().filter(|&&d| d >= -DIFF_TOL).count();
    let mut stats = sim_a.lp_stats;
    stats.merge(&sim_b.lp_stats);
    Ok(ComparisonReport {
        label_a: policy_a.label.clone(),
        label_b: policy_b.label.clone(),
        seed,
        trajectory_checksum: checksum,
        horizons: sim_a.horizons.clone(),
        mean_a: sim_a.mean_income(),
        mean_b: sim_b.mean_income(),
        fraction_nonnegative: if diffs.is_empty() { 1.0 } else { nonneg as f64 / diffs.len() as f64 },
        nearly_all_threshold: threshold,
        diff_histogram: Histogram::of(&diffs, 20),
        ratio_histogram: Histogram::of(&ratios, 20),
        max_violation: sim_a.max_violation.max(sim_b.max_violation),
        incomes_a: sim_a.incomes,
        incomes_b: sim_b.incomes,
        diffs,
        ratios,
        lp_stats: stats,
    })
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}
