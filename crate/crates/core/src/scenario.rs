//! Random horizon and per-stage noise.
//!
//! The number of stages `T` is modelled through the death process
//! `D_t = 1{T > t}`, an absorbing two-state Markov chain whose only
//! parameters are the conditional stopping probabilities
//! `q_t = P(D_t = 0 | D_{t-1} = 1)`. Stage noise is a finite discrete
//! distribution independent of the past and of `D_t`.
//!
//! Stages are numbered from 1 in every public accessor; vectors are stored
//! zero-based (stage `t` lives at index `t - 1`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on probability mass sums.
pub const PMF_TOL: f64 = 1e-12;

/// Below this survival probability the `q` recurrence is considered to have
/// underflowed.
pub const SURVIVAL_FLOOR: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),
}

/// Distribution of the number of stages `T` on `{2, ..., t_max}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonDistribution {
    t_max: usize,
    /// `p[t - 2] = P(T = t)`.
    p: Vec<f64>,
    /// `q[t - 2] = P(D_t = 0 | D_{t-1} = 1)`.
    q: Vec<f64>,
}

impl HorizonDistribution {
    /// Builds the distribution from the pmf `p` over `t = 2..=t_max`
    /// (`p.len() == t_max - 1`).
    pub fn from_pmf(p: Vec<f64>) -> Result<Self, ScenarioError> {
        if p.is_empty() {
            return Err(ScenarioError::InvalidParameter(
                "horizon pmf must cover at least t = 2".into(),
            ));
        }
        let q = derive_transition_probs(&p)?;
        Ok(Self {
            t_max: p.len() + 1,
            p,
            q,
        })
    }

    /// Horizon fixed at `t_max`: `q_t = 0` for interior stages and
    /// `q_{t_max} = 1`.
    pub fn fixed(t_max: usize) -> Result<Self, ScenarioError> {
        if t_max < 2 {
            return Err(ScenarioError::InvalidParameter(format!(
                "t_max must be >= 2, got {t_max}"
            )));
        }
        let mut p = vec![0.0; t_max - 1];
        p[t_max - 2] = 1.0;
        Self::from_pmf(p)
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    /// `P(T = t)`; zero outside `{2, ..., t_max}`.
    pub fn p(&self, t: usize) -> f64 {
        if t < 2 || t > self.t_max {
            0.0
        } else {
            self.p[t - 2]
        }
    }

    /// Conditional stopping probability at stage `t` (zero at `t = 1`).
    pub fn q(&self, t: usize) -> f64 {
        if t < 2 || t > self.t_max {
            0.0
        } else {
            self.q[t - 2]
        }
    }

    pub fn pmf(&self) -> &[f64] {
        &self.p
    }

    pub fn transition_probs(&self) -> &[f64] {
        &self.q
    }

    /// Rebuilds `P(T = t) = q_t * prod_{k<t} (1 - q_k)` from the stored `q`.
    pub fn pmf_from_transitions(&self) -> Vec<f64> {
        let mut survival = 1.0;
        self.q
            .iter()
            .map(|&qt| {
                let pt = qt * survival;
                survival *= 1.0 - qt;
                pt
            })
            .collect()
    }

    pub fn mean(&self) -> f64 {
        self.p
            .iter()
            .enumerate()
            .map(|(k, &pt)| (k + 2) as f64 * pt)
            .sum()
    }
}

/// Conditional stopping probabilities from a horizon pmf over `t = 2..=t_max`.
///
/// `q_2 = p_2`, `q_t = p_t / prod_{k=2}^{t-1} (1 - q_k)`, with stages of zero
/// mass assigned `q_t = 0` without division and `q_{t_max}` clamped to 1.
pub fn derive_transition_probs(p: &[f64]) -> Result<Vec<f64>, ScenarioError> {
    validate_pmf(p, "horizon pmf")?;
    let last = p.len() - 1;
    let mut q = Vec::with_capacity(p.len());
    let mut survival = 1.0_f64;
    for (k, &pt) in p.iter().enumerate() {
        let qt = if k == last {
            if pt > 0.0 && survival <= SURVIVAL_FLOOR {
                return Err(ScenarioError::NumericalDegeneracy(format!(
                    "survival product underflowed before t = {}",
                    k + 2
                )));
            }
            if pt > 0.0 {
                let raw = pt / survival;
                if (raw - 1.0).abs() > 1e-10 {
                    return Err(ScenarioError::NumericalDegeneracy(format!(
                        "terminal stopping probability {raw} differs from 1"
                    )));
                }
            }
            1.0
        } else if pt == 0.0 {
            0.0
        } else {
            if survival <= SURVIVAL_FLOOR {
                return Err(ScenarioError::NumericalDegeneracy(format!(
                    "survival product underflowed before t = {}",
                    k + 2
                )));
            }
            (pt / survival).clamp(0.0, 1.0)
        };
        survival *= 1.0 - qt;
        q.push(qt);
    }
    Ok(q)
}

/// Discretised exponential lifetime conditioned on `[1/2, t_max - 1/2)`,
/// shifted by one so that `T` lives on `{2, ..., t_max}`.
pub fn truncated_exponential_horizon(
    lambda: f64,
    t_max: usize,
) -> Result<HorizonDistribution, ScenarioError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(ScenarioError::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if t_max < 2 {
        return Err(ScenarioError::InvalidParameter(format!(
            "t_max must be >= 2, got {t_max}"
        )));
    }
    let norm = (-lambda / 2.0).exp() - (-lambda * (t_max as f64 - 0.5)).exp();
    let p: Vec<f64> = (1..t_max)
        .map(|t| {
            let t = t as f64;
            ((-lambda * (t - 0.5)).exp() - (-lambda * (t + 0.5)).exp()) / norm
        })
        .collect();
    HorizonDistribution::from_pmf(p)
}

/// Finite-support distribution of the noise at one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDistribution {
    pub support: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

impl StageDistribution {
    pub fn new(support: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self, ScenarioError> {
        let dist = Self { support, probs };
        dist.validate()?;
        Ok(dist)
    }

    /// Single realization with probability one.
    pub fn deterministic(xi: Vec<f64>) -> Self {
        Self {
            support: vec![xi],
            probs: vec![1.0],
        }
    }

    /// Equiprobable support.
    pub fn uniform(support: Vec<Vec<f64>>) -> Result<Self, ScenarioError> {
        let m = support.len();
        Self::new(support, vec![1.0 / m as f64; m])
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.support.first().map_or(0, Vec::len)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim()];
        for (xi, &pj) in self.support.iter().zip(&self.probs) {
            for (m, &v) in mean.iter_mut().zip(xi) {
                *m += pj * v;
            }
        }
        mean
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.support.len() != self.probs.len() {
            return Err(ScenarioError::InvalidParameter(format!(
                "{} support points but {} probabilities",
                self.support.len(),
                self.probs.len()
            )));
        }
        validate_pmf(&self.probs, "stage probabilities")?;
        let d = self.dim();
        if self.support.iter().any(|xi| xi.len() != d) {
            return Err(ScenarioError::InvalidParameter(
                "support vectors have differing dimensions".into(),
            ));
        }
        if self.support.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ScenarioError::InvalidParameter(
                "non-finite support value".into(),
            ));
        }
        Ok(())
    }

    /// Index of the realization selected by a uniform draw `u` in `[0, 1)`.
    pub fn index_for(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (j, &pj) in self.probs.iter().enumerate() {
            acc += pj;
            if u < acc {
                return j;
            }
        }
        // u landed in the rounding residue above the cumulative sum
        self.probs.iter().rposition(|&pj| pj > 0.0).unwrap_or(0)
    }
}

fn validate_pmf(p: &[f64], what: &str) -> Result<(), ScenarioError> {
    if p.is_empty() {
        return Err(ScenarioError::InvalidParameter(format!("{what} is empty")));
    }
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(ScenarioError::InvalidParameter(format!(
            "{what} has negative or non-finite entries"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PMF_TOL {
        return Err(ScenarioError::InvalidParameter(format!(
            "{what} sums to {total}, not 1"
        )));
    }
    Ok(())
}

/// One joint sample of noise and death indicators over all `t_max` stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Realized noise per stage, stage `t` at index `t - 1`.
    pub xi: Vec<Vec<f64>>,
    /// Index of the realization within the stage support.
    pub xi_index: Vec<usize>,
    /// Death indicators `D_t`, stage `t` at index `t - 1`.
    pub alive: Vec<bool>,
    /// Realized number of stages `T = min{t : D_t = 0}`.
    pub horizon: usize,
}

impl Trajectory {
    pub fn t_max(&self) -> usize {
        self.alive.len()
    }

    /// `D_t` for 1-based `t`.
    pub fn d(&self, t: usize) -> bool {
        self.alive[t - 1]
    }

    /// Noise at 1-based stage `t`.
    pub fn noise(&self, t: usize) -> &[f64] {
        &self.xi[t - 1]
    }
}

/// Seed state for the counter-based trajectory generator: a base seed plus a
/// stream id. Distinct streams under one seed are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedStream {
    pub seed: u64,
    pub stream: u64,
}

impl SeedStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Draws one trajectory. `stages[t - 1]` is the stage-`t` noise; stage 1 must
/// be deterministic. Noise is drawn at every stage (including after death) so
/// that forward passes have anchors at all stages.
pub fn sample_trajectory(
    seed: SeedStream,
    horizon: &HorizonDistribution,
    stages: &[StageDistribution],
) -> Trajectory {
    let mut rng = seed.rng();
    sample_with(&mut rng, horizon, stages)
}

pub fn sample_with<R: Rng>(
    rng: &mut R,
    horizon: &HorizonDistribution,
    stages: &[StageDistribution],
) -> Trajectory {
    let t_max = horizon.t_max();
    debug_assert_eq!(stages.len(), t_max, "one stage distribution per stage");
    debug_assert_eq!(stages[0].len(), 1, "stage 1 noise is deterministic");

    let mut xi = Vec::with_capacity(t_max);
    let mut xi_index = Vec::with_capacity(t_max);
    let mut alive = Vec::with_capacity(t_max);
    let mut death = None;

    xi.push(stages[0].support[0].clone());
    xi_index.push(0);
    alive.push(true);
    for t in 2..=t_max {
        let dist = &stages[t - 1];
        let j = dist.index_for(rng.random::<f64>());
        xi.push(dist.support[j].clone());
        xi_index.push(j);

        let u: f64 = rng.random();
        let prev_alive = alive[t - 2];
        let now_alive = prev_alive && u >= horizon.q(t);
        if prev_alive && !now_alive {
            death = Some(t);
        }
        alive.push(now_alive);
    }
    Trajectory {
        xi,
        xi_index,
        alive,
        horizon: death.expect("q_{t_max} = 1 forces death by t_max"),
    }
}

/// Serialized form of a horizon plus stage distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub t_max: usize,
    pub p: Vec<f64>,
    pub stages: Vec<StageDistribution>,
}

impl ScenarioDoc {
    pub fn new(horizon: &HorizonDistribution, stages: &[StageDistribution]) -> Self {
        Self {
            t_max: horizon.t_max(),
            p: horizon.pmf().to_vec(),
            stages: stages.to_vec(),
        }
    }

    pub fn into_parts(self) -> Result<(HorizonDistribution, Vec<StageDistribution>), ScenarioError> {
        if self.p.len() + 1 != self.t_max {
            return Err(ScenarioError::InvalidParameter(format!(
                "pmf has {} entries but t_max = {}",
                self.p.len(),
                self.t_max
            )));
        }
        if self.stages.len() != self.t_max {
            return Err(ScenarioError::InvalidParameter(format!(
                "{} stage distributions for t_max = {}",
                self.stages.len(),
                self.t_max
            )));
        }
        for s in &self.stages {
            s.validate()?;
        }
        let horizon = HorizonDistribution::from_pmf(self.p)?;
        Ok((horizon, self.stages))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point_stages(t_max: usize) -> Vec<StageDistribution> {
        let mut stages = vec![StageDistribution::deterministic(vec![1.0])];
        for _ in 2..=t_max {
            stages.push(StageDistribution::new(vec![vec![0.0], vec![1.0]], vec![0.3, 0.7]).unwrap());
        }
        stages
    }

    #[test]
    fn uniform_pmf_gives_expected_q() {
        let q = derive_transition_probs(&[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!((q[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((q[1] - 0.5).abs() < 1e-15);
        assert_eq!(q[2], 1.0);
    }

    #[test]
    fn degenerate_pmf_gives_zero_interior_q() {
        let q = derive_transition_probs(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(q, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn q2_equals_p2() {
        let p = [0.2, 0.05, 0.0, 0.25, 0.5];
        let q = derive_transition_probs(&p).unwrap();
        assert_eq!(q[0], p[0]);
        assert_eq!(q[2], 0.0);
        assert_eq!(*q.last().unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_pmf() {
        assert!(matches!(
            derive_transition_probs(&[0.5, 0.6]),
            Err(ScenarioError::InvalidParameter(_))
        ));
        assert!(derive_transition_probs(&[-0.1, 1.1]).is_err());
        assert!(derive_transition_probs(&[]).is_err());
    }

    #[test]
    fn truncated_exponential_parameters() {
        assert!(truncated_exponential_horizon(0.0, 10).is_err());
        assert!(truncated_exponential_horizon(-1.0, 10).is_err());
        assert!(truncated_exponential_horizon(0.15, 1).is_err());
        let h = truncated_exponential_horizon(0.15, 2).unwrap();
        assert_eq!(h.pmf(), &[1.0]);
        assert_eq!(h.q(2), 1.0);
    }

    #[test]
    fn truncated_exponential_ratio() {
        let lambda = 0.15;
        let h = truncated_exponential_horizon(lambda, 10).unwrap();
        let total: f64 = h.pmf().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for t in 2..9 {
            let ratio = h.p(t) / h.p(t + 1);
            assert!((ratio - lambda.exp()).abs() < 1e-12, "t={t} ratio={ratio}");
        }
    }

    #[test]
    fn fixed_horizon_always_dies_at_t_max() {
        let h = HorizonDistribution::fixed(5).unwrap();
        let stages = two_point_stages(5);
        for s in 0..50 {
            let tr = sample_trajectory(SeedStream::new(9, s), &h, &stages);
            assert_eq!(tr.horizon, 5);
            assert_eq!(tr.alive, vec![true, true, true, true, false]);
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let h = truncated_exponential_horizon(0.3, 6).unwrap();
        let stages = two_point_stages(6);
        let a = sample_trajectory(SeedStream::new(1, 7), &h, &stages);
        let b = sample_trajectory(SeedStream::new(1, 7), &h, &stages);
        assert_eq!(a, b);
    }

    #[test]
    fn index_for_skips_zero_mass_tail() {
        let d = StageDistribution::new(vec![vec![1.0], vec![2.0], vec![3.0]], vec![0.5, 0.5, 0.0])
            .unwrap();
        assert_eq!(d.index_for(0.2), 0);
        assert_eq!(d.index_for(0.7), 1);
        assert_eq!(d.index_for(1.0 - 1e-18), 1);
    }

    #[test]
    fn stage_distribution_validation() {
        assert!(StageDistribution::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0.5, 0.5]).is_err());
        assert!(StageDistribution::new(vec![vec![1.0]], vec![0.9]).is_err());
        assert!(StageDistribution::new(vec![vec![1.0]], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn scenario_doc_json_shape() {
        let h = HorizonDistribution::from_pmf(vec![0.25, 0.75]).unwrap();
        let stages = two_point_stages(3);
        let doc = ScenarioDoc::new(&h, &stages);
        let v = serde_json::to_value(&doc).unwrap();
        assert_eq!(v["t_max"], 3);
        assert_eq!(v["p"].as_array().unwrap().len(), 2);
        assert!(v["stages"][1]["support"].is_array());
        let (h2, s2) = serde_json::from_value::<ScenarioDoc>(v).unwrap().into_parts().unwrap();
        assert_eq!(h2, h);
        assert_eq!(s2, stages);
    }
}
