//! Polyhedral lower models of stage cost-to-go functions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CutError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite cut coefficient")]
    NonFinite,
}

/// The affine function `x -> theta + beta . x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub theta: f64,
    pub beta: Vec<f64>,
}

impl Cut {
    pub fn new(theta: f64, beta: Vec<f64>) -> Self {
        Self { theta, beta }
    }

    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.theta + crate::lp::dot(&self.beta, x)
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.beta.iter().all(|b| b.is_finite())
    }
}

/// Append-only collection of cuts for one stage. Its value at `x` is the
/// largest cut value there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutPool {
    stage: usize,
    cuts: Vec<Cut>,
}

impl CutPool {
    /// Pool seeded with a known lower-bounding cut.
    pub fn new(stage: usize, initial: Cut) -> Self {
        Self {
            stage,
            cuts: vec![initial],
        }
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.cuts.first().map_or(0, Cut::dim)
    }

    pub fn push(&mut self, cut: Cut) -> Result<(), CutError> {
        if !cut.is_finite() {
            return Err(CutError::NonFinite);
        }
        if !self.cuts.is_empty() && cut.dim() != self.dim() {
            return Err(CutError::DimensionMismatch(format!(
                "cut has dimension {}, pool has {}",
                cut.dim(),
                self.dim()
            )));
        }
        self.cuts.push(cut);
        Ok(())
    }

    /// `max_j theta_j + beta_j . x`; negative infinity on an empty pool.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.cuts
            .iter()
            .map(|c| c.value_at(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of a cut attaining the maximum at `x` (lowest index on ties).
    pub fn active_cut(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in self.cuts.iter().enumerate() {
            let v = c.value_at(x);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        best.map(|(j, _)| j)
    }
}

/// Combines per-realization continue/stop values and subgradients at a trial
/// state into one cut:
///
/// ```text
/// theta = (1-q) sum_j p_j (cont_j - beta_j . x) + q sum_j p_j (stop_j - gamma_j . x)
/// beta  = (1-q) sum_j p_j beta_j                + q sum_j p_j gamma_j
/// ```
pub fn assemble_cut(
    q: f64,
    probs: &[f64],
    continue_vals: &[f64],
    continue_grads: &[Vec<f64>],
    stop_vals: &[f64],
    stop_grads: &[Vec<f64>],
    anchor: &[f64],
) -> Result<Cut, CutError> {
    let m = probs.len();
    if continue_vals.len() != m
        || continue_grads.len() != m
        || stop_vals.len() != m
        || stop_grads.len() != m
    {
        return Err(CutError::DimensionMismatch(format!(
            "expected {m} realizations in every input"
        )));
    }
    let n = anchor.len();
    if let Some(g) = continue_grads.iter().chain(stop_grads).find(|g| g.len() != n) {
        return Err(CutError::DimensionMismatch(format!(
            "subgradient has dimension {}, state has {n}",
            g.len()
        )));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(CutError::DimensionMismatch(format!(
            "branch weight {q} outside [0, 1]"
        )));
    }

    let mut theta_cont = 0.0;
    let mut theta_stop = 0.0;
    let mut beta_cont = vec![0.0; n];
    let mut beta_stop = vec![0.0; n];
    for j in 0..m {
        let p = probs[j];
        theta_cont += p * (continue_vals[j] - crate::lp::dot(&continue_grads[j], anchor));
        theta_stop += p * (stop_vals[j] - crate::lp::dot(&stop_grads[j], anchor));
        for i in 0..n {
            beta_cont[i] += p * continue_grads[j][i];
            beta_stop[i] += p * stop_grads[j][i];
        }
    }
    let theta = (1.0 - q) * theta_cont + q * theta_stop;
    let beta = beta_cont
        .iter()
        .zip(&beta_stop)
        .map(|(c, s)| (1.0 - q) * c + q * s)
        .collect();
    let cut = Cut::new(theta, beta);
    if !cut.is_finite() {
        return Err(CutError::NonFinite);
    }
    Ok(cut)
}

/// A trained policy: one pool per stage `2..=t_max`, in stage order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub label: String,
    pub pools: Vec<CutPool>,
}

impl Policy {
    /// Pool for stage `t`, if present.
    pub fn pool(&self, t: usize) -> Option<&CutPool> {
        self.pools.iter().find(|p| p.stage == t)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}
