//! Bounded-variable revised simplex.
//!
//! Problems are stated as
//!
//! ```text
//! minimize    c . x
//! subject to  A_eq x  = b_eq
//!             A_ub x <= b_ub
//!             lower <= x <= upper
//! ```
//!
//! and solved with a two-phase primal simplex over an explicit dense basis
//! inverse. Row duals are returned as sensitivities of the optimal value to
//! the right-hand side, so inequality duals are nonpositive at optimality.
//! Every optimal answer carries a primal/dual certificate.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::cuts::CutPool;

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-8;
/// Reduced-cost optimality tolerance.
pub const OPT_TOL: f64 = 1e-9;
/// Relative strong-duality tolerance.
pub const GAP_TOL: f64 = 1e-7;

const PIVOT_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
const BLAND_AFTER: usize = 50;
const REFACTOR_EVERY: usize = 48;
/// Most violated cuts added per round of lazy row generation.
const CUTS_PER_ROUND: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub c: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    /// Problem with objective `c`, no rows, and `x >= 0`.
    pub fn new(c: Vec<f64>) -> Self {
        let n = c.len();
        Self {
            c,
            a_eq: Vec::new(),
            b_eq: Vec::new(),
            a_ub: Vec::new(),
            b_ub: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.a_eq.push(row);
        self.b_eq.push(rhs);
        self
    }

    pub fn add_ub(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.a_ub.push(row);
        self.b_ub.push(rhs);
        self
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[j] = lower;
        self.upper[j] = upper;
        self
    }

    /// Appends a variable with the given cost and bounds, padding every row
    /// with a zero coefficient. Returns its index.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.c.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        for row in self.a_eq.iter_mut().chain(self.a_ub.iter_mut()) {
            row.push(0.0);
        }
        self.c.len() - 1
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        dot(&self.c, x)
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.c.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed("bound vectors do not match c".into()));
        }
        if self.a_eq.len() != self.b_eq.len() || self.a_ub.len() != self.b_ub.len() {
            return Err(LpError::Malformed("row count does not match rhs".into()));
        }
        if let Some(r) = self.a_eq.iter().chain(&self.a_ub).find(|r| r.len() != n) {
            return Err(LpError::Malformed(format!(
                "row has {} coefficients, expected {n}",
                r.len()
            )));
        }
        let finite = self
            .c
            .iter()
            .chain(self.b_eq.iter())
            .chain(self.b_ub.iter())
            .chain(self.a_eq.iter().flatten())
            .chain(self.a_ub.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(LpError::Malformed("non-finite data".into()));
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY || l > u {
                return Err(LpError::Malformed(format!("bad bounds [{l}, {u}] on x{j}")));
            }
        }
        Ok(())
    }

    /// Plain-text dump in CPLEX LP style, for cross-checking with other
    /// solvers.
    pub fn to_lp_format(&self) -> String {
        fn term_list(row: &[f64]) -> String {
            let mut s = String::new();
            for (j, &v) in row.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let sign = if v < 0.0 { "-" } else { "+" };
                let _ = write!(s, " {sign} {:.17e} x{j}", v.abs());
            }
            if s.is_empty() {
                s.push_str(" 0 x0");
            }
            s
        }
        let mut out = String::from("Minimize\n obj:");
        out.push_str(&term_list(&self.c));
        out.push_str("\nSubject To\n");
        for (i, (row, b)) in self.a_eq.iter().zip(&self.b_eq).enumerate() {
            let _ = writeln!(out, " e{i}:{} = {b:.17e}", term_list(row));
        }
        for (i, (row, b)) in self.a_ub.iter().zip(&self.b_ub).enumerate() {
            let _ = writeln!(out, " u{i}:{} <= {b:.17e}", term_list(row));
        }
        out.push_str("Bounds\n");
        for j in 0..self.c.len() {
            let (l, u) = (self.lower[j], self.upper[j]);
            match (l.is_finite(), u.is_finite()) {
                (false, false) => {
                    let _ = writeln!(out, " x{j} free");
                }
                (true, false) => {
                    let _ = writeln!(out, " x{j} >= {l:.17e}");
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= x{j} <= {u:.17e}");
                }
                (true, true) => {
                    let _ = writeln!(out, " {l:.17e} <= x{j} <= {u:.17e}");
                }
            }
        }
        out.push_str("End\n");
        out
    }
}

/// Optimality evidence: scaled primal infeasibility, scaled dual
/// infeasibility, and the absolute primal/dual objective gap.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Certificate {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub dual_objective: f64,
}

impl Certificate {
    pub fn relative_gap(&self, objective: f64) -> f64 {
        self.duality_gap / (1.0 + objective.abs())
    }

    pub fn holds(&self, objective: f64) -> bool {
        self.primal_residual <= FEAS_TOL
            && self.dual_residual <= FEAS_TOL
            && self.relative_gap(objective) <= GAP_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub duals_eq: Vec<f64>,
    pub duals_ub: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub certificate: Option<Certificate>,
    pub pivots: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn without_answer(status: LpStatus, n: usize, m_eq: usize, m_ub: usize, pivots: usize) -> Self {
        Self {
            status,
            x: vec![0.0; n],
            objective: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            duals_eq: vec![0.0; m_eq],
            duals_ub: vec![0.0; m_ub],
            reduced_costs: vec![0.0; n],
            certificate: None,
            pivots,
        }
    }
}

/// Solves `problem` to optimality, or reports infeasibility/unboundedness.
pub fn solve(problem: &LpProblem) -> Result<LpSolution, LpError> {
    problem.validate()?;
    let mut simplex = Simplex::new(problem);
    let status = simplex.run()?;
    let m_eq = problem.a_eq.len();
    let m_ub = problem.a_ub.len();
    let n = problem.num_vars();
    if status != LpStatus::Optimal {
        return Ok(LpSolution::without_answer(status, n, m_eq, m_ub, simplex.pivots));
    }
    let x: Vec<f64> = simplex.x[..n].to_vec();
    let y = simplex.duals();
    let duals_eq = y[..m_eq].to_vec();
    let duals_ub = y[m_eq..].to_vec();
    let reduced_costs = reduced_costs(problem, &duals_eq, &duals_ub);
    let objective = problem.objective_at(&x);
    let certificate = certify(problem, &x, &duals_eq, &duals_ub);
    debug_assert!(
        certificate.holds(objective),
        "LP certificate failed: {certificate:?} (objective {objective})"
    );
    Ok(LpSolution {
        status,
        x,
        objective,
        duals_eq,
        duals_ub,
        reduced_costs,
        certificate: Some(certificate),
        pivots: simplex.pivots,
    })
}

fn reduced_costs(problem: &LpProblem, y_eq: &[f64], y_ub: &[f64]) -> Vec<f64> {
    let mut d = problem.c.clone();
    for (row, &yi) in problem.a_eq.iter().zip(y_eq).chain(problem.a_ub.iter().zip(y_ub)) {
        if yi == 0.0 {
            continue;
        }
        for (dj, &a) in d.iter_mut().zip(row) {
            *dj -= yi * a;
        }
    }
    d
}

/// Checks `(x, y)` against the primal and dual of `problem`.
pub fn certify(problem: &LpProblem, x: &[f64], y_eq: &[f64], y_ub: &[f64]) -> Certificate {
    let mut primal = 0.0_f64;
    for (row, &b) in problem.a_eq.iter().zip(&problem.b_eq) {
        primal = primal.max((dot(row, x) - b).abs() / (1.0 + b.abs()));
    }
    for (row, &b) in problem.a_ub.iter().zip(&problem.b_ub) {
        primal = primal.max((dot(row, x) - b).max(0.0) / (1.0 + b.abs()));
    }
    for j in 0..x.len() {
        let (l, u) = (problem.lower[j], problem.upper[j]);
        if l.is_finite() {
            primal = primal.max((l - x[j]).max(0.0) / (1.0 + l.abs()));
        }
        if u.is_finite() {
            primal = primal.max((x[j] - u).max(0.0) / (1.0 + u.abs()));
        }
    }

    let d = reduced_costs(problem, y_eq, y_ub);
    let mut dual = y_ub.iter().fold(0.0_f64, |acc, &v| acc.max(v));
    let mut dual_obj = dot(&problem.b_eq, y_eq) + dot(&problem.b_ub, y_ub);
    for (j, &dj) in d.iter().enumerate() {
        let (l, u) = (problem.lower[j], problem.upper[j]);
        let scale = 1.0 + problem.c[j].abs();
        if dj > 0.0 {
            if l.is_finite() {
                dual_obj += dj * l;
            } else {
                dual = dual.max(dj / scale);
            }
        } else if dj < 0.0 {
            if u.is_finite() {
                dual_obj += dj * u;
            } else {
                dual = dual.max(-dj / scale);
            }
        }
    }
    Certificate {
        primal_residual: primal,
        dual_residual: dual,
        duality_gap: (problem.objective_at(x) - dual_obj).abs(),
        dual_objective: dual_obj,
    }
}

/// Solves `min c.x + phi` subject to the base rows and `phi >= theta_j +
/// beta_j . x[state_cols]` for every cut in `pool`.
///
/// Cut rows are generated lazily: the LP is solved over a growing subset of
/// cuts until no omitted cut is violated, so the answer is optimal for the
/// full epigraph problem. The epigraph variable is appended as the last
/// entry of `x`, and `duals_ub` lists the base inequality duals followed by
/// one dual per cut in pool order (zero for cuts never added).
pub fn solve_with_cuts(
    problem: &LpProblem,
    pool: &CutPool,
    state_cols: &[usize],
) -> Result<LpSolution, LpError> {
    check_cut_args(problem, pool, state_cols)?;
    let cuts = pool.cuts();
    let nvar = problem.num_vars();
    let m_ub = problem.a_ub.len();

    let mut active: Vec<usize> = vec![cuts.len() - 1];
    let mut in_active = vec![false; cuts.len()];
    in_active[cuts.len() - 1] = true;

    loop {
        let lp = with_cut_rows(problem, pool, state_cols, &active);
        let sol = solve(&lp)?;
        if !sol.is_optimal() {
            return Ok(expand_cut_solution(sol, &active, cuts.len(), m_ub, None));
        }
        let phi = sol.x[nvar];
        let state: Vec<f64> = state_cols.iter().map(|&c| sol.x[c]).collect();
        let tol = OPT_TOL * (1.0 + phi.abs());
        let mut violated: Vec<(usize, f64)> = cuts
            .iter()
            .enumerate()
            .filter(|(j, _)| !in_active[*j])
            .map(|(j, cut)| (j, cut.value_at(&state) - phi))
            .filter(|&(_, v)| v > tol)
            .collect();
        if violated.is_empty() {
            let slack_violation = cuts
                .iter()
                .map(|cut| (cut.value_at(&state) - phi).max(0.0) / (1.0 + cut.theta.abs()))
                .fold(0.0_f64, f64::max);
            return Ok(expand_cut_solution(sol, &active, cuts.len(), m_ub, Some(slack_violation)));
        }
        violated.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for &(j, _) in violated.iter().take(CUTS_PER_ROUND) {
            in_active[j] = true;
            active.push(j);
        }
    }
}

/// Same answer as [`solve_with_cuts`], with every cut row present from the
/// start.
pub fn solve_with_cuts_eager(
    problem: &LpProblem,
    pool: &CutPool,
    state_cols: &[usize],
) -> Result<LpSolution, LpError> {
    check_cut_args(problem, pool, state_cols)?;
    let all: Vec<usize> = (0..pool.len()).collect();
    let lp = with_cut_rows(problem, pool, state_cols, &all);
    solve(&lp)
}

/// The explicit epigraph LP over the listed cuts.
pub fn with_cut_rows(
    problem: &LpProblem,
    pool: &CutPool,
    state_cols: &[usize],
    which: &[usize],
) -> LpProblem {
    let mut lp = problem.clone();
    let phi = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
    for &j in which {
        let cut = &pool.cuts()[j];
        let mut row = vec![0.0; lp.num_vars()];
        for (&col, &b) in state_cols.iter().zip(&cut.beta) {
            row[col] += b;
        }
        row[phi] = -1.0;
        lp.add_ub(row, -cut.theta);
    }
    lp
}

fn check_cut_args(problem: &LpProblem, pool: &CutPool, state_cols: &[usize]) -> Result<(), LpError> {
    if pool.is_empty() {
        return Err(LpError::Malformed("cut pool is empty".into()));
    }
    if let Some(&c) = state_cols.iter().find(|&&c| c >= problem.num_vars()) {
        return Err(LpError::Malformed(format!("state column {c} out of range")));
    }
    if pool.cuts().iter().any(|cut| cut.beta.len() != state_cols.len()) {
        return Err(LpError::Malformed(
            "cut dimension does not match state columns".into(),
        ));
    }
    Ok(())
}

fn expand_cut_solution(
    mut sol: LpSolution,
    active: &[usize],
    n_cuts: usize,
    m_ub: usize,
    slack_violation: Option<f64>,
) -> LpSolution {
    let mut duals = sol.duals_ub[..m_ub].to_vec();
    let mut cut_duals = vec![0.0; n_cuts];
    for (k, &j) in active.iter().enumerate() {
        cut_duals[j] = sol.duals_ub[m_ub + k];
    }
    duals.extend(cut_duals);
    sol.duals_ub = duals;
    if let (Some(cert), Some(v)) = (sol.certificate.as_mut(), slack_violation) {
        cert.primal_residual = cert.primal_residual.max(v);
    }
    sol
}

/// Multipliers `mu_j = -dual_j >= 0` of the cut rows in a solution returned by
/// [`solve_with_cuts`]; they sum to one at optimality.
pub fn cut_multipliers(sol: &LpSolution, base_ub_rows: usize) -> Vec<f64> {
    sol.duals_ub[base_ub_rows..].iter().map(|&v| 0.0 - v).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Free nonbasic variable held at zero.
    Zero,
}

struct Simplex {
    m: usize,
    /// Sparse columns: structural, then one slack per inequality row, then
    /// artificials.
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    b: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    /// Row-major `m x m` basis inverse.
    binv: Vec<f64>,
    since_refactor: usize,
    pivots: usize,
    max_pivots: usize,
    first_artificial: usize,
}

impl Simplex {
    fn new(p: &LpProblem) -> Self {
        let n = p.num_vars();
        let m_eq = p.a_eq.len();
        let m = m_eq + p.a_ub.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in p.a_eq.iter().chain(&p.a_ub).enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    cols[j].push((i, v));
                }
            }
        }
        let mut cost = p.c.clone();
        let mut lower = p.lower.clone();
        let mut upper = p.upper.clone();
        for i in m_eq..m {
            cols.push(vec![(i, 1.0)]);
            cost.push(0.0);
            lower.push(0.0);
            upper.push(f64::INFINITY);
        }
        let b: Vec<f64> = p.b_eq.iter().chain(&p.b_ub).copied().collect();

        let total = cols.len();
        let mut x = vec![0.0; total];
        let mut state = vec![VarState::AtLower; total];
        for j in 0..n {
            let (l, u) = (lower[j], upper[j]);
            if l.is_finite() {
                x[j] = l;
            } else if u.is_finite() {
                x[j] = u;
                state[j] = VarState::AtUpper;
            } else {
                state[j] = VarState::Zero;
            }
        }

        let mut resid = b.clone();
        for j in 0..n {
            if x[j] != 0.0 {
                for &(i, v) in &cols[j] {
                    resid[i] -= v * x[j];
                }
            }
        }

        let first_artificial = total;
        let mut basis = vec![usize::MAX; m];
        for i in 0..m {
            if i >= m_eq && resid[i] >= 0.0 {
                let s = n + (i - m_eq);
                basis[i] = s;
                state[s] = VarState::Basic;
                x[s] = resid[i];
            } else {
                let sign = if resid[i] < 0.0 { -1.0 } else { 1.0 };
                cols.push(vec![(i, sign)]);
                cost.push(0.0);
                lower.push(0.0);
                upper.push(f64::INFINITY);
                x.push(resid[i].abs());
                state.push(VarState::Basic);
                basis[i] = cols.len() - 1;
            }
        }

        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            let (_, v) = cols[basis[i]][0];
            binv[i * m + i] = 1.0 / v;
        }
        let max_pivots = 50 * (m + cols.len()) + 1000;
        Self {
            m,
            cols,
            cost,
            lower,
            upper,
            b,
            x,
            state,
            basis,
            binv,
            since_refactor: 0,
            pivots: 0,
            max_pivots,
            first_artificial,
        }
    }

    fn run(&mut self) -> Result<LpStatus, LpError> {
        let n_total = self.cols.len();
        if self.first_artificial < n_total {
            let phase1: Vec<f64> = (0..n_total)
                .map(|j| if j >= self.first_artificial { 1.0 } else { 0.0 })
                .collect();
            let status = self.optimize(&phase1)?;
            debug_assert_eq!(status, LpStatus::Optimal, "phase 1 is bounded below");
            let infeasibility: f64 = (self.first_artificial..n_total).map(|j| self.x[j]).sum();
            let scale = 1.0 + self.b.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            if infeasibility > FEAS_TOL * scale {
                return Ok(LpStatus::Infeasible);
            }
            for j in self.first_artificial..n_total {
                self.upper[j] = 0.0;
                if self.state[j] != VarState::Basic {
                    self.state[j] = VarState::AtLower;
                    self.x[j] = 0.0;
                }
            }
            self.refactor()?;
        }
        let cost = self.cost.clone();
        self.optimize(&cost)
    }

    fn optimize(&mut self, cost: &[f64]) -> Result<LpStatus, LpError> {
        let mut degenerate_streak = 0usize;
        let mut verified = false;
        loop {
            if self.pivots >= self.max_pivots {
                return Err(LpError::NumericalFailure(format!(
                    "pivot limit {} reached",
                    self.max_pivots
                )));
            }
            let bland = degenerate_streak >= BLAND_AFTER;
            let y = self.btran(cost);
            let Some((q, dir)) = self.price(cost, &y, bland) else {
                if !verified && self.since_refactor > 0 {
                    self.refactor()?;
                    verified = true;
                    continue;
                }
                return Ok(LpStatus::Optimal);
            };
            verified = false;
            let alpha = self.ftran(q);
            match self.ratio_test(q, dir, &alpha, bland) {
                Step::Unbounded => return Ok(LpStatus::Unbounded),
                Step::Flip(theta) => {
                    self.apply_step(q, dir, theta, &alpha);
                    self.state[q] = if dir > 0.0 { VarState::AtUpper } else { VarState::AtLower };
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                    degenerate_streak = 0;
                }
                Step::Pivot { row, theta, to_upper } => {
                    self.apply_step(q, dir, theta, &alpha);
                    let leaving = self.basis[row];
                    self.state[leaving] = if to_upper { VarState::AtUpper } else { VarState::AtLower };
                    self.x[leaving] = if to_upper { self.upper[leaving] } else { self.lower[leaving] };
                    self.state[q] = VarState::Basic;
                    self.basis[row] = q;
                    self.update_inverse(row, &alpha);
                    self.pivots += 1;
                    self.since_refactor += 1;
                    if theta <= DEGENERATE_STEP {
                        degenerate_streak += 1;
                    } else {
                        degenerate_streak = 0;
                    }
                    if self.since_refactor >= REFACTOR_EVERY {
                        self.refactor()?;
                    }
                }
            }
        }
    }

    fn btran(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (k, &var) in self.basis.iter().enumerate() {
            let cb = cost[var];
            if cb == 0.0 {
                continue;
            }
            let row = &self.binv[k * m..(k + 1) * m];
            for (yi, &v) in y.iter_mut().zip(row) {
                *yi += cb * v;
            }
        }
        y
    }

    fn ftran(&self, q: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for (k, a) in alpha.iter_mut().enumerate() {
            let row = &self.binv[k * m..(k + 1) * m];
            *a = self.cols[q].iter().map(|&(i, v)| row[i] * v).sum();
        }
        alpha
    }

    fn reduced_cost(&self, cost: &[f64], y: &[f64], j: usize) -> f64 {
        cost[j] - self.cols[j].iter().map(|&(i, v)| y[i] * v).sum::<f64>()
    }

    /// Entering variable and direction (+1 increase, -1 decrease).
    fn price(&self, cost: &[f64], y: &[f64], bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.cols.len() {
            let dir = match self.state[j] {
                VarState::Basic => continue,
                _ if self.lower[j] == self.upper[j] => continue,
                VarState::AtLower => {
                    let d = self.reduced_cost(cost, y, j);
                    if d < -OPT_TOL { Some((1.0, -d)) } else { None }
                }
                VarState::AtUpper => {
                    let d = self.reduced_cost(cost, y, j);
                    if d > OPT_TOL { Some((-1.0, d)) } else { None }
                }
                VarState::Zero => {
                    let d = self.reduced_cost(cost, y, j);
                    if d.abs() > OPT_TOL { Some((-d.signum(), d.abs())) } else { None }
                }
            };
            if let Some((dir, score)) = dir {
                if bland {
                    return Some((j, dir));
                }
                if best.is_none_or(|(_, _, s)| score > s) {
                    best = Some((j, dir, score));
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], bland: bool) -> Step {
        // basic i moves by rate[i] * theta
        let range = self.upper[q] - self.lower[q];
        let bound_of = |k: usize, relax: f64| -> Option<(f64, bool)> {
            let rate = -dir * alpha[k];
            let var = self.basis[k];
            if rate < -PIVOT_TOL && self.lower[var].is_finite() {
                Some((((self.x[var] - self.lower[var]) + relax) / -rate, false))
            } else if rate > PIVOT_TOL && self.upper[var].is_finite() {
                Some((((self.upper[var] - self.x[var]) + relax) / rate, true))
            } else {
                None
            }
        };

        if bland {
            let mut best: Option<(usize, f64, bool)> = None;
            for k in 0..self.m {
                if let Some((ratio, up)) = bound_of(k, 0.0) {
                    let ratio = ratio.max(0.0);
                    let better = match best {
                        None => true,
                        Some((bk, br, _)) => {
                            ratio < br - DEGENERATE_STEP
                                || (ratio <= br + DEGENERATE_STEP && self.basis[k] < self.basis[bk])
                        }
                    };
                    if better {
                        best = Some((k, ratio, up));
                    }
                }
            }
            return match best {
                Some((_, ratio, _)) if range <= ratio => Step::Flip(range),
                Some((row, theta, to_upper)) => Step::Pivot { row, theta, to_upper },
                None if range.is_finite() => Step::Flip(range),
                None => Step::Unbounded,
            };
        }

        let mut theta_max = f64::INFINITY;
        for k in 0..self.m {
            if let Some((ratio, _)) = bound_of(k, HARRIS_TOL) {
                theta_max = theta_max.min(ratio);
            }
        }
        if range <= theta_max {
            return if range.is_finite() { Step::Flip(range) } else { Step::Unbounded };
        }
        let mut best: Option<(usize, f64, bool, f64)> = None;
        for k in 0..self.m {
            if let Some((ratio, up)) = bound_of(k, 0.0) {
                if ratio <= theta_max {
                    let size = alpha[k].abs();
                    if best.is_none_or(|(_, _, _, s)| size > s) {
                        best = Some((k, ratio.max(0.0), up, size));
                    }
                }
            }
        }
        match best {
            Some((row, theta, to_upper, _)) => Step::Pivot { row, theta, to_upper },
            None => Step::Unbounded,
        }
    }

    fn apply_step(&mut self, q: usize, dir: f64, theta: f64, alpha: &[f64]) {
        if theta == 0.0 {
            return;
        }
        self.x[q] += dir * theta;
        for (k, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                let var = self.basis[k];
                self.x[var] -= dir * theta * a;
            }
        }
    }

    fn update_inverse(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        let pivot_row: Vec<f64> = self.binv[r * m..(r + 1) * m].iter().map(|v| v / piv).collect();
        for (k, &a) in alpha.iter().enumerate() {
            if k == r || a == 0.0 {
                continue;
            }
            let row = &mut self.binv[k * m..(k + 1) * m];
            for (v, &p) in row.iter_mut().zip(&pivot_row) {
                *v -= a * p;
            }
        }
        self.binv[r * m..(r + 1) * m].copy_from_slice(&pivot_row);
    }

    /// Recomputes the basis inverse and basic values from scratch.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        let mut basis_mat = DMatrix::<f64>::zeros(m, m);
        for (k, &var) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[var] {
                basis_mat[(i, k)] = v;
            }
        }
        let inv = basis_mat
            .try_inverse()
            .ok_or_else(|| LpError::NumericalFailure("singular basis".into()))?;
        for k in 0..m {
            for i in 0..m {
                self.binv[k * m + i] = inv[(k, i)];
            }
        }
        let mut rhs = self.b.clone();
        for j in 0..self.cols.len() {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                for &(i, v) in &self.cols[j] {
                    rhs[i] -= v * self.x[j];
                }
            }
        }
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            self.x[self.basis[k]] = dot(row, &rhs);
        }
        Ok(())
    }

    fn duals(&self) -> Vec<f64> {
        self.btran(&self.cost)
    }
}

enum Step {
    Unbounded,
    Flip(f64),
    Pivot { row: usize, theta: f64, to_upper: bool },
}
