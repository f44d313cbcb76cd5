use sddp_tsto::cuts::{Cut, CutPool};
use sddp_tsto::engine::{
    self, backward_pass, forward_pass, initial_pools, lower_bound, solve_stage, upper_bound, AnchorMode, CostKind,
    EngineError, LinearModel, LinearStage, RunConfig, SolveStats, StageModel, Termination,
};
use sddp_tsto::oracle::extensive_form_value;
use sddp_tsto::portfolio::tiny_instance;
use sddp_tsto::scenario::{sample_trajectory, HorizonDistribution, SeedStream, StageDistribution};

#[test]
fn student_factor_for_default_window() {
    let t = engine::student_quantile(199, 0.95).unwrap();
    assert!((t - 1.652547).abs() < 1e-5);
    let window: Vec<f64> = (0..200).map(|i| (i % 7) as f64).collect();
    let (u, sigma) = upper_bound(&window, 0.05).unwrap();
    let mean = window.iter().sum::<f64>() / 200.0;
    assert!((u - (mean + sigma / 200f64.sqrt() * t)).abs() < 1e-12);
}

/// Simpson's rule on the Student density gives an independent CDF; it must
/// put mass 0.95 below the library quantile.
#[test]
fn quantile_against_quadrature() {
    let df = 199.0_f64;
    let log_norm = statrs::function::gamma::ln_gamma((df + 1.0) / 2.0)
        - statrs::function::gamma::ln_gamma(df / 2.0)
        - 0.5 * (df * std::f64::consts::PI).ln();
    let density = |x: f64| (log_norm - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
    let upper = engine::student_quantile(199, 0.95).unwrap();
    let steps = 20_000;
    let h = upper / steps as f64;
    let mut area = density(0.0) + density(upper);
    for k in 1..steps {
        area += if k % 2 == 1 { 4.0 } else { 2.0 } * density(k as f64 * h);
    }
    let cdf = 0.5 + area * h / 3.0;
    assert!((cdf - 0.95).abs() < 1e-9, "{cdf}");
}

#[test]
fn initial_lower_bound_uses_initial_cut() {
    let (inst, _) = tiny_instance();
    let pools = initial_pools(&inst);
    let mut stats = SolveStats::default();
    let l0 = lower_bound(&inst, &pools, &mut stats).unwrap();
    let direct = solve_stage(&inst, 1, &inst.x0, &inst.returns[0].support[0], CostKind::Running, Some(&pools[0]), None)
        .unwrap();
    assert_eq!(l0, direct.value);
    assert_eq!(stats.solves, 1);
}

/// Each new cut touches the one-step Bellman operator at its anchor: the
/// branch problems are re-solved here against the final pools.
#[test]
fn new_cuts_are_tight_at_their_anchor() {
    let (inst, horizon) = tiny_instance();
    let mut pools = initial_pools(&inst);
    let mut stats = SolveStats::default();
    for k in 1..=6 {
        let traj = sample_trajectory(SeedStream::new(3, k), &horizon, &inst.returns);
        let fwd = forward_pass(&inst, &pools, &traj, AnchorMode::RunningObjective, &mut stats).unwrap();
        let cuts = backward_pass(&inst, &mut pools, &fwd.states, &horizon, false, &mut stats).unwrap();
        for (idx, cut) in cuts.iter().enumerate() {
            let t = idx + 2;
            let anchor = &fwd.states[t - 1];
            let q = horizon.q(t);
            let future = if t < inst.t_max { Some(&pools[t - 1]) } else { None };
            let dist = &inst.returns[t - 1];
            let mut bellman = 0.0;
            for (xi, &p) in dist.support.iter().zip(&dist.probs) {
                let cont = solve_stage(&inst, t, anchor, xi, CostKind::Running, future, None).unwrap().value;
                let stop = solve_stage(&inst, t, anchor, xi, CostKind::Terminal, None, None).unwrap().value;
                bellman += p * ((1.0 - q) * cont + q * stop);
            }
            assert!((cut.value_at(anchor) - bellman).abs() < 1e-9, "stage {t}");
        }
    }
}

#[test]
fn run_converges_on_tiny_instance() {
    let (inst, horizon) = tiny_instance();
    let reference = extensive_form_value(&inst, &horizon).unwrap();
    let cfg = RunConfig {
        n_window: 20,
        max_iters: 300,
        seed: 8,
        ..RunConfig::default()
    };
    let res = engine::run(&inst, &horizon, &cfg).unwrap();
    assert!((res.final_lower() - reference).abs() < 1e-6);
    let lowers: Vec<f64> = res.history.iter().map(|r| r.lower).collect();
    assert!(lowers.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!(res.lp_stats.all_certified());
}

#[test]
fn loose_tolerance_stops_at_first_full_window() {
    let (inst, horizon) = tiny_instance();
    let cfg = RunConfig {
        n_window: 10,
        tol: 0.9,
        max_iters: 100,
        ..RunConfig::default()
    };
    let res = engine::run(&inst, &horizon, &cfg).unwrap();
    assert_eq!(res.termination, Termination::Converged);
    assert_eq!(res.iterations(), 10);
    assert!(res.history[..9].iter().all(|r| r.upper.is_none()));
}

#[test]
fn thread_count_does_not_change_the_answer() {
    let (inst, horizon) = tiny_instance();
    let cfg = RunConfig {
        n_window: 10,
        max_iters: 30,
        tol: 1e-9,
        ..RunConfig::default()
    };
    let a = engine::run(&inst, &horizon, &cfg).unwrap();
    let b = engine::run(&inst, &horizon, &RunConfig { threads: 3, ..cfg.clone() }).unwrap();
    assert_eq!(a.policy, b.policy);
    assert_eq!(a.history, b.history);
}

#[test]
fn invalid_configuration_rejected() {
    let (inst, horizon) = tiny_instance();
    for cfg in [
        RunConfig { alpha: 0.0, ..RunConfig::default() },
        RunConfig { threads: 0, ..RunConfig::default() },
        RunConfig { max_iters: 0, ..RunConfig::default() },
    ] {
        assert!(matches!(engine::run(&inst, &horizon, &cfg), Err(EngineError::InvalidParameter(_))));
    }
    let wrong = HorizonDistribution::from_pmf(vec![0.5, 0.25, 0.25]).unwrap();
    assert!(engine::run(&inst, &wrong, &RunConfig::default()).is_err());
}

/// One state variable: stock `s_t = s_{t-1} + order - demand`, order cost 1,
/// holding cost 0.1, and a terminal salvage price of 0.5 per unit with
/// backlog forbidden. Stage 2 demand is 0 or 2, stage 3 demand is 1.
fn inventory(recourse: bool) -> LinearModel {
    let stage = |demand_base: f64, order_upper: f64| LinearStage {
        a_eq: vec![vec![1.0, -1.0]],
        coupling_eq: vec![vec![-1.0]],
        rhs_eq: vec![-demand_base],
        a_ub: vec![],
        coupling_ub: vec![],
        rhs_ub: vec![],
        lower: vec![0.0, 0.0],
        upper: vec![f64::INFINITY, order_upper],
        running_cost: vec![0.1, 1.0],
        terminal_cost: vec![-0.5, 1.0],
        state_cols: vec![0],
    };
    let cap = if recourse { f64::INFINITY } else { 0.0 };
    LinearModel {
        stages: vec![stage(0.0, f64::INFINITY), stage(0.0, cap), stage(0.0, cap)],
        noise: vec![
            StageDistribution::deterministic(vec![0.0]),
            StageDistribution::uniform(vec![vec![0.0], vec![-2.0]]).unwrap(),
            StageDistribution::deterministic(vec![-1.0]),
        ],
        x0: vec![0.0],
        initial_cuts: vec![Cut::new(-10.0, vec![0.0]), Cut::new(-10.0, vec![0.0])],
    }
}

#[test]
fn linear_model_matches_extensive_form() {
    let model = inventory(true);
    let horizon = HorizonDistribution::from_pmf(vec![0.3, 0.7]).unwrap();
    let reference = extensive_form_value(&model, &horizon).unwrap();
    let cfg = RunConfig {
        n_window: 10,
        max_iters: 60,
        tol: 1e-12,
        ..RunConfig::default()
    };
    let res = engine::run(&model, &horizon, &cfg).unwrap();
    assert!((res.final_lower() - reference).abs() < 1e-8, "{} vs {reference}", res.final_lower());
}

#[test]
fn missing_recourse_is_reported_with_location() {
    let model = inventory(false);
    let horizon = HorizonDistribution::from_pmf(vec![0.3, 0.7]).unwrap();
    let pools: Vec<CutPool> = (2..=3).map(|t| CutPool::new(t, model.initial_cut(t))).collect();
    let err = (1..=20)
        .find_map(|k| {
            let traj = sample_trajectory(SeedStream::new(1, k), &horizon, &model.noise);
            forward_pass(&model, &pools, &traj, AnchorMode::RunningObjective, &mut SolveStats::default()).err()
        })
        .expect("some trajectory has unmet demand");
    match err {
        EngineError::SubproblemInfeasible { stage, .. } => assert!(stage >= 2),
        other => panic!("unexpected error {other:?}"),
    }
}
