use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sddp_tsto::engine::{solve_stage, CostKind, StageModel};
use sddp_tsto::lp::solve;
use sddp_tsto::portfolio::{
    cut_coeffs_from_duals, generate_instance, mean_return, tiny_instance, GeneratorParams, PortfolioInstance,
    RETURN_SD,
};

fn two_assets(seed: u64) -> PortfolioInstance {
    generate_instance(&GeneratorParams {
        n: 2,
        t_max: 3,
        m_realizations: 3,
        cost: 0.02,
        seed,
        ..GeneratorParams::default()
    })
    .unwrap()
    .0
}

/// With no position limits every unit of each holding independently either
/// stays put or moves into one other asset through cash, so the terminal
/// value splits into per-holding maxima over those routes.
fn terminal_value_by_routes(inst: &PortfolioInstance, t: usize, x_prev: &[f64], xi: &[f64]) -> f64 {
    let n = inst.n;
    let m = &inst.mean_next[t - 1];
    let eta = &inst.eta[t - 1];
    let nu = &inst.nu[t - 1];
    let per_cash = (0..n).map(|k| m[k] / (1.0 + nu[k])).fold(m[n], f64::max);
    let mut best = xi[n] * x_prev[n] * per_cash;
    for i in 0..n {
        let per_unit = m[i].max((1.0 - eta[i]) * per_cash);
        best += xi[i] * x_prev[i] * per_unit;
    }
    -best
}

#[test]
fn terminal_value_matches_route_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 1..=5 {
        let inst = two_assets(seed);
        for t in 1..=inst.t_max {
            for xi in &inst.returns[t - 1].support {
                let x_prev: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..500.0)).collect();
                let lp = inst.build_stage_lp(t, &x_prev, xi, CostKind::Terminal);
                let v = solve(&lp.problem).unwrap().objective;
                let expected = terminal_value_by_routes(&inst, t, &x_prev, xi);
                assert!((v - expected).abs() < 1e-9 * (1.0 + expected.abs()), "{v} vs {expected}");
            }
        }
    }
}

/// Starting from cash only, the best single-asset corner is optimal.
#[test]
fn cash_start_goes_to_best_net_asset() {
    let inst = two_assets(11);
    let xi = inst.returns[1].support[0].clone();
    let x_prev = [0.0, 0.0, 100.0];
    let lp = inst.build_stage_lp(2, &x_prev, &xi, CostKind::Terminal);
    let s = solve(&lp.problem).unwrap();
    let m = &inst.mean_next[1];
    let cash = xi[2] * 100.0;
    let corners = [cash / (1.0 + inst.nu[1][0]) * m[0], cash / (1.0 + inst.nu[1][1]) * m[1], cash * m[2]];
    let best = corners.iter().copied().fold(f64::MIN, f64::max);
    assert!((s.objective + best).abs() < 1e-9);
    let d = inst.decision_of(&s.x);
    let held = d.x.iter().filter(|&&v| v > 1e-9).count();
    assert_eq!(held, 1);
}

#[test]
fn frictionless_round_trip_is_value_neutral() {
    let (mut inst, _) = tiny_instance();
    inst.eta = vec![vec![0.0; 2]; 3];
    inst.nu = vec![vec![0.0; 2]; 3];
    inst.u = vec![1.0, 1.0];
    let xi = inst.returns[0].support[0].clone();
    let x_prev = [10.0, 0.0, 0.0];
    let held = xi[0] * 10.0;
    let value_with_asset1_trades = |sold: f64, bought: f64| {
        let mut lp = inst.build_stage_lp(1, &x_prev, &xi, CostKind::Terminal);
        lp.problem.set_bounds(3, sold, sold);
        lp.problem.set_bounds(5, bought, bought);
        solve(&lp.problem).unwrap().objective
    };
    let untouched = value_with_asset1_trades(0.0, 0.0);
    let round_trip = value_with_asset1_trades(held, held);
    assert!((untouched - round_trip).abs() < 1e-9);
}

/// Central differences in each holding match the structured subgradient
/// wherever the one-sided slopes agree.
#[test]
fn subgradient_matches_finite_differences() {
    let (inst, _) = tiny_instance();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let h = 1e-4;
    let mut checked = 0;
    for _ in 0..60 {
        let t = rng.random_range(1..=inst.t_max);
        let dist = &inst.returns[t - 1];
        let xi = dist.support[rng.random_range(0..dist.len())].clone();
        let kind = if rng.random_bool(0.5) { CostKind::Terminal } else { CostKind::Running };
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..10.0)).collect();
        let value = |x: &[f64]| solve_stage(&inst, t, x, &xi, kind, None, None).unwrap().value;
        let s = solve_stage(&inst, t, &x, &xi, kind, None, None).unwrap();
        let g = cut_coeffs_from_duals(&inst, &xi, &s.solution.duals_eq, s.base_duals_ub()).unwrap();
        let v0 = s.value;
        for i in 0..3 {
            let mut up = x.clone();
            up[i] += h;
            let mut down = x.clone();
            down[i] -= h;
            let right = (value(&up) - v0) / h;
            let left = (v0 - value(&down)) / h;
            if (right - left).abs() > 1e-7 * (1.0 + right.abs()) {
                continue;
            }
            let central = 0.5 * (right + left);
            assert!((central - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()), "t {t} i {i}: {central} vs {}", g[i]);
            checked += 1;
        }
    }
    assert!(checked > 100, "only {checked} smooth directions");
}

#[test]
fn structured_and_generic_subgradients_agree() {
    let (inst, _) = tiny_instance();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..100 {
        let t = rng.random_range(1..=3);
        let dist = &inst.returns[t - 1];
        let xi = dist.support[rng.random_range(0..dist.len())].clone();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..10.0)).collect();
        let s = solve_stage(&inst, t, &x, &xi, CostKind::Terminal, None, None).unwrap();
        let a = cut_coeffs_from_duals(&inst, &xi, &s.solution.duals_eq, s.base_duals_ub()).unwrap();
        let b = s.lp.generic_subgradient(&s.solution.duals_eq, s.base_duals_ub());
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-8);
        }
    }
}

#[test]
fn decisions_are_feasible() {
    let inst = two_assets(5);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..30 {
        let t = rng.random_range(1..=3);
        let xi = inst.returns[t - 1].support[0].clone();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1000.0)).collect();
        let s = solve_stage(&inst, t, &x, &xi, CostKind::Running, None, None).unwrap();
        let d = inst.decision_of(&s.solution.x);
        assert!(inst.constraint_violation(t, &x, &xi, &d) < 1e-9);
        assert!(inst.cost_leakage(t, &d) >= 0.0);
    }
}

#[test]
fn generated_supports_center_on_mean_matrix() {
    let m = 400;
    let (inst, horizon) = generate_instance(&GeneratorParams {
        m_realizations: m,
        seed: 31,
        ..GeneratorParams::default()
    })
    .unwrap();
    let band = 4.0 * RETURN_SD / (m as f64).sqrt();
    for t in 2..=inst.t_max {
        let mean = inst.returns[t - 1].mean();
        for i in 1..=inst.n {
            assert!((mean[i - 1] - mean_return(inst.n, t, i)).abs() < band, "t {t} asset {i}");
        }
        assert!((mean[inst.n] - 1.01).abs() < 1e-12);
    }
    assert_eq!(horizon.t_max(), 10);
    assert!(inst.x0.iter().all(|&v| (0.0..=1000.0).contains(&v)));
    assert!(inst.u.iter().all(|&v| v == 1.0));
}

#[test]
fn generator_validation() {
    for p in [
        GeneratorParams { n: 3, ..GeneratorParams::default() },
        GeneratorParams { n: 0, ..GeneratorParams::default() },
        GeneratorParams { cost: 0.0, ..GeneratorParams::default() },
        GeneratorParams { t_max: 1, ..GeneratorParams::default() },
        GeneratorParams { lambda: -0.1, ..GeneratorParams::default() },
    ] {
        assert!(generate_instance(&p).is_err(), "{p:?}");
    }
}

#[test]
fn instance_json_round_trip() {
    let (inst, horizon) = generate_instance(&GeneratorParams::default()).unwrap();
    let (back, h) = PortfolioInstance::from_json(&inst.to_json(&horizon).unwrap()).unwrap();
    assert_eq!(back, inst);
    assert_eq!(h, horizon);
    assert!(PortfolioInstance::from_json("{\"instance\": 3}").is_err());
}

#[test]
fn initial_cut_bounds_terminal_wealth() {
    let (inst, _) = tiny_instance();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..10.0)).collect();
        for t in 2..=3 {
            let cut = inst.initial_cut(t);
            for xi in &inst.returns[t - 1].support {
                let v = solve_stage(&inst, t, &x, xi, CostKind::Terminal, None, None).unwrap().value;
                assert!(cut.value_at(&x) <= v + 1e-9);
            }
        }
    }
}
