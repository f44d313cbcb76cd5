//! The generic linear interface on a small inventory problem: order stock each
//! stage at unit cost 1, meet random demand, pay 3 per unit short, and sell
//! leftover stock for 0.5 per unit when the horizon ends.

use sddp_tsto::cuts::Cut;
use sddp_tsto::engine::{run, LinearModel, LinearStage, RunConfig};
use sddp_tsto::oracle::extensive_form_value;
use sddp_tsto::scenario::{HorizonDistribution, StageDistribution};

fn stage() -> LinearStage {
    // variables: [stock s, order o, shortage u]
    // s - o - u = -demand + s_prev   (coupling -1 on s_prev, demand as noise)
    let inf = f64::INFINITY;
    LinearStage {
        a_eq: vec![vec![1.0, -1.0, -1.0]],
        coupling_eq: vec![vec![-1.0]],
        rhs_eq: vec![0.0],
        a_ub: vec![vec![0.0, 1.0, 0.0]],
        coupling_ub: vec![vec![0.0]],
        rhs_ub: vec![10.0],
        lower: vec![0.0; 3],
        upper: vec![inf; 3],
        running_cost: vec![0.0, 1.0, 3.0],
        terminal_cost: vec![-0.5, 1.0, 3.0],
        state_cols: vec![0],
    }
}

fn main() {
    let demand = |d: &[f64]| StageDistribution::uniform(d.iter().map(|&v| vec![-v]).collect()).unwrap();
    let model = LinearModel {
        stages: vec![stage(), stage(), stage()],
        noise: vec![StageDistribution::deterministic(vec![-2.0]), demand(&[1.0, 4.0]), demand(&[2.0, 3.0, 5.0])],
        x0: vec![1.0],
        // stock is worth at most 0.5 per unit at the end, costs are nonnegative
        initial_cuts: vec![Cut::new(0.0, vec![-0.5]); 2],
    };
    let horizon = HorizonDistribution::from_pmf(vec![0.3, 0.7]).unwrap();

    let exact = extensive_form_value(&model, &horizon).unwrap();
    let result = run(
        &model,
        &horizon,
        &RunConfig {
            n_window: 20,
            max_iters: 40,
            tol: 1e-6,
            ..RunConfig::default()
        },
    )
    .unwrap();
    println!("extensive form {exact:.8}");
    println!("trained lower  {:.8}", result.final_lower());
    for pool in &result.policy.pools {
        println!("stage {} has {} cuts", pool.stage(), pool.len());
    }
}
