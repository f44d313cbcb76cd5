//! Trains on the hand-sized portfolio instance and checks the lower bound
//! against both exact references.

use sddp_tsto::engine::{run, RunConfig};
use sddp_tsto::oracle::{extensive_form_value, ExactDp};
use sddp_tsto::portfolio::tiny_instance;

fn main() {
    let (inst, horizon) = tiny_instance();

    let ef = extensive_form_value(&inst, &horizon).expect("tiny instance");
    let mut dp = ExactDp::new(&inst, &horizon).expect("tiny instance");
    let exact = dp.root_value().expect("tiny instance");
    println!("extensive form  {ef:.10}");
    println!("exact recursion {exact:.10}");

    let config = RunConfig {
        n_window: 20,
        max_iters: 40,
        tol: 1e-6,
        ..RunConfig::default()
    };
    let result = run(&inst, &horizon, &config).expect("training");
    for rec in result.history.iter().filter(|r| r.iter <= 5 || r.iter % 10 == 0) {
        println!("k = {:>3}  lower = {:.10}  cost = {:.6}", rec.iter, rec.lower, rec.cost);
    }
    println!(
        "final lower {:.10}, off by {:.2e} after {} iterations ({:?})",
        result.final_lower(),
        (result.final_lower() - ef).abs(),
        result.iterations(),
        result.termination
    );
}
