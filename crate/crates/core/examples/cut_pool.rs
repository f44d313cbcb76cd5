//! Assembles a cut from hand-written branch values, grows a pool, and writes
//! the resulting policy as JSON.

use sddp_tsto::cuts::{assemble_cut, Cut, CutPool, Policy};

fn main() {
    let anchor = [2.0, 1.0];
    let probs = [0.5, 0.5];
    // values and subgradients of the survive branch per realization
    let cont_vals = [-3.0, -2.0];
    let cont_grads = vec![vec![-1.0, -1.0], vec![-0.5, -1.0]];
    // and of the stop branch
    let stop_vals = [-2.5, -2.5];
    let stop_grads = vec![vec![-1.0, -0.5], vec![-1.0, -0.5]];

    let mut pool = CutPool::new(2, Cut::new(-10.0, vec![0.0, 0.0]));
    for q in [0.0, 0.3, 1.0] {
        let cut = assemble_cut(q, &probs, &cont_vals, &cont_grads, &stop_vals, &stop_grads, &anchor).unwrap();
        println!("q = {q:.1}: theta = {:+.3}, beta = {:?}", cut.theta, cut.beta);
        pool.push(cut).unwrap();
    }

    for x in [[0.0, 0.0], [2.0, 1.0], [4.0, 3.0]] {
        println!("Q({x:?}) >= {:.3} (cut #{})", pool.evaluate(&x), pool.active_cut(&x).unwrap());
    }

    let policy = Policy {
        label: "demo".into(),
        pools: vec![pool],
    };
    println!("{}", policy.to_json().unwrap());
}
