//! A horizon that always reaches the last stage: the random-horizon engine and
//! a fixed-horizon run produce the same first-stage value.

use sddp_tsto::engine::{run, RunConfig};
use sddp_tsto::portfolio::{generate_instance, GeneratorParams};
use sddp_tsto::scenario::HorizonDistribution;

fn main() {
    let params = GeneratorParams {
        n: 2,
        t_max: 5,
        m_realizations: 4,
        ..GeneratorParams::default()
    };
    let (inst, _) = generate_instance(&params).unwrap();

    let mut pmf = vec![0.0; inst.t_max - 1];
    *pmf.last_mut().unwrap() = 1.0;
    let concentrated = HorizonDistribution::from_pmf(pmf).unwrap();
    let fixed = HorizonDistribution::fixed(inst.t_max).unwrap();
    println!("q from the pmf: {:?}", concentrated.transition_probs());

    let config = RunConfig {
        n_window: 30,
        max_iters: 30,
        ..RunConfig::default()
    };
    let a = run(&inst, &concentrated, &config).unwrap();
    let b = run(&inst, &fixed, &config).unwrap();
    println!("random-horizon engine: {:.12}", a.final_lower());
    println!("fixed horizon:         {:.12}", b.final_lower());
    println!("difference:            {:.2e}", (a.final_lower() - b.final_lower()).abs());
}
