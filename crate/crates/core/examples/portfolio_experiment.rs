//! One cell of the comparison table: generate an instance, train a policy
//! with the random horizon and one with the horizon fixed at its maximum, then
//! evaluate both on 500 common trajectories.
//!
//! Usage: `cargo run --release --example portfolio_experiment -- [n] [cost] [seed]`

use sddp_tsto::cli::{render_table, train_policy, ReportRow, TrainMode};
use sddp_tsto::engine::RunConfig;
use sddp_tsto::eval::compare;
use sddp_tsto::portfolio::{generate_instance, GeneratorParams};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n = args.first().map_or(4, |s| s.parse().expect("n"));
    let cost = args.get(1).map_or(0.01, |s| s.parse().expect("cost"));
    let seed = args.get(2).map_or(1, |s| s.parse().expect("seed"));

    let (inst, horizon) = generate_instance(&GeneratorParams {
        n,
        cost,
        seed,
        ..GeneratorParams::default()
    })
    .unwrap();
    let config = RunConfig::default();
    let tsto = train_policy(&inst, &horizon, TrainMode::Tsto, &config).unwrap();
    let fixed = train_policy(&inst, &horizon, TrainMode::Fixed, &config).unwrap();
    let rep = compare(&inst, &tsto.policy, &fixed.policy, &horizon, 500, 12345, 0.9, false).unwrap();

    println!(
        "{}",
        render_table(&[ReportRow {
            n,
            t_max: inst.t_max,
            cost,
            mean_income_tsto: rep.mean_a,
            mean_income_fixed: rep.mean_b,
            fraction_nonnegative: rep.fraction_nonnegative,
            iterations_tsto: tsto.iterations(),
            iterations_fixed: fixed.iterations(),
        }])
    );
    println!("income difference histogram:");
    for (k, count) in rep.diff_histogram.counts.iter().enumerate() {
        let lo = rep.diff_histogram.edges[k];
        println!("{lo:>10.2} {}", "#".repeat(count.div_ceil(4)));
    }
    println!("trajectories sha256 {}", rep.trajectory_checksum);
}
