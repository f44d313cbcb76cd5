//! Builds the truncated exponential horizon, prints its conditional death
//! probabilities, and compares sampled horizon frequencies with the pmf.

use sddp_tsto::scenario::{sample_trajectory, truncated_exponential_horizon, SeedStream, StageDistribution};

fn main() {
    let horizon = truncated_exponential_horizon(0.15, 10).expect("valid parameters");
    // noise is irrelevant here; one point per stage keeps trajectories cheap
    let stages: Vec<StageDistribution> = (0..10).map(|_| StageDistribution::deterministic(vec![1.0])).collect();

    let draws = 100_000;
    let mut counts = [0usize; 11];
    for i in 0..draws {
        let tr = sample_trajectory(SeedStream::new(2024, i), &horizon, &stages);
        counts[tr.horizon] += 1;
    }

    println!("{:>3} {:>10} {:>10} {:>10}", "T", "p_T", "q_T", "sampled");
    for t in 2..=10 {
        println!(
            "{t:>3} {:>10.6} {:>10.6} {:>10.6}",
            horizon.p(t),
            horizon.q(t),
            counts[t] as f64 / draws as f64
        );
    }
    println!("mean horizon: {:.4}", horizon.mean());
}
