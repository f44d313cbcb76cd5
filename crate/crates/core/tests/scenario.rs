use proptest::prelude::*;
use sddp_tsto::scenario::{
    derive_transition_probs, sample_trajectory, truncated_exponential_horizon, HorizonDistribution, ScenarioError,
    SeedStream, StageDistribution,
};

fn flat_noise(t_max: usize) -> Vec<StageDistribution> {
    (0..t_max).map(|_| StageDistribution::deterministic(vec![0.0])).collect()
}

#[test]
fn uniform_pmf_transitions() {
    let q = derive_transition_probs(&[1.0 / 3.0; 3]).unwrap();
    assert!((q[0] - 1.0 / 3.0).abs() < 1e-15);
    assert!((q[1] - 0.5).abs() < 1e-15);
    assert_eq!(q[2], 1.0);
}

/// Simulates the death process directly from the transition probabilities
/// and checks each empirical frequency against the pmf within three standard
/// errors.
#[test]
fn simulated_death_process_matches_pmf() {
    let horizon = HorizonDistribution::from_pmf(vec![1.0 / 3.0; 3]).unwrap();
    let noise = flat_noise(4);
    let n = 1_000_000u64;
    let mut counts = [0u64; 5];
    for i in 0..n {
        counts[sample_trajectory(SeedStream::new(2024, i), &horizon, &noise).horizon] += 1;
    }
    for t in 2..=4 {
        let p = horizon.p(t);
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        let freq = counts[t] as f64 / n as f64;
        assert!((freq - p).abs() < 3.0 * sd, "T = {t}: {freq} vs {p}");
    }
}

#[test]
fn degenerate_pmf_has_no_interior_deaths() {
    let q = derive_transition_probs(&[0.0, 0.0, 0.0, 1.0]).unwrap();
    assert_eq!(q, vec![0.0, 0.0, 0.0, 1.0]);
    let fixed = HorizonDistribution::fixed(5).unwrap();
    assert_eq!(fixed.transition_probs(), &[0.0, 0.0, 0.0, 1.0]);
}

#[test]
fn bad_pmfs_rejected() {
    assert!(matches!(derive_transition_probs(&[0.5, 0.4]), Err(ScenarioError::InvalidParameter(_))));
    assert!(matches!(derive_transition_probs(&[1.2, -0.2]), Err(ScenarioError::InvalidParameter(_))));
    assert!(derive_transition_probs(&[]).is_err());
}

#[test]
fn exponential_horizon_closed_form() {
    let lambda = 0.15;
    let h = truncated_exponential_horizon(lambda, 10).unwrap();
    let total: f64 = h.pmf().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    let norm = (-lambda / 2.0).exp() - (-lambda * 9.5).exp();
    for t in 1..10usize {
        let tf = t as f64;
        let expected = ((-lambda * (tf - 0.5)).exp() - (-lambda * (tf + 0.5)).exp()) / norm;
        assert!((h.p(t + 1) - expected).abs() < 1e-15);
    }
    for t in 2..9 {
        assert!((h.p(t) / h.p(t + 1) - lambda.exp()).abs() < 1e-12);
    }
    assert_eq!(h.q(2), h.p(2));
    assert_eq!(h.q(10), 1.0);
}

#[test]
fn exponential_horizon_edge_cases() {
    let h = truncated_exponential_horizon(0.7, 2).unwrap();
    assert_eq!(h.pmf(), &[1.0]);
    assert!(truncated_exponential_horizon(0.0, 5).is_err());
    assert!(truncated_exponential_horizon(-1.0, 5).is_err());
    assert!(truncated_exponential_horizon(0.1, 1).is_err());
}

#[test]
fn stage_distribution_validation() {
    assert!(StageDistribution::new(vec![vec![1.0], vec![2.0]], vec![0.5, 0.6]).is_err());
    assert!(StageDistribution::new(vec![vec![1.0], vec![2.0, 3.0]], vec![0.5, 0.5]).is_err());
    assert!(StageDistribution::new(vec![vec![1.0]], vec![0.5, 0.5]).is_err());
    let d = StageDistribution::new(vec![vec![1.0, 0.0], vec![3.0, 2.0]], vec![0.25, 0.75]).unwrap();
    assert_eq!(d.mean(), vec![2.5, 1.5]);
}

#[test]
fn same_stream_same_trajectory() {
    let h = truncated_exponential_horizon(0.15, 6).unwrap();
    let noise: Vec<StageDistribution> = std::iter::once(StageDistribution::deterministic(vec![1.0]))
        .chain((1..6).map(|_| StageDistribution::uniform(vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap()))
        .collect();
    let a = sample_trajectory(SeedStream::new(9, 3), &h, &noise);
    let b = sample_trajectory(SeedStream::new(9, 3), &h, &noise);
    assert_eq!(a, b);
    let c = sample_trajectory(SeedStream::new(9, 4), &h, &noise);
    let d = sample_trajectory(SeedStream::new(10, 3), &h, &noise);
    assert!(a != c || a != d);
}

fn pmf_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 1..8).prop_filter_map("positive mass", |w| {
        let total: f64 = w.iter().sum();
        (total > 1e-3).then(|| w.iter().map(|v| v / total).collect())
    })
}

proptest! {
    #[test]
    fn transitions_reproduce_pmf(p in pmf_strategy()) {
        let h = HorizonDistribution::from_pmf(p.clone()).unwrap();
        let back = h.pmf_from_transitions();
        for (a, b) in back.iter().zip(&p) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        prop_assert_eq!(*h.transition_probs().last().unwrap(), 1.0);
        prop_assert!(h.transition_probs().iter().all(|&q| (0.0..=1.0).contains(&q)));
    }

    #[test]
    fn trajectories_are_well_formed(p in pmf_strategy(), seed in any::<u64>(), stream in any::<u64>()) {
        let h = HorizonDistribution::from_pmf(p).unwrap();
        let noise = flat_noise(h.t_max());
        let tr = sample_trajectory(SeedStream::new(seed, stream), &h, &noise);
        prop_assert!(tr.d(1));
        prop_assert!(tr.alive.windows(2).all(|w| w[0] || !w[1]));
        let first_dead = tr.alive.iter().position(|&a| !a).unwrap() + 1;
        prop_assert_eq!(tr.horizon, first_dead);
        prop_assert!(h.p(tr.horizon) > 0.0);
        prop_assert_eq!(tr.xi.len(), h.t_max());
    }
}
