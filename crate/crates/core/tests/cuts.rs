use proptest::prelude::*;
use sddp_tsto::cuts::{assemble_cut, Cut, CutError, CutPool, Policy};

#[test]
fn null_pool_is_zero_everywhere() {
    let pool = CutPool::new(2, Cut::new(0.0, vec![0.0; 3]));
    for x in [[0.0, 0.0, 0.0], [5.0, -2.0, 1e6]] {
        assert_eq!(pool.evaluate(&x), 0.0);
    }
}

#[test]
fn evaluate_takes_the_larger_affine_piece() {
    let mut pool = CutPool::new(3, Cut::new(1.0, vec![0.0, 0.0]));
    pool.push(Cut::new(0.0, vec![1.0, 0.0])).unwrap();
    let x = [2.0, 0.0];
    let direct = pool.cuts().iter().map(|c| c.theta + c.beta[0] * x[0] + c.beta[1] * x[1]).fold(f64::MIN, f64::max);
    assert_eq!(pool.evaluate(&x), 2.0);
    assert_eq!(pool.evaluate(&x), direct);
    assert_eq!(pool.active_cut(&x), Some(1));
    assert_eq!(pool.active_cut(&[0.5, 0.0]), Some(0));
}

#[test]
fn push_rejects_bad_cuts() {
    let mut pool = CutPool::new(2, Cut::new(0.0, vec![0.0, 0.0]));
    assert!(matches!(pool.push(Cut::new(0.0, vec![1.0])), Err(CutError::DimensionMismatch(_))));
    assert!(matches!(pool.push(Cut::new(f64::NAN, vec![1.0, 0.0])), Err(CutError::NonFinite)));
    assert!(pool.push(Cut::new(0.0, vec![f64::INFINITY, 0.0])).is_err());
    assert_eq!(pool.len(), 1);
}

#[test]
fn no_death_mass_gives_continuation_average() {
    let probs = [0.25, 0.75];
    let cont_vals = [4.0, 8.0];
    let cont_grads = vec![vec![1.0, -1.0], vec![3.0, 1.0]];
    let stop_vals = [100.0, 200.0];
    let stop_grads = vec![vec![50.0, 50.0], vec![-50.0, 9.0]];
    let anchor = [1.0, 2.0];
    let cut = assemble_cut(0.0, &probs, &cont_vals, &cont_grads, &stop_vals, &stop_grads, &anchor).unwrap();
    assert_eq!(cut.beta, vec![2.5, 0.5]);
    assert!((cut.value_at(&anchor) - 7.0).abs() < 1e-12);

    let stop_only = assemble_cut(1.0, &probs, &cont_vals, &cont_grads, &stop_vals, &stop_grads, &anchor).unwrap();
    assert_eq!(stop_only.beta, vec![-25.0, 19.25]);
    assert!((stop_only.value_at(&anchor) - 175.0).abs() < 1e-12);
}

/// Recomputes both convex combinations by hand for q = 1/2 and two
/// realizations.
#[test]
fn half_death_mass_by_hand() {
    let probs = [0.5, 0.5];
    let anchor = [2.0];
    let cut = assemble_cut(0.5, &probs, &[3.0, 5.0], &[vec![1.0], vec![3.0]], &[1.0, -1.0], &[vec![0.0], vec![-2.0]], &anchor)
        .unwrap();
    // continuation: average value 4, average slope 2, intercept 4 - 2*2 = 0
    // stopping: average value 0, average slope -1, intercept 0 + 2 = 2
    assert!((cut.theta - 1.0).abs() < 1e-15);
    assert!((cut.beta[0] - 0.5).abs() < 1e-15);
}

#[test]
fn assemble_checks_dimensions() {
    let g = vec![vec![1.0]];
    assert!(assemble_cut(0.5, &[1.0], &[1.0], &g, &[1.0], &g, &[1.0, 2.0]).is_err());
    assert!(assemble_cut(0.5, &[0.5, 0.5], &[1.0], &g, &[1.0], &g, &[1.0]).is_err());
    assert!(assemble_cut(1.5, &[1.0], &[1.0], &g, &[1.0], &g, &[1.0]).is_err());
}

#[test]
fn policy_json_round_trip() {
    let mut p2 = CutPool::new(2, Cut::new(0.0, vec![-3.0, -3.0]));
    p2.push(Cut::new(0.125, vec![-1.0 / 3.0, 2.5e-17])).unwrap();
    let policy = Policy {
        label: "demo".into(),
        pools: vec![p2, CutPool::new(3, Cut::new(0.0, vec![-2.0, -2.0]))],
    };
    let back = Policy::from_json(&policy.to_json().unwrap()).unwrap();
    assert_eq!(back, policy);
    assert_eq!(back.pool(3).unwrap().stage(), 3);
    assert!(back.pool(4).is_none());
}

proptest! {
    /// The assembled cut's value at the anchor is the probability-weighted
    /// mix of the branch values, whatever the subgradients are.
    #[test]
    fn cut_is_tight_at_anchor(
        q in 0.0f64..=1.0,
        raw in prop::collection::vec(0.01f64..1.0, 1..5),
        seed_vals in prop::collection::vec(-10.0f64..10.0, 8),
        anchor in prop::collection::vec(-5.0f64..5.0, 2),
    ) {
        let m = raw.len();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let val = |k: usize, j: usize| seed_vals[(k + 3 * j) % seed_vals.len()];
        let cont_vals: Vec<f64> = (0..m).map(|j| val(0, j)).collect();
        let stop_vals: Vec<f64> = (0..m).map(|j| val(1, j)).collect();
        let cont_grads: Vec<Vec<f64>> = (0..m).map(|j| vec![val(2, j), val(3, j)]).collect();
        let stop_grads: Vec<Vec<f64>> = (0..m).map(|j| vec![val(4, j), val(5, j)]).collect();
        let cut = assemble_cut(q, &probs, &cont_vals, &cont_grads, &stop_vals, &stop_grads, &anchor).unwrap();
        let expected: f64 = (0..m).map(|j| probs[j] * ((1.0 - q) * cont_vals[j] + q * stop_vals[j])).sum();
        prop_assert!((cut.value_at(&anchor) - expected).abs() < 1e-9);
    }

    #[test]
    fn pool_value_dominates_each_cut(
        cuts in prop::collection::vec((-5.0f64..5.0, -2.0f64..2.0), 1..6),
        x in -10.0f64..10.0,
    ) {
        let mut pool = CutPool::new(2, Cut::new(cuts[0].0, vec![cuts[0].1]));
        for &(t, b) in &cuts[1..] {
            pool.push(Cut::new(t, vec![b])).unwrap();
        }
        let v = pool.evaluate(&[x]);
        prop_assert!(cuts.iter().all(|&(t, b)| t + b * x <= v));
        let k = pool.active_cut(&[x]).unwrap();
        prop_assert_eq!(pool.cuts()[k].value_at(&[x]), v);
    }
}
