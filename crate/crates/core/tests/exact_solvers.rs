mod common;

use common::*;
use mftrpo::dynamics::{policy_evaluation_regularized, soft_value_iteration};
use mftrpo::envs::{random_dist, random_policy};
use mftrpo::eval::exploitability;
use mftrpo::exact::{exact_fixed_point, exact_fixed_point_observed, exact_mftrpo, exact_trpo, policy_update, ExactTrpoConfig, MftrpoConfig};
use mftrpo::mdp::TabularModel;
use mftrpo::rng::SeedPath;
use mftrpo::trace::EvalCadence;
use mftrpo::{Dist, Policy, StepSchedule};

#[test]
fn update_worked_example() {
    let pi = Policy::uniform(1, 2);
    let out = policy_update(&pi, &[1.0, 0.0], 1.0, 0, &[0]).unwrap();
    // pi' ~ 0.5 exp(0.5 (Q - ln 0.5)); the ln 0.5 term cancels
    let expect = 1.0 / (1.0 + (-0.5f64).exp());
    assert!((out.prob(0, 0) - expect).abs() < 1e-14);
    assert!((out.prob(0, 0) - 0.6225).abs() < 1e-4);
    assert!((out.prob(0, 1) - 0.3775).abs() < 1e-4);
}

#[test]
fn update_ignores_constant_shifts() {
    let mut rng = SeedPath::new(3).rng();
    let pi = random_policy(4, 3, &mut rng);
    let q: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
    let base = policy_update(&pi, &q, 0.2, 3, &[0, 1, 2, 3]).unwrap();
    for c in [-50.0, 1.5, 1e3] {
        let shifted: Vec<f64> = q.iter().map(|x| x + c).collect();
        let out = policy_update(&pi, &shifted, 0.2, 3, &[0, 1, 2, 3]).unwrap();
        assert!(max_abs(out.as_slice(), base.as_slice()) < 1e-12);
    }
}

#[test]
fn single_action_trpo_keeps_policy() {
    let mdp = TabularModel::new(1, 1, vec![1.0], vec![0.7]).unwrap().into_mdp(0.9).unwrap();
    let run = exact_trpo(&mdp, &Dist::uniform(1), &ExactTrpoConfig::new(0.1, 1)).unwrap();
    assert_eq!(run.policy.as_slice(), &[1.0]);
}

#[test]
fn trpo_improves_monotonically() {
    for seed in 0..10 {
        let mdp = random_mdp(4, 3, seed, 0.9);
        let mu = random_dist(4, &mut SeedPath::new(seed).child(1).rng());
        let run = exact_trpo(&mdp, &mu, &ExactTrpoConfig::new(0.1, 200)).unwrap();
        assert_eq!(run.values.len(), 201);
        for w in run.values.windows(2) {
            assert!(w[1] >= w[0] - 1e-10, "seed {seed}: {} -> {}", w[0], w[1]);
        }
        // the value trace is J(pi_l, mu, mu) from the evaluator
        let last = policy_evaluation_regularized(&mdp, &run.policy, &mu, 0.1).unwrap();
        assert!((mu.dot(&last.j) - run.values[200]).abs() < 1e-12);
    }
}

#[test]
fn trpo_reaches_soft_best_response() {
    for seed in 0..5 {
        let mdp = random_mdp(3, 2, seed, 0.9);
        let mu = random_dist(3, &mut SeedPath::new(seed).child(2).rng());
        let run = exact_trpo(&mdp, &mu, &ExactTrpoConfig::new(0.1, 2000)).unwrap();
        let (_, br) = soft_value_iteration(&mdp, &mu, 0.1, 1e-12).unwrap();
        for s in 0..3 {
            assert!(tv(run.policy.row(s), br.row(s)) <= 1e-2, "seed {seed} state {s}");
        }
    }
}

#[test]
fn warm_start_is_the_first_iterate() {
    let mdp = random_mdp(3, 2, 5, 0.9);
    let mu = Dist::uniform(3);
    let warm = random_policy(3, 2, &mut SeedPath::new(5).rng());
    let mut cfg = ExactTrpoConfig::new(0.1, 1);
    cfg.warm_start = Some(warm.clone());
    let run = exact_trpo(&mdp, &mu, &cfg).unwrap();
    let j0 = policy_evaluation_regularized(&mdp, &warm, &mu, 0.1).unwrap();
    assert_eq!(run.values[0], mu.dot(&j0.j));
    assert!(exact_trpo(&mdp, &mu, &ExactTrpoConfig::new(0.1, 0)).is_err());
}

#[test]
fn zero_step_size_freezes_population() {
    let mdp = random_mdp(4, 2, 8, 0.9);
    let mu0 = random_dist(4, &mut SeedPath::new(8).rng());
    let mut cfg = MftrpoConfig::new(ExactTrpoConfig::new(0.1, 5), 20, StepSchedule::Constant(0.0), 1, mu0.clone());
    cfg.trace.cadence = EvalCadence::Never;
    let trace = exact_mftrpo(&mdp, &cfg).unwrap();
    assert_eq!(trace.records.len(), 20);
    assert_eq!(trace.final_mu, mu0);
    assert!(trace.records.iter().all(|r| r.mu_drift == 0.0));
}

#[test]
fn single_state_population_is_fixed() {
    let mdp = TabularModel::new(1, 2, vec![1.0, 1.0], vec![1.0, 0.0]).unwrap().into_mdp(0.9).unwrap();
    let cfg = MftrpoConfig::new(ExactTrpoConfig::new(0.1, 10), 5, StepSchedule::Constant(0.5), 3, Dist::uniform(1));
    let trace = exact_mftrpo(&mdp, &cfg).unwrap();
    assert_eq!(trace.final_mu.as_slice(), &[1.0]);
    assert_eq!(
        exact_fixed_point(&mdp, &Dist::uniform(1), StepSchedule::Constant(0.5), 1, 10, 0.1)
            .unwrap()
            .as_slice(),
        &[1.0]
    );
}

#[test]
fn mftrpo_is_bit_reproducible() {
    let mdp = random_mdp(4, 3, 2, 0.9);
    let cfg = MftrpoConfig::new(ExactTrpoConfig::new(0.1, 10), 30, StepSchedule::Constant(0.1), 2, Dist::uniform(4));
    let a = exact_mftrpo(&mdp, &cfg).unwrap();
    let b = exact_mftrpo(&mdp, &cfg).unwrap();
    assert_eq!(a.final_mu, b.final_mu);
    assert_eq!(a.final_policy, b.final_policy);
    assert!(a.records.iter().zip(&b.records).all(|(x, y)| x.same_metrics(y)));
    assert_eq!(a.initial.k, 0);
    assert_eq!(a.records.last().unwrap().k, 30);
}

fn reference_fixed_point() -> Dist {
    let mdp = three_state_toy(0.9);
    exact_fixed_point(&mdp, &Dist::uniform(3), StepSchedule::Constant(0.2), 1, 20_000, 0.5).unwrap()
}

#[test]
fn fixed_point_iteration_converges_geometrically() {
    let mdp = three_state_toy(0.9);
    let reference = reference_fixed_point();
    let mut dists = Vec::new();
    exact_fixed_point_observed(&mdp, &Dist::uniform(3), StepSchedule::Constant(0.2), 1, 200, 0.5, |_, mu| {
        dists.push(mu.l2_distance(&reference))
    })
    .unwrap();
    // the error shrinks by a constant factor every 20 iterations
    let checkpoints: Vec<f64> = (0..6).map(|i| dists[20 * i + 19]).collect();
    for w in checkpoints.windows(2) {
        assert!(w[1] <= 0.8 * w[0], "{checkpoints:?}");
    }
}

#[test]
fn fixed_point_is_an_equilibrium() {
    let mdp = three_state_toy(0.9);
    let mu = reference_fixed_point();
    let (_, br) = soft_value_iteration(&mdp, &mu, 0.5, 1e-13).unwrap();
    let phi = exploitability(&mdp, &br, &mu, 0.5, 1e-13).unwrap().phi;
    assert!(phi.abs() <= 1e-6, "phi {phi}");
}

#[test]
fn mftrpo_agrees_with_fixed_point() {
    let mdp = three_state_toy(0.9);
    let reference = reference_fixed_point();
    let mut cfg = MftrpoConfig::new(ExactTrpoConfig::new(0.5, 200), 300, StepSchedule::Constant(0.2), 1, Dist::uniform(3));
    cfg.trace.cadence = EvalCadence::Never;
    let trace = exact_mftrpo(&mdp, &cfg).unwrap();
    let gap = trace.final_mu.l1_distance(&reference);
    assert!(gap <= 1e-2, "l1 gap {gap}");
}
