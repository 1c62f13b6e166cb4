mod common;

use common::*;
use mftrpo::dynamics::{
    induced_kernel, kernel_power_apply, occupation_measure, policy_evaluation_regularized, soft_value_iteration,
    stationary_distribution, value_bound,
};
use mftrpo::envs::{random_dist, random_policy};
use mftrpo::mdp::TabularModel;
use mftrpo::rng::SeedPath;
use mftrpo::{Dist, Kernel, Policy};

#[test]
fn induced_kernel_matches_double_loop() {
    for seed in 0..5 {
        let mdp = random_mdp(3, 2, seed, 0.9);
        let mut rng = SeedPath::new(seed).child(1).rng();
        let pi = random_policy(3, 2, &mut rng);
        let mu = random_dist(3, &mut rng);
        let k = induced_kernel(&mdp, &pi, &mu).unwrap();
        let oracle = brute_kernel(&mdp, &pi, &mu);
        for s in 0..3 {
            for t in 0..3 {
                assert!((k.get(s, t) - oracle[s][t]).abs() <= 1e-14);
            }
            assert!((k.row(s).iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        }
    }
}

#[test]
fn deterministic_policy_picks_rows() {
    let mdp = random_mdp(3, 2, 9, 0.9);
    let mu = Dist::uniform(3);
    let k = induced_kernel(&mdp, &Policy::deterministic(3, 2, 0), &mu).unwrap();
    for s in 0..3 {
        assert_eq!(k.row(s), mdp.transition(s, 0, &mu).as_slice());
    }
}

#[test]
fn uniform_over_indicator_rows_is_half() {
    let mdp = TabularModel::new(2, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0], vec![0.0; 4])
        .unwrap()
        .into_mdp(0.9)
        .unwrap();
    let k = induced_kernel(&mdp, &Policy::uniform(2, 2), &Dist::uniform(2)).unwrap();
    assert_eq!(k.row(0), &[0.5, 0.5]);
    assert_eq!(k.row(1), &[0.5, 0.5]);
}

#[test]
fn kernel_power_one_step() {
    let k = Kernel::new(2, vec![0.7, 0.3, 0.6, 0.4]).unwrap();
    let out = kernel_power_apply(&Dist::point_mass(2, 0), &k, 1).unwrap();
    assert!(max_abs(out.as_slice(), &[0.7, 0.3]) < 1e-15);
    let same = kernel_power_apply(&Dist::point_mass(2, 0), &k, 0).unwrap();
    assert_eq!(same.as_slice(), &[1.0, 0.0]);
}

#[test]
fn stationary_two_state_and_doubly_stochastic() {
    let k = Kernel::new(2, vec![0.7, 0.3, 0.6, 0.4]).unwrap();
    let g = stationary_distribution(&k, 1e-13).unwrap();
    assert!(max_abs(g.as_slice(), &[2.0 / 3.0, 1.0 / 3.0]) < 1e-12);

    let ds = Kernel::new(3, vec![0.5, 0.3, 0.2, 0.2, 0.5, 0.3, 0.3, 0.2, 0.5]).unwrap();
    let u = stationary_distribution(&ds, 1e-13).unwrap();
    assert!(max_abs(u.as_slice(), &[1.0 / 3.0; 3]) < 1e-12);
}

#[test]
fn stationary_residual_meets_tolerance() {
    for seed in 0..10 {
        let mdp = random_mdp(5, 3, seed, 0.9);
        let mut rng = SeedPath::new(seed).child(2).rng();
        let pi = random_policy(5, 3, &mut rng);
        let mu = random_dist(5, &mut rng);
        let k = induced_kernel(&mdp, &pi, &mu).unwrap();
        let g = stationary_distribution(&k, 1e-11).unwrap();
        let pushed = kernel_power_apply(&g, &k, 1).unwrap();
        assert!(g.l1_distance(&pushed) <= 1e-11);
    }
}

#[test]
fn evaluation_matches_bellman_iteration() {
    for seed in 0..5 {
        let mdp = random_mdp(3, 2, seed, 0.9);
        let mut rng = SeedPath::new(seed).child(3).rng();
        let pi = random_policy(3, 2, &mut rng);
        let mu = random_dist(3, &mut rng);
        let v = policy_evaluation_regularized(&mdp, &pi, &mu, 0.1).unwrap();
        let oracle = bellman_iteration(&mdp, &pi, &mu, 0.1);
        assert!(max_abs(&v.j, &oracle) <= 1e-6, "seed {seed}");
    }
}

#[test]
fn single_state_geometric_series() {
    let mdp = TabularModel::new(1, 1, vec![1.0], vec![1.0]).unwrap().into_mdp(0.9).unwrap();
    for eta in [0.0, 0.3, 2.0] {
        let v = policy_evaluation_regularized(&mdp, &Policy::uniform(1, 1), &Dist::uniform(1), eta).unwrap();
        assert!((v.j[0] - 10.0).abs() < 1e-10);
        assert!((v.q[0] - 10.0).abs() < 1e-10);
    }
}

#[test]
fn one_step_problem_without_regularization() {
    let mdp = random_mdp(3, 2, 4, 0.0);
    let mut rng = SeedPath::new(4).rng();
    let pi = random_policy(3, 2, &mut rng);
    let mu = random_dist(3, &mut rng);
    let v = policy_evaluation_regularized(&mdp, &pi, &mu, 0.0).unwrap();
    for s in 0..3 {
        let expected: f64 = (0..2).map(|a| pi.prob(s, a) * mdp.reward(s, a, &mu)).sum();
        assert!((v.j[s] - expected).abs() < 1e-14);
        for a in 0..2 {
            assert!((v.q_at(s, a) - mdp.reward(s, a, &mu)).abs() < 1e-14);
        }
    }
}

#[test]
fn soft_value_iteration_closed_form() {
    let mdp = TabularModel::new(1, 2, vec![1.0, 1.0], vec![1.0, 0.0]).unwrap().into_mdp(0.0).unwrap();
    let (v, pi) = soft_value_iteration(&mdp, &Dist::uniform(1), 1.0, 1e-12).unwrap();
    let e = std::f64::consts::E;
    assert!((v.j[0] - (1.0 + e).ln()).abs() < 1e-12);
    assert!((v.j[0] - 1.31326).abs() < 1e-5);
    assert!((pi.prob(0, 0) - e / (1.0 + e)).abs() < 1e-12);
    assert!((pi.prob(0, 0) - 0.73106).abs() < 1e-5);
    assert!((pi.prob(0, 1) - 0.26894).abs() < 1e-5);
}

#[test]
fn equal_rewards_give_uniform_best_response() {
    let mdp = TabularModel::new(2, 3, vec![0.5, 0.5, 1.0, 0.0, 0.0, 1.0, 0.2, 0.8, 0.3, 0.7, 0.9, 0.1], vec![0.4; 6])
        .unwrap()
        .into_mdp(0.0)
        .unwrap();
    let (_, pi) = soft_value_iteration(&mdp, &Dist::uniform(2), 0.5, 1e-12).unwrap();
    assert!(max_abs(pi.as_slice(), &[1.0 / 3.0; 6]) < 1e-12);
}

#[test]
fn soft_values_match_independent_iteration_and_dominate() {
    for seed in 0..5 {
        let mdp = random_mdp(4, 3, seed, 0.9);
        let mut rng = SeedPath::new(seed).child(5).rng();
        let mu = random_dist(4, &mut rng);
        let tol = 1e-10;
        let (best, br) = soft_value_iteration(&mdp, &mu, 0.1, tol).unwrap();
        assert!(max_abs(&best.j, &soft_bellman_iteration(&mdp, &mu, 0.1)) < 1e-8);
        let own = policy_evaluation_regularized(&mdp, &br, &mu, 0.1).unwrap();
        assert!(max_abs(&own.j, &best.j) <= 10.0 * tol);
        for _ in 0..5 {
            let pi = random_policy(4, 3, &mut rng);
            let v = policy_evaluation_regularized(&mdp, &pi, &mu, 0.1).unwrap();
            assert!(v.j.iter().zip(&best.j).all(|(a, b)| *a <= b + tol));
        }
    }
}

#[test]
fn occupation_matches_truncated_series() {
    let gamma = 0.9;
    for seed in 0..5 {
        let mdp = random_mdp(3, 2, seed, gamma);
        let mut rng = SeedPath::new(seed).child(6).rng();
        let pi = random_policy(3, 2, &mut rng);
        let mu = random_dist(3, &mut rng);
        let xi = random_dist(3, &mut rng);
        let k = brute_kernel(&mdp, &pi, &mu);
        let mut x = xi.as_slice().to_vec();
        let mut series = vec![0.0; 3];
        let mut disc = 1.0 - gamma;
        for _ in 0..=500 {
            for s in 0..3 {
                series[s] += disc * x[s];
            }
            x = vec_mat(&x, &k);
            disc *= gamma;
        }
        let occ = occupation_measure(&mdp, &pi, &mu, &xi).unwrap();
        assert!(max_abs(&occ.marginal, &series) <= 1e-8);
        let total: f64 = occ.pairs.iter().sum();
        assert!((total - 1.0).abs() <= 1e-10);
        for s in 0..3 {
            let row: f64 = (0..2).map(|a| occ.at(s, a)).sum();
            assert!((row - occ.marginal[s]).abs() <= 1e-15);
            for a in 0..2 {
                assert!(occ.at(s, a) >= 0.0);
                assert!((occ.at(s, a) - pi.prob(s, a) * occ.marginal[s]).abs() <= 1e-15);
            }
        }
    }
}

#[test]
fn occupation_special_cases() {
    let mdp = random_mdp(3, 2, 11, 0.0);
    let mut rng = SeedPath::new(11).rng();
    let pi = random_policy(3, 2, &mut rng);
    let xi = random_dist(3, &mut rng);
    let occ = occupation_measure(&mdp, &pi, &Dist::uniform(3), &xi).unwrap();
    for s in 0..3 {
        for a in 0..2 {
            assert!((occ.at(s, a) - xi[s] * pi.prob(s, a)).abs() < 1e-15);
        }
    }
    let absorbing = TabularModel::new(1, 2, vec![1.0, 1.0], vec![0.0, 1.0]).unwrap().into_mdp(0.9).unwrap();
    let pi = Policy::new(1, 2, vec![0.3, 0.7]).unwrap();
    let occ = occupation_measure(&absorbing, &pi, &Dist::uniform(1), &Dist::uniform(1)).unwrap();
    assert!((occ.at(0, 0) - 0.3).abs() < 1e-12);
    assert!((occ.at(0, 1) - 0.7).abs() < 1e-12);
}

#[test]
fn bellman_consistency_and_value_bound() {
    for seed in 0..5 {
        let mdp = random_mdp(4, 3, seed, 0.9);
        let mut rng = SeedPath::new(seed).child(7).rng();
        let pi = random_policy(4, 3, &mut rng);
        let mu = random_dist(4, &mut rng);
        for eta in [0.0, 0.05, 0.3] {
            let v = policy_evaluation_regularized(&mdp, &pi, &mu, eta).unwrap();
            for s in 0..4 {
                for a in 0..3 {
                    let p = mdp.transition(s, a, &mu);
                    let rhs = mdp.reward(s, a, &mu) + 0.9 * (0..4).map(|t| p[t] * v.j[t]).sum::<f64>();
                    assert!((v.q_at(s, a) - rhs).abs() <= 1e-10);
                }
            }
            let (best, _) = soft_value_iteration(&mdp, &mu, eta.max(1e-3), 1e-12).unwrap();
            let bound = value_bound(&mdp, eta.max(1e-3));
            assert!(best.j.iter().all(|j| j.abs() <= bound + 1e-9));
            let bound = value_bound(&mdp, eta);
            assert!(v.j.iter().all(|j| j.abs() <= bound + 1e-9));
        }
    }
}

#[test]
fn dimension_mismatches_are_errors() {
    let mdp = random_mdp(3, 2, 0, 0.9);
    assert!(induced_kernel(&mdp, &Policy::uniform(2, 2), &Dist::uniform(3)).is_err());
    assert!(induced_kernel(&mdp, &Policy::uniform(3, 2), &Dist::uniform(4)).is_err());
    let k = Kernel::identity(3);
    assert!(kernel_power_apply(&Dist::uniform(2), &k, 1).is_err());
}
