//! Small games and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use mftrpo::envs::{random_game, RandomGameSpec};
use mftrpo::mdp::TabularModel;
use mftrpo::{Dist, MfMdp, Policy};

pub fn random_mdp(ns: usize, na: usize, seed: u64, gamma: f64) -> MfMdp {
    random_game(&RandomGameSpec::new(ns, na, seed), gamma).unwrap()
}

/// Two states, two actions: action 0 stays, action 1 switches with
/// probability 0.8. Staying in state 0 pays, crowding costs.
pub fn two_state_game(gamma: f64) -> MfMdp {
    TabularModel::new(
        2,
        2,
        vec![
            1.0, 0.0, 0.2, 0.8, //
            0.0, 1.0, 0.8, 0.2,
        ],
        vec![1.0, 0.2, 0.0, 0.5],
    )
    .unwrap()
    .with_crowd(1.0)
    .into_mdp(gamma)
    .unwrap()
}

/// Three-state ring with a crowd penalty.
pub fn three_state_toy(gamma: f64) -> MfMdp {
    TabularModel::new(
        3,
        2,
        vec![
            0.9, 0.1, 0.0, 0.1, 0.6, 0.3, //
            0.0, 0.9, 0.1, 0.3, 0.1, 0.6, //
            0.1, 0.0, 0.9, 0.6, 0.3, 0.1,
        ],
        vec![0.5, 0.0, 0.2, 0.1, 0.0, 0.3],
    )
    .unwrap()
    .with_crowd(1.0)
    .into_mdp(gamma)
    .unwrap()
}

/// `K(s, t) = sum_a pi(a|s) P(t|s,a,mu)` by explicit loops.
pub fn brute_kernel(mdp: &MfMdp, pi: &Policy, mu: &Dist) -> Vec<Vec<f64>> {
    let ns = mdp.n_states();
    let mut k = vec![vec![0.0; ns]; ns];
    for (s, row) in k.iter_mut().enumerate() {
        for a in 0..mdp.n_actions() {
            let p = mdp.transition(s, a, mu);
            for t in 0..ns {
                row[t] += pi.prob(s, a) * p[t];
            }
        }
    }
    k
}

pub fn vec_mat(x: &[f64], k: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    for s in 0..n {
        for t in 0..n {
            out[t] += x[s] * k[s][t];
        }
    }
    out
}

/// Regularized policy values by iterating the Bellman operator.
pub fn bellman_iteration(mdp: &MfMdp, pi: &Policy, mu: &Dist, eta: f64) -> Vec<f64> {
    let (ns, na, g) = (mdp.n_states(), mdp.n_actions(), mdp.gamma());
    let mut j = vec![0.0; ns];
    loop {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            for a in 0..na {
                let p = mdp.transition(s, a, mu);
                let pa = pi.prob(s, a);
                let cont: f64 = (0..ns).map(|t| p[t] * j[t]).sum();
                next[s] += pa * (mdp.reward(s, a, mu) - eta * pa.ln() + g * cont);
            }
        }
        let diff = next.iter().zip(&j).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        j = next;
        if diff < 1e-14 {
            return j;
        }
    }
}

/// Regularized optimal values by soft Bellman iteration.
pub fn soft_bellman_iteration(mdp: &MfMdp, mu: &Dist, eta: f64) -> Vec<f64> {
    let (ns, na, g) = (mdp.n_states(), mdp.n_actions(), mdp.gamma());
    let mut j = vec![0.0; ns];
    loop {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            let q: Vec<f64> = (0..na)
                .map(|a| {
                    let p = mdp.transition(s, a, mu);
                    mdp.reward(s, a, mu) + g * (0..ns).map(|t| p[t] * j[t]).sum::<f64>()
                })
                .collect();
            let m = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            next[s] = m + eta * q.iter().map(|x| ((x - m) / eta).exp()).sum::<f64>().ln();
        }
        let diff = next.iter().zip(&j).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        j = next;
        if diff < 1e-13 {
            return j;
        }
    }
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * l1(a, b)
}

/// Exploitability of `pi` on a 2-state 2-action game, with the best response
/// found by searching a 101 x 101 grid of per-state action probabilities.
/// Values are solved from the 2x2 Bellman system with `0 ln 0 = 0`.
pub fn grid_search_exploitability(mdp: &MfMdp, pi: &Policy, stationary: &Dist, eta: f64) -> f64 {
    assert_eq!((mdp.n_states(), mdp.n_actions()), (2, 2));
    let g = mdp.gamma();
    let value = |p: [f64; 2]| -> f64 {
        let mut k = [[0.0; 2]; 2];
        let mut r = [0.0; 2];
        for s in 0..2 {
            for (a, pa) in [(0, p[s]), (1, 1.0 - p[s])] {
                if pa == 0.0 {
                    continue;
                }
                let row = mdp.transition(s, a, stationary);
                k[s][0] += pa * row[0];
                k[s][1] += pa * row[1];
                r[s] += pa * (mdp.reward(s, a, stationary) - eta * pa.ln());
            }
        }
        // (I - g K) J = r
        let (a, b, c, d) = (1.0 - g * k[0][0], -g * k[0][1], -g * k[1][0], 1.0 - g * k[1][1]);
        let det = a * d - b * c;
        let j0 = (d * r[0] - b * r[1]) / det;
        let j1 = (a * r[1] - c * r[0]) / det;
        stationary[0] * j0 + stationary[1] * j1
    };
    let mut best = f64::NEG_INFINITY;
    for i in 0..=100 {
        for j in 0..=100 {
            best = best.max(value([i as f64 / 100.0, j as f64 / 100.0]));
        }
    }
    best - value([pi.prob(0, 0), pi.prob(1, 0)])
}
