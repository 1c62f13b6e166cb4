//! Seeded random tabular games, mostly for tests and quick experiments.

use rand::Rng;

use crate::error::Result;
use crate::mdp::{MfMdp, TabularModel};
use crate::rng::SeedPath;
use crate::types::{Dist, Policy};

#[derive(Clone, Debug, PartialEq)]
pub struct RandomGameSpec {
    pub n_states: usize,
    pub n_actions: usize,
    /// Base rewards are uniform in `[-scale, scale]`.
    pub reward_scale: f64,
    /// Linear crowd penalty `crowd * mu(s)`.
    pub crowd: f64,
    /// Weight of the population in the transition mixture.
    pub herd: f64,
    pub seed: u64,
}

impl RandomGameSpec {
    pub fn new(n_states: usize, n_actions: usize, seed: u64) -> Self {
        RandomGameSpec {
            n_states,
            n_actions,
            reward_scale: 1.0,
            crowd: 0.5,
            herd: 0.0,
            seed,
        }
    }
}

fn simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let p: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let z: f64 = p.iter().sum();
    p.into_iter().map(|x| x / z).collect()
}

/// Transition rows are Dirichlet(1) draws, so every state reaches every other
/// in one step with positive probability.
pub fn random_game(spec: &RandomGameSpec, gamma: f64) -> Result<MfMdp> {
    let mut rng = SeedPath::new(spec.seed).child(0x6a3e).rng();
    let (ns, na) = (spec.n_states, spec.n_actions);
    let mut transitions = Vec::with_capacity(ns * na * ns);
    for _ in 0..ns * na {
        transitions.extend(simplex(ns, &mut rng));
    }
    let base = (0..ns * na)
        .map(|_| spec.reward_scale * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    TabularModel::new(ns, na, transitions, base)?
        .with_crowd(spec.crowd)
        .with_herd(spec.herd)
        .into_mdp(gamma)
}

/// Uniform draw from the simplex.
pub fn random_dist<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Dist {
    Dist::normalized(simplex(n, rng))
}

/// Policy with independent uniform rows.
pub fn random_policy<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> Policy {
    let probs = (0..n_states).flat_map(|_| simplex(n_actions, rng)).collect();
    Policy::from_raw(n_states, n_actions, probs)
}
