use rand::Rng;

use crate::error::Result;
use crate::mdp::{sample_index, MfMdp};
use crate::rng::StreamRng;
use crate::types::{Dist, Policy};

/// Reset/step access to a mean-field game.
///
/// Oracles are stateless: all randomness comes from the generator passed
/// in, so one instance can be shared by every parallel task.
pub trait EnvOracle: Send + Sync {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn gamma(&self) -> f64;
    fn reward_bound(&self) -> f64;

    /// Draws an initial state from the fixed restart distribution.
    fn reset(&self, rng: &mut StreamRng) -> usize;

    /// Samples `s' ~ P(.|s, a, mu)` and reports `r(s, a, mu)`.
    fn step(&self, s: usize, a: usize, mu: &Dist, rng: &mut StreamRng) -> (usize, f64);

    /// Like [`step`](EnvOracle::step) when the reward is not needed.
    fn next_state(&self, s: usize, a: usize, mu: &Dist, rng: &mut StreamRng) -> usize {
        self.step(s, a, mu, rng).0
    }

    /// The restart distribution, when the oracle knows it.
    fn reset_distribution(&self) -> Option<Dist> {
        None
    }
}

/// Sampling oracle backed by a known model.
#[derive(Clone, Debug)]
pub struct TabularOracle {
    mdp: MfMdp,
    nu: Dist,
}

impl TabularOracle {
    pub fn mdp(&self) -> &MfMdp {
        &self.mdp
    }
}

pub fn make_oracle(mdp: &MfMdp, nu: &Dist) -> Result<TabularOracle> {
    mdp.check_dist(nu, "restart distribution")?;
    Ok(TabularOracle {
        mdp: mdp.clone(),
        nu: nu.clone(),
    })
}

impl EnvOracle for TabularOracle {
    fn n_states(&self) -> usize {
        self.mdp.n_states()
    }

    fn n_actions(&self) -> usize {
        self.mdp.n_actions()
    }

    fn gamma(&self) -> f64 {
        self.mdp.gamma()
    }

    fn reward_bound(&self) -> f64 {
        self.mdp.reward_bound()
    }

    fn reset(&self, rng: &mut StreamRng) -> usize {
        sample_index(self.nu.as_slice(), rng.random())
    }

    fn step(&self, s: usize, a: usize, mu: &Dist, rng: &mut StreamRng) -> (usize, f64) {
        let model = self.mdp.model();
        (model.sample_transition(s, a, mu, rng.random()), model.reward(s, a, mu))
    }

    fn next_state(&self, s: usize, a: usize, mu: &Dist, rng: &mut StreamRng) -> usize {
        self.mdp.model().sample_transition(s, a, mu, rng.random())
    }

    fn reset_distribution(&self) -> Option<Dist> {
        Some(self.nu.clone())
    }
}

pub(crate) fn sample_action(pi: &Policy, s: usize, rng: &mut StreamRng) -> usize {
    sample_index(pi.row(s), rng.random())
}
