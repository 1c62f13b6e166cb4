//! Two islands joined by a single bridge.
//!
//! Island one holds states `0..7`, island two `7..14`. Inside each island
//! the states form a ring; the ring edge `6 -> 0` is replaced by the bridge
//! `6 -> 7` and the ring edge `7 -> 13` by `7 -> 6`, so every state has
//! exactly two outgoing neighbors. Action `a` moves to the `a`-th neighbor
//! (sorted by index) with a seeded probability and otherwise stays put.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{MeanFieldModel, MfMdp};
use crate::rng::SeedPath;
use crate::types::Dist;

pub const ISLAND_SIZE: usize = 7;
/// Range of the per-(state, action) move probability.
pub const MOVE_PROB_RANGE: (f64, f64) = (0.3, 0.9);

#[derive(Clone, Debug, PartialEq)]
pub struct IslandsSpec {
    pub n_states: usize,
    pub branching: usize,
    pub crowd_kappa: f64,
    pub island2: Vec<usize>,
    pub seed: u64,
    pub mu_floor: f64,
    pub initial_state: usize,
}

impl Default for IslandsSpec {
    fn default() -> Self {
        IslandsSpec {
            n_states: 2 * ISLAND_SIZE,
            branching: 2,
            crowd_kappa: 0.2,
            island2: (ISLAND_SIZE..2 * ISLAND_SIZE).collect(),
            seed: 0,
            mu_floor: 1e-10,
            initial_state: 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TwoIslands {
    spec: IslandsSpec,
    neighbors: Vec<[usize; 2]>,
    /// `move_prob[s * 2 + a]`.
    move_prob: Vec<f64>,
    weight: Vec<f64>,
}

fn ring_neighbors(s: usize) -> [usize; 2] {
    let base = s / ISLAND_SIZE * ISLAND_SIZE;
    let i = s - base;
    let mut n = match s {
        6 => [5, 7],
        7 => [6, 8],
        _ => [base + (i + ISLAND_SIZE - 1) % ISLAND_SIZE, base + (i + 1) % ISLAND_SIZE],
    };
    n.sort_unstable();
    n
}

impl TwoIslands {
    pub fn new(spec: IslandsSpec) -> Result<Self> {
        if spec.n_states != 2 * ISLAND_SIZE || spec.branching != 2 {
            return Err(Error::Construction(format!(
                "the two-islands graph has {} states and branching 2 (got {} and {})",
                2 * ISLAND_SIZE,
                spec.n_states,
                spec.branching
            )));
        }
        if spec.initial_state >= spec.n_states {
            return Err(Error::Construction(format!("initial state {} out of range", spec.initial_state)));
        }
        if let Some(&s) = spec.island2.iter().find(|&&s| s >= spec.n_states) {
            return Err(Error::Construction(format!("island state {s} out of range")));
        }
        if !(spec.mu_floor > 0.0 && spec.mu_floor < 1.0) {
            return Err(Error::Construction(format!("mu floor must lie in (0, 1), got {}", spec.mu_floor)));
        }
        if !(spec.crowd_kappa >= 0.0 && spec.crowd_kappa.is_finite()) {
            return Err(Error::Construction(format!("kappa must be >= 0, got {}", spec.crowd_kappa)));
        }
        let n = spec.n_states;
        let neighbors: Vec<[usize; 2]> = (0..n).map(ring_neighbors).collect();
        let mut rng = SeedPath::new(spec.seed).child(0x151a).rng();
        let (lo, hi) = MOVE_PROB_RANGE;
        let move_prob = (0..2 * n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect();
        let weight = (0..n)
            .map(|s| if spec.island2.contains(&s) { 2.0 } else { 1.0 })
            .collect();
        let g = TwoIslands {
            spec,
            neighbors,
            move_prob,
            weight,
        };
        g.check_strongly_connected()?;
        Ok(g)
    }

    /// Every full-support policy moves along every edge, so strong
    /// connectivity of the edge graph is what unichain needs.
    fn check_strongly_connected(&self) -> Result<()> {
        let n = self.spec.n_states;
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(s) = stack.pop() {
                for t in 0..n {
                    let edge = if forward {
                        self.neighbors[s].contains(&t)
                    } else {
                        self.neighbors[t].contains(&s)
                    };
                    if edge && !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
            seen.iter().all(|&v| v)
        };
        if reach(true) && reach(false) {
            Ok(())
        } else {
            Err(Error::Construction("islands graph is not strongly connected".into()))
        }
    }

    pub fn spec(&self) -> &IslandsSpec {
        &self.spec
    }

    pub fn neighbors(&self, s: usize) -> [usize; 2] {
        self.neighbors[s]
    }

    pub fn move_prob(&self, s: usize, a: usize) -> f64 {
        self.move_prob[s * 2 + a]
    }

    pub fn nu(&self) -> Dist {
        Dist::point_mass(self.spec.n_states, self.spec.initial_state)
    }

    pub fn reward_bound(&self) -> f64 {
        let w = self.weight.iter().copied().fold(0.0, f64::max);
        -self.spec.crowd_kappa * self.spec.mu_floor.ln() * w
    }

    pub fn into_mdp(self, gamma: f64) -> Result<MfMdp> {
        let bound = self.reward_bound();
        MfMdp::new(self, gamma, bound)
    }
}

impl MeanFieldModel for TwoIslands {
    fn n_states(&self) -> usize {
        self.spec.n_states
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn transition(&self, s: usize, a: usize, _mu: &Dist, out: &mut [f64]) {
        out.fill(0.0);
        let p = self.move_prob(s, a);
        out[s] = 1.0 - p;
        out[self.neighbors[s][a]] = p;
    }

    fn reward(&self, s: usize, _a: usize, mu: &Dist) -> f64 {
        -self.spec.crowd_kappa * mu[s].max(self.spec.mu_floor).ln() * self.weight[s]
    }

    fn sample_transition(&self, s: usize, a: usize, _mu: &Dist, u: f64) -> usize {
        if u < self.move_prob(s, a) {
            self.neighbors[s][a]
        } else {
            s
        }
    }
}

pub fn build_two_islands(spec: IslandsSpec, gamma: f64) -> Result<MfMdp> {
    TwoIslands::new(spec)?.into_mdp(gamma)
}
