//! Finite mean-field MDPs.
//!
//! A [`MeanFieldModel`] supplies `P(.|s, a, mu)` and `r(s, a, mu)`. [`MfMdp`]
//! pairs a model with a discount and a reward bound. Most exact computations
//! hold `mu` fixed, so they first [`freeze`](MfMdp::freeze) the model into
//! sparse tables.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::types::Dist;

/// Tolerance on transition row mass checked at construction.
pub const ROW_MASS_TOL: f64 = 1e-12;

pub trait MeanFieldModel: Send + Sync {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;

    /// Writes `P(.|s, a, mu)` into `out` (length `n_states`).
    fn transition(&self, s: usize, a: usize, mu: &Dist, out: &mut [f64]);

    fn reward(&self, s: usize, a: usize, mu: &Dist) -> f64;

    /// Inverse-CDF draw from `P(.|s, a, mu)` with `u` uniform in `[0, 1)`.
    ///
    /// The default materializes the row; sparse models should override it.
    fn sample_transition(&self, s: usize, a: usize, mu: &Dist, u: f64) -> usize {
        let mut row = vec![0.0; self.n_states()];
        self.transition(s, a, mu, &mut row);
        sample_index(&row, u)
    }
}

/// Inverse-CDF lookup; falls back to the last non-zero entry on round-off.
pub(crate) fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

#[derive(Clone)]
pub struct MfMdp {
    model: Arc<dyn MeanFieldModel>,
    gamma: f64,
    reward_bound: f64,
}

impl fmt::Debug for MfMdp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MfMdp")
            .field("n_states", &self.n_states())
            .field("n_actions", &self.n_actions())
            .field("gamma", &self.gamma)
            .field("reward_bound", &self.reward_bound)
            .finish()
    }
}

impl MfMdp {
    pub fn new(model: impl MeanFieldModel + 'static, gamma: f64, reward_bound: f64) -> Result<Self> {
        Self::from_arc(Arc::new(model), gamma, reward_bound)
    }

    pub fn from_arc(model: Arc<dyn MeanFieldModel>, gamma: f64, reward_bound: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::invalid(format!("discount {gamma} not in [0, 1)")));
        }
        if !(reward_bound >= 0.0 && reward_bound.is_finite()) {
            return Err(Error::invalid(format!("reward bound {reward_bound} must be finite and >= 0")));
        }
        if model.n_states() == 0 || model.n_actions() == 0 {
            return Err(Error::invalid("model needs at least one state and one action"));
        }
        Ok(MfMdp {
            model,
            gamma,
            reward_bound,
        })
    }

    pub fn n_states(&self) -> usize {
        self.model.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.model.n_actions()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    pub fn model(&self) -> &dyn MeanFieldModel {
        self.model.as_ref()
    }

    /// Same model with a different discount.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::from_arc(self.model.clone(), gamma, self.reward_bound)
    }

    pub fn transition(&self, s: usize, a: usize, mu: &Dist) -> Vec<f64> {
        let mut row = vec![0.0; self.n_states()];
        self.model.transition(s, a, mu, &mut row);
        row
    }

    pub fn reward(&self, s: usize, a: usize, mu: &Dist) -> f64 {
        self.model.reward(s, a, mu)
    }

    pub(crate) fn check_dist(&self, mu: &Dist, what: &str) -> Result<()> {
        if mu.len() != self.n_states() {
            return Err(Error::invalid(format!(
                "{what} has {} entries, model has {} states",
                mu.len(),
                self.n_states()
            )));
        }
        Ok(())
    }

    /// Evaluates the model at a fixed mean field.
    pub fn freeze(&self, mu: &Dist) -> Result<FrozenMdp> {
        self.check_dist(mu, "mean field")?;
        let (ns, na) = (self.n_states(), self.n_actions());
        let mut row = vec![0.0; ns];
        let mut offsets = Vec::with_capacity(ns * na + 1);
        let mut next = Vec::new();
        let mut reward = Vec::with_capacity(ns * na);
        offsets.push(0);
        for s in 0..ns {
            for a in 0..na {
                self.model.transition(s, a, mu, &mut row);
                let mut mass = 0.0;
                for (t, &p) in row.iter().enumerate() {
                    if !(p >= 0.0 && p.is_finite()) {
                        return Err(Error::Numerical(format!("P({t}|{s},{a}) = {p}")));
                    }
                    if p > 0.0 {
                        next.push((t, p));
                        mass += p;
                    }
                }
                if (mass - 1.0).abs() > ROW_MASS_TOL {
                    return Err(Error::Numerical(format!(
                        "transition row ({s},{a}) has mass {mass}"
                    )));
                }
                offsets.push(next.len());
                let r = self.model.reward(s, a, mu);
                if !r.is_finite() {
                    return Err(Error::Numerical(format!("r({s},{a}) = {r}")));
                }
                reward.push(r);
            }
        }
        Ok(FrozenMdp {
            n_states: ns,
            n_actions: na,
            gamma: self.gamma,
            offsets,
            next,
            reward,
        })
    }
}

/// A mean-field MDP evaluated at one fixed `mu`: an ordinary finite MDP.
#[derive(Clone, Debug)]
pub struct FrozenMdp {
    pub(crate) n_states: usize,
    pub(crate) n_actions: usize,
    pub(crate) gamma: f64,
    offsets: Vec<usize>,
    next: Vec<(usize, f64)>,
    reward: Vec<f64>,
}

impl FrozenMdp {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Non-zero entries of `P(.|s, a)` as `(next_state, prob)`.
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        let i = s * self.n_actions + a;
        &self.next[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    /// `sum_t P(t|s,a) v(t)`.
    pub fn expect(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.successors(s, a).iter().map(|&(t, p)| p * v[t]).sum()
    }

    /// Same tables with a different discount.
    pub fn with_gamma(&self, gamma: f64) -> FrozenMdp {
        FrozenMdp {
            gamma,
            ..self.clone()
        }
    }
}

/// Stationary transition tensor plus a reward with an optional linear crowd
/// term: `r(s, a, mu) = base(s, a) - crowd * mu(s)`. Transitions may also mix
/// toward the population: `P(.|s,a,mu) = (1 - herd) P0(.|s,a) + herd * mu`.
///
/// Mostly useful for randomized tests and small toy games.
#[derive(Clone, Debug)]
pub struct TabularModel {
    pub n_states: usize,
    pub n_actions: usize,
    /// Row-major `[s][a][s']`.
    pub transitions: Vec<f64>,
    /// Row-major `[s][a]`.
    pub base_reward: Vec<f64>,
    pub crowd: f64,
    pub herd: f64,
}

impl TabularModel {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        base_reward: Vec<f64>,
    ) -> Result<Self> {
        if transitions.len() != n_states * n_actions * n_states {
            return Err(Error::invalid("transition tensor has the wrong size"));
        }
        if base_reward.len() != n_states * n_actions {
            return Err(Error::invalid("reward table has the wrong size"));
        }
        for (i, row) in transitions.chunks(n_states).enumerate() {
            let mass: f64 = row.iter().sum();
            if row.iter().any(|&p| p < 0.0) || (mass - 1.0).abs() > ROW_MASS_TOL {
                return Err(Error::invalid(format!(
                    "transition row ({}, {}) is not a distribution",
                    i / n_actions,
                    i % n_actions
                )));
            }
        }
        Ok(TabularModel {
            n_states,
            n_actions,
            transitions,
            base_reward,
            crowd: 0.0,
            herd: 0.0,
        })
    }

    pub fn with_crowd(mut self, crowd: f64) -> Self {
        self.crowd = crowd;
        self
    }

    pub fn with_herd(mut self, herd: f64) -> Self {
        self.herd = herd;
        self
    }

    /// `max |r|` over the simplex.
    pub fn reward_bound(&self) -> f64 {
        self.base_reward
            .iter()
            .map(|r| r.abs().max((r - self.crowd).abs()))
            .fold(0.0, f64::max)
    }

    pub fn into_mdp(self, gamma: f64) -> Result<MfMdp> {
        let bound = self.reward_bound();
        MfMdp::new(self, gamma, bound)
    }
}

impl MeanFieldModel for TabularModel {
    fn n_states(&self) -> usize {
        self.n_states
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn transition(&self, s: usize, a: usize, mu: &Dist, out: &mut [f64]) {
        let base = (s * self.n_actions + a) * self.n_states;
        let row = &self.transitions[base..base + self.n_states];
        for (t, o) in out.iter_mut().enumerate() {
            *o = (1.0 - self.herd) * row[t] + self.herd * mu[t];
        }
    }

    fn reward(&self, s: usize, a: usize, mu: &Dist) -> f64 {
        self.base_reward[s * self.n_actions + a] - self.crowd * mu[s]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> TabularModel {
        TabularModel::new(
            2,
            2,
            vec![1.0, 0.0, 0.0, 1.0, 0.5, 0.5, 0.0, 1.0],
            vec![1.0, 0.0, 0.0, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn freeze_keeps_sparse_rows() {
        let mdp = two_state().into_mdp(0.9).unwrap();
        let f = mdp.freeze(&Dist::uniform(2)).unwrap();
        assert_eq!(f.successors(0, 0), &[(0, 1.0)]);
        assert_eq!(f.successors(1, 0), &[(0, 0.5), (1, 0.5)]);
        assert_eq!(f.reward(1, 1), 0.5);
    }

    #[test]
    fn rejects_bad_discount_and_shapes() {
        assert!(two_state().into_mdp(1.0).is_err());
        assert!(TabularModel::new(2, 1, vec![0.5, 0.4, 1.0, 0.0], vec![0.0, 0.0]).is_err());
        let mdp = two_state().into_mdp(0.5).unwrap();
        assert!(mdp.freeze(&Dist::uniform(3)).is_err());
    }

    #[test]
    fn sample_index_inverse_cdf() {
        let p = [0.0, 0.25, 0.0, 0.75];
        assert_eq!(sample_index(&p, 0.0), 1);
        assert_eq!(sample_index(&p, 0.2499), 1);
        assert_eq!(sample_index(&p, 0.25), 3);
        assert_eq!(sample_index(&p, 0.99999999), 3);
    }

    #[test]
    fn crowd_and_herd_terms() {
        let m = two_state().with_crowd(2.0).with_herd(0.5);
        let mu = Dist::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(m.reward(0, 0, &mu), 1.0 - 0.5);
        let mut row = [0.0; 2];
        m.transition(0, 0, &mu, &mut row);
        assert_eq!(row, [0.5 + 0.125, 0.375]);
    }
}
