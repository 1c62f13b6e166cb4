use rand::Rng;
use rayon::prelude::*;

use super::oracle::{sample_action, EnvOracle};
use crate::error::{Error, Result};
use crate::exact::policy_update;
use crate::mdp::sample_index;
use crate::rng::{blocks, SeedPath, StreamRng};
use crate::types::{Dist, Policy};

/// Tasks per random stream in parallel loops. Fixed so that results do not
/// depend on the number of workers.
pub const BLOCK_SIZE: usize = 512;

/// Upper clamp applied to the theoretical sample sizes.
pub const SAMPLE_BOUND_CAP: f64 = 1e7;

/// Draws a state from the discounted occupation marginal of `pi` started at
/// the oracle's restart distribution (geometric stopping with rate `1 - gamma`).
pub fn sample_occupation_state(env: &dyn EnvOracle, pi: &Policy, mu: &Dist, rng: &mut StreamRng) -> usize {
    let s0 = env.reset(rng);
    occupation_from(env, pi, mu, s0, rng)
}

fn occupation_from(env: &dyn EnvOracle, pi: &Policy, mu: &Dist, s0: usize, rng: &mut StreamRng) -> usize {
    let stop = 1.0 - env.gamma();
    let mut s = s0;
    while rng.random::<f64>() >= stop {
        let a = sample_action(pi, s, rng);
        s = env.next_state(s, a, mu, rng);
    }
    s
}

/// Single-trajectory estimate of the regularized `Q(s, a)` truncated after
/// `t_rollout` steps.
pub fn rollout_q_estimate(
    env: &dyn EnvOracle,
    pi: &Policy,
    mu: &Dist,
    s: usize,
    a: usize,
    t_rollout: usize,
    eta: f64,
    rng: &mut StreamRng,
) -> Result<f64> {
    let log_pi = |s: usize, a: usize| pi.prob(s, a).ln();
    rollout_with(env, pi, &log_pi, mu, s, a, t_rollout, eta, rng)
}

#[allow(clippy::too_many_arguments)]
fn rollout_with(
    env: &dyn EnvOracle,
    pi: &Policy,
    log_pi: &dyn Fn(usize, usize) -> f64,
    mu: &Dist,
    s: usize,
    a: usize,
    t_rollout: usize,
    eta: f64,
    rng: &mut StreamRng,
) -> Result<f64> {
    let gamma = env.gamma();
    let (mut st, r0) = env.step(s, a, mu, rng);
    let mut total = r0;
    let mut disc = 1.0;
    for _ in 0..t_rollout {
        disc *= gamma;
        let at = sample_action(pi, st, rng);
        let (next, r) = env.step(st, at, mu, rng);
        total += disc * (r - eta * log_pi(st, at));
        st = next;
    }
    if !total.is_finite() {
        return Err(Error::Numerical(format!("rollout from ({s}, {a}) produced {total}")));
    }
    Ok(total)
}

/// The uniform mixture of the TRPO iterates `pi_0..pi_L`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixturePolicy {
    policies: Vec<Policy>,
}

impl MixturePolicy {
    pub fn new(policies: Vec<Policy>) -> Result<Self> {
        let first = policies.first().ok_or_else(|| Error::invalid("mixture needs at least one policy"))?;
        for p in &policies {
            p.check_shape(first.n_states(), first.n_actions())?;
        }
        Ok(MixturePolicy { policies })
    }

    pub fn policies(&self) -> &[Policy] {
        &self.policies
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn last(&self) -> &Policy {
        self.policies.last().unwrap()
    }

    /// Per-state average of the snapshot rows: the action marginal of the
    /// mixture when a fresh snapshot is drawn at every decision.
    pub fn average(&self) -> Policy {
        Policy::average(&self.policies).unwrap()
    }

    pub fn draw(&self, rng: &mut StreamRng) -> &Policy {
        &self.policies[rng.random_range(0..self.policies.len())]
    }
}

pub fn mixture_policy_draw(mix: &MixturePolicy, rng: &mut StreamRng) -> Policy {
    mix.draw(rng).clone()
}

/// How per-state rollout returns become a `Q` table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum QEstimator {
    /// `|A| sum(s, a) / n(s)`: unbiased under uniform action sampling;
    /// unsampled actions of a visited state get 0.
    #[default]
    ImportanceWeighted,
    /// `sum(s, a) / n(s, a)`; unsampled actions of a visited state get the
    /// state's overall mean return. Lower variance when `Q` has a large
    /// common offset across actions.
    ActionMean,
}

/// Where occupation-measure sampling starts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Restart {
    /// The oracle's `reset`.
    #[default]
    Oracle,
    /// A draw from the current mean field (uses the generative `step`
    /// access from arbitrary states).
    MeanField,
}

#[derive(Clone, Debug)]
pub struct SampledTrpoConfig {
    pub eta: f64,
    /// Number of policy updates `L`.
    pub iterations: usize,
    /// Target accuracy `epsilon`, used by the bound helpers.
    pub epsilon: f64,
    /// Failure probability `delta`, used by the bound helpers.
    pub delta: f64,
    /// Samples per update `I`.
    pub samples: usize,
    /// Rollout horizon `T`; derived from `epsilon` when absent.
    pub horizon: Option<usize>,
    /// Use `I * (l + 1)^2` samples at update `l`.
    pub grow_samples: bool,
    pub estimator: QEstimator,
    pub restart: Restart,
    pub warm_start: Option<Policy>,
    pub seed: u64,
}

impl SampledTrpoConfig {
    pub fn new(eta: f64, iterations: usize, samples: usize, seed: u64) -> Self {
        SampledTrpoConfig {
            eta,
            iterations,
            epsilon: 0.1,
            delta: 0.05,
            samples,
            horizon: None,
            grow_samples: false,
            estimator: QEstimator::default(),
            restart: Restart::default(),
            warm_start: None,
            seed,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!("eta must be > 0, got {}", self.eta)));
        }
        if !(self.epsilon > 0.0) || !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("epsilon must be > 0 and delta in (0, 1)"));
        }
        if self.samples == 0 {
            return Err(Error::invalid("sample-based TRPO needs I >= 1 samples per update"));
        }
        if self.horizon == Some(0) {
            return Err(Error::invalid("rollout horizon T must be >= 1"));
        }
        Ok(())
    }

    /// Horizon actually used for an oracle with these constants.
    pub fn horizon_for(&self, env: &dyn EnvOracle) -> usize {
        self.horizon.unwrap_or_else(|| {
            rollout_horizon(env.gamma(), env.n_actions(), env.reward_bound(), self.eta, self.epsilon)
        })
    }

    fn samples_at(&self, ell: usize) -> usize {
        if self.grow_samples {
            self.samples.saturating_mul((ell + 1) * (ell + 1))
        } else {
            self.samples
        }
    }
}

/// `T = ceil(ln(|A| (R + eta ln|A|) / epsilon) / (1 - gamma))`, at least 1:
/// the truncation bias of a rollout is then at most `epsilon`.
pub fn rollout_horizon(gamma: f64, n_actions: usize, reward_bound: f64, eta: f64, epsilon: f64) -> usize {
    let scale = n_actions as f64 * (reward_bound + eta * (n_actions as f64).ln());
    let t = ((scale / epsilon).ln() / (1.0 - gamma)).ceil();
    if t.is_finite() && t >= 1.0 {
        t as usize
    } else {
        1
    }
}

/// Sample count per update from the high-probability bound,
/// `|A|^2 (R^2 + eta^2 ln^2|A|) (|S| ln(2|A|) + ln(1/delta)) / ((1-gamma)^2 epsilon^2)`,
/// clamped to `1e7`.
pub fn trpo_samples_bound(
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    reward_bound: f64,
    eta: f64,
    epsilon: f64,
    delta: f64,
) -> usize {
    let na = n_actions as f64;
    let spread = reward_bound.powi(2) + (eta * na.ln()).powi(2);
    let conf = n_states as f64 * (2.0 * na).ln() + (1.0 / delta).ln();
    let i = na * na * spread * conf / ((1.0 - gamma).powi(2) * epsilon * epsilon);
    i.ceil().clamp(1.0, SAMPLE_BOUND_CAP) as usize
}

/// Population trajectories `P >= (64 / epsilon^2) ln(2 / delta)`, clamped to `1e7`.
pub fn population_samples_bound(epsilon: f64, delta: f64) -> usize {
    (64.0 / (epsilon * epsilon) * (2.0 / delta).ln())
        .ceil()
        .clamp(1.0, SAMPLE_BOUND_CAP) as usize
}

struct Tally {
    sum: Vec<f64>,
    count: Vec<u64>,
}

/// Sample-based TRPO at a fixed mean field, seeded from `cfg.seed`.
pub fn sample_based_trpo(env: &dyn EnvOracle, mu: &Dist, cfg: &SampledTrpoConfig) -> Result<MixturePolicy> {
    sample_based_trpo_at(env, mu, cfg, &SeedPath::new(cfg.seed))
}

/// Update `l` draws its samples from streams `root/l/block`.
pub(crate) fn sample_based_trpo_at(
    env: &dyn EnvOracle,
    mu: &Dist,
    cfg: &SampledTrpoConfig,
    root: &SeedPath,
) -> Result<MixturePolicy> {
    cfg.validate()?;
    let (ns, na) = (env.n_states(), env.n_actions());
    if mu.len() != ns {
        return Err(Error::invalid(format!("mean field has {} states, oracle {}", mu.len(), ns)));
    }
    let mut pi = match &cfg.warm_start {
        Some(p) => {
            p.check_shape(ns, na)?;
            p.clone()
        }
        None => Policy::uniform(ns, na),
    };
    let horizon = cfg.horizon_for(env);
    let mut snapshots = Vec::with_capacity(cfg.iterations + 1);
    snapshots.push(pi.clone());
    for ell in 0..cfg.iterations {
        let log_pi: Vec<f64> = pi.as_slice().iter().map(|p| p.ln()).collect();
        let lp = |s: usize, a: usize| log_pi[s * na + a];
        let stream = root.child(ell as u64);
        let n = cfg.samples_at(ell);
        let parts = blocks(n, BLOCK_SIZE)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(b, _, len)| -> Result<Tally> {
                let mut rng = stream.child(b).rng();
                let mut tally = Tally {
                    sum: vec![0.0; ns * na],
                    count: vec![0; ns * na],
                };
                for _ in 0..len {
                    let s0 = match cfg.restart {
                        Restart::Oracle => env.reset(&mut rng),
                        Restart::MeanField => sample_index(mu.as_slice(), rng.random()),
                    };
                    let s = occupation_from(env, &pi, mu, s0, &mut rng);
                    let a = rng.random_range(0..na);
                    let q = rollout_with(env, &pi, &lp, mu, s, a, horizon, cfg.eta, &mut rng)?;
                    tally.sum[s * na + a] += q;
                    tally.count[s * na + a] += 1;
                }
                Ok(tally)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sum = vec![0.0; ns * na];
        let mut count = vec![0u64; ns * na];
        for part in parts {
            for i in 0..ns * na {
                sum[i] += part.sum[i];
                count[i] += part.count[i];
            }
        }
        let mut q_hat = vec![0.0; ns * na];
        let mut visited = Vec::new();
        for s in 0..ns {
            let total: u64 = count[s * na..(s + 1) * na].iter().sum();
            if total > 0 {
                visited.push(s);
                let row = s * na..(s + 1) * na;
                match cfg.estimator {
                    QEstimator::ImportanceWeighted => {
                        for i in row {
                            q_hat[i] = na as f64 * sum[i] / total as f64;
                        }
                    }
                    QEstimator::ActionMean => {
                        let mean = sum[row.clone()].iter().sum::<f64>() / total as f64;
                        for i in row {
                            q_hat[i] = if count[i] > 0 { sum[i] / count[i] as f64 } else { mean };
                        }
                    }
                }
            }
        }
        pi = policy_update(&pi, &q_hat, cfg.eta, ell, &visited)?;
        debug_assert!(pi.min_entry() > 0.0);
        snapshots.push(pi.clone());
    }
    MixturePolicy::new(snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::TabularModel;
    use crate::sampled::make_oracle;

    fn loop_env(gamma: f64) -> impl EnvOracle {
        let mdp = TabularModel::new(1, 1, vec![1.0], vec![1.0]).unwrap().into_mdp(gamma).unwrap();
        make_oracle(&mdp, &Dist::uniform(1)).unwrap()
    }

    #[test]
    fn rollout_on_constant_reward() {
        let env = loop_env(0.5);
        let pi = Policy::uniform(1, 1);
        let mu = Dist::uniform(1);
        let mut rng = SeedPath::new(0).rng();
        let q = rollout_q_estimate(&env, &pi, &mu, 0, 0, 1, 0.3, &mut rng).unwrap();
        assert_eq!(q, 1.5);
        let q = rollout_q_estimate(&env, &pi, &mu, 0, 0, 4, 0.0, &mut rng).unwrap();
        assert!((q - (1.0 - 0.5f64.powi(5)) / 0.5).abs() < 1e-15);
    }

    #[test]
    fn horizon_formula() {
        // ln(2 * 1 / 0.1) / 0.1 = 29.96
        assert_eq!(rollout_horizon(0.9, 1, 2.0, 0.5, 0.1), 30);
        assert_eq!(rollout_horizon(0.9, 1, 0.01, 0.0, 1.0), 1);
    }

    #[test]
    fn bounds_are_clamped() {
        assert_eq!(trpo_samples_bound(25, 5, 0.99, 10.0, 0.1, 1e-3, 0.01), 10_000_000);
        let p = population_samples_bound(0.1, 0.05);
        assert_eq!(p, (6400.0 * 40f64.ln()).ceil() as usize);
    }

    #[test]
    fn zero_iterations_keep_start_policy() {
        let env = loop_env(0.9);
        let cfg = SampledTrpoConfig::new(0.1, 0, 10, 0);
        let mix = sample_based_trpo(&env, &Dist::uniform(1), &cfg).unwrap();
        assert_eq!(mix.len(), 1);
        let cfg = SampledTrpoConfig::new(0.1, 1, 0, 0);
        assert!(sample_based_trpo(&env, &Dist::uniform(1), &cfg).is_err());
    }
}
