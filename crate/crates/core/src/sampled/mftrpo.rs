use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use super::oracle::{sample_action, EnvOracle};
use super::trpo::{sample_based_trpo_at, SampledTrpoConfig, BLOCK_SIZE};
use crate::error::{Error, Result};
use crate::mdp::MfMdp;
use crate::rng::{blocks, SeedPath, StreamRng};
use crate::schedule::StepSchedule;
use crate::trace::{IterRecord, Recorder, RunTrace, TraceOptions};
use crate::types::{Dist, Policy};

/// `(pi_j, mu_j)` for `j = 1, 2, ...`; entry `j - 1` holds iteration `j`.
pub type History = [(Policy, Dist)];

/// `Pr(l) = beta_l prod_{j=l+1..k} (1 - beta_j)` for `l = 1..=k`, and
/// `Pr(0) = prod_{j=1..k} (1 - beta_j)`.
pub fn level_probabilities(beta: &StepSchedule, k: usize) -> Vec<f64> {
    let mut probs = vec![0.0; k + 1];
    let mut tail = 1.0;
    for ell in (1..=k).rev() {
        let b = beta.at(ell);
        probs[ell] = b * tail;
        tail *= 1.0 - b;
    }
    probs[0] = tail;
    let total: f64 = probs.iter().sum();
    assert!((total - 1.0).abs() <= 1e-12, "level probabilities sum to {total}");
    probs
}

/// Draws a level from `Cat_k` with one uniform variate, walking down from `k`.
pub fn sample_level(beta: &StepSchedule, k: usize, rng: &mut StreamRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut tail = 1.0;
    for ell in (1..=k).rev() {
        let b = beta.at(ell);
        acc += b * tail;
        if u < acc {
            return ell;
        }
        tail *= 1.0 - b;
    }
    0
}

/// Resets, then runs `big_m` steps under each of the first `level` history
/// kernels `P^{pi_j}_{mu_j}` in order.
pub fn init_state_from_history(
    env: &dyn EnvOracle,
    history: &History,
    level: usize,
    big_m: usize,
    rng: &mut StreamRng,
) -> Result<usize> {
    if level > history.len() {
        return Err(Error::invalid(format!(
            "level {level} exceeds history length {}",
            history.len()
        )));
    }
    let mut s = env.reset(rng);
    for (pi, mu) in &history[..level] {
        for _ in 0..big_m {
            let a = sample_action(pi, s, rng);
            s = env.next_state(s, a, mu, rng);
        }
    }
    Ok(s)
}

/// Empirical estimate of `mu_{k-1} (P^{pi_k}_{mu_{k-1}})^M` from `p`
/// particles. Each particle starts from a level drawn from `Cat_{k-1}` over
/// `history` (which must hold iterations `1..k`), then moves `big_m` steps
/// under `pi_k` with mean field `mu_prev`.
#[allow(clippy::too_many_arguments)]
pub fn population_pushforward_estimate(
    env: &dyn EnvOracle,
    pi_k: &Policy,
    mu_prev: &Dist,
    history: &History,
    beta: &StepSchedule,
    k: usize,
    big_m: usize,
    p: usize,
    root: &SeedPath,
) -> Result<Dist> {
    if p == 0 {
        return Err(Error::invalid("pushforward needs P >= 1 trajectories"));
    }
    if k == 0 || history.len() < k - 1 {
        return Err(Error::invalid(format!(
            "iteration {k} needs {} history entries, got {}",
            k.saturating_sub(1),
            history.len()
        )));
    }
    let ns = env.n_states();
    let parts = blocks(p, BLOCK_SIZE)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(b, _, len)| -> Result<Vec<u64>> {
            let mut rng = root.child(b).rng();
            let mut counts = vec![0u64; ns];
            for _ in 0..len {
                let level = sample_level(beta, k - 1, &mut rng);
                let mut s = init_state_from_history(env, history, level, big_m, &mut rng)?;
                for _ in 0..big_m {
                    let a = sample_action(pi_k, s, &mut rng);
                    s = env.next_state(s, a, mu_prev, &mut rng);
                }
                counts[s] += 1;
            }
            Ok(counts)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0u64; ns];
    for part in parts {
        for (c, x) in counts.iter_mut().zip(part) {
            *c += x;
        }
    }
    Ok(Dist::normalized(counts.into_iter().map(|c| c as f64 / p as f64).collect()))
}

#[derive(Clone, Debug)]
pub struct SampledMftrpoConfig {
    pub trpo: SampledTrpoConfig,
    /// Outer iterations `K`.
    pub outer_iters: usize,
    pub beta: StepSchedule,
    /// Steps `M` per level and per pushforward.
    pub pushforward_steps: usize,
    /// Population trajectories `P`.
    pub trajectories: usize,
    /// Initial mean field; the oracle's restart distribution when absent.
    pub mu0: Option<Dist>,
    /// Start each inner solve from the last iterate of the previous one.
    pub warm_start: bool,
    pub seed: u64,
    pub trace: TraceOptions,
}

impl SampledMftrpoConfig {
    pub fn new(
        trpo: SampledTrpoConfig,
        outer_iters: usize,
        beta: StepSchedule,
        pushforward_steps: usize,
        trajectories: usize,
        seed: u64,
    ) -> Self {
        SampledMftrpoConfig {
            trpo,
            outer_iters,
            beta,
            pushforward_steps,
            trajectories,
            mu0: None,
            warm_start: true,
            seed,
            trace: TraceOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        self.trpo.validate()?;
        self.beta.validate()?;
        if self.outer_iters == 0 {
            return Err(Error::invalid("outer loop needs K >= 1"));
        }
        if self.trajectories == 0 {
            return Err(Error::invalid("population update needs P >= 1 trajectories"));
        }
        Ok(())
    }
}

/// Sample-based MF-TRPO. The solver only touches `env`; when `model` is
/// given it is used for the exact diagnostics stored in the trace
/// (exploitability and value of the averaged mixture policy). Without a
/// model those fields are `None` / `NaN`.
///
/// Random streams: iteration `k` uses `seed/k/0` for TRPO and `seed/k/1` for
/// the population particles.
pub fn sample_based_mftrpo(env: &dyn EnvOracle, cfg: &SampledMftrpoConfig, model: Option<&MfMdp>) -> Result<RunTrace> {
    cfg.validate()?;
    let (ns, na) = (env.n_states(), env.n_actions());
    if let Some(m) = model {
        if m.n_states() != ns || m.n_actions() != na {
            return Err(Error::invalid("diagnostic model does not match the oracle"));
        }
    }
    let mu0 = match cfg.mu0.clone().or_else(|| env.reset_distribution()) {
        Some(mu) => mu,
        None => return Err(Error::invalid("oracle does not expose its restart distribution; set mu0")),
    };
    if mu0.len() != ns {
        return Err(Error::invalid(format!("initial mean field has {} states, oracle {ns}", mu0.len())));
    }
    let started = Instant::now();
    let recorder = model.map(|mdp| Recorder {
        mdp,
        eta: cfg.trpo.eta,
        big_k: cfg.outer_iters,
        opts: &cfg.trace,
        started,
    });
    let record = |k: usize, pi: &Policy, mu: &Dist, drift: f64| -> Result<IterRecord> {
        match &recorder {
            Some(r) => r.record(k, pi, mu, drift),
            None => Ok(IterRecord {
                k,
                exploitability: None,
                exploitability_unreg: None,
                mu_drift: drift,
                value: f64::NAN,
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
            }),
        }
    };
    let root = SeedPath::new(cfg.seed);
    let mut pi = cfg.trpo.warm_start.clone().unwrap_or_else(|| Policy::uniform(ns, na));
    let mut warm = pi.clone();
    let mut mu = mu0;
    let initial = record(0, &pi, &mu, 0.0).map_err(Error::at(0))?;
    let mut trace = RunTrace {
        algorithm: "sampled-mftrpo".into(),
        initial,
        records: Vec::with_capacity(cfg.outer_iters),
        mu_snapshots: Vec::new(),
        policy_snapshots: Vec::new(),
        final_mu: mu.clone(),
        final_policy: pi.clone(),
        final_exploitability: None,
        notes: vec![
            ("policy".into(), "average of mixture snapshots".into()),
            ("final_policy".into(), "pi_K".into()),
        ],
    };
    if cfg.trace.wants_snapshot(0) {
        trace.mu_snapshots.push((0, mu.clone()));
        trace.policy_snapshots.push((0, pi.clone()));
    }
    let mut history: Vec<(Policy, Dist)> = Vec::with_capacity(cfg.outer_iters);
    for k in 1..=cfg.outer_iters {
        let stream = root.child(k as u64);
        let step = || -> Result<(Policy, Policy, Dist)> {
            let mut trpo = cfg.trpo.clone();
            if cfg.warm_start {
                trpo.warm_start = Some(warm.clone());
            }
            let mix = sample_based_trpo_at(env, &mu, &trpo, &stream.child(0))?;
            let pi_k = mix.average();
            let e_k = population_pushforward_estimate(
                env,
                &pi_k,
                &mu,
                &history,
                &cfg.beta,
                k,
                cfg.pushforward_steps,
                cfg.trajectories,
                &stream.child(1),
            )?;
            Ok((mix.last().clone(), pi_k, mu.damped_toward(&e_k, cfg.beta.at(k))))
        };
        let (last, pi_k, next_mu) = step().map_err(Error::at(k))?;
        let drift = next_mu.l1_distance(&mu);
        warm = last;
        pi = pi_k;
        mu = next_mu;
        history.push((pi.clone(), mu.clone()));
        trace.records.push(record(k, &pi, &mu, drift).map_err(Error::at(k))?);
        if cfg.trace.wants_snapshot(k) {
            trace.mu_snapshots.push((k, mu.clone()));
            trace.policy_snapshots.push((k, pi.clone()));
        }
    }
    trace.final_exploitability = trace.records.last().and_then(|r| r.exploitability);
    trace.final_mu = mu;
    trace.final_policy = pi;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_probabilities_closed_form() {
        assert_eq!(level_probabilities(&StepSchedule::Constant(0.5), 2), vec![0.25, 0.25, 0.5]);
        assert_eq!(level_probabilities(&StepSchedule::Constant(1.0), 3), vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(level_probabilities(&StepSchedule::Constant(0.0), 3), vec![1.0, 0.0, 0.0, 0.0]);
        let h = level_probabilities(&StepSchedule::Harmonic(1.0), 50);
        // beta_1 = 1 empties level 0; the rest telescope to 1/k each
        assert_eq!(h[0], 0.0);
        assert!(h[1..].iter().all(|&p| (p - 1.0 / 50.0).abs() < 1e-12));
    }

    #[test]
    fn degenerate_levels() {
        let mut rng = SeedPath::new(3).rng();
        for _ in 0..100 {
            assert_eq!(sample_level(&StepSchedule::Constant(1.0), 7, &mut rng), 7);
            assert_eq!(sample_level(&StepSchedule::Constant(0.0), 7, &mut rng), 0);
        }
        assert_eq!(sample_level(&StepSchedule::Constant(0.3), 0, &mut rng), 0);
    }
}
