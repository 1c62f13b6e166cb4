//! Model-based solvers: the softmax mirror-ascent policy update, exact TRPO
//! at a fixed mean field, the exact MF-TRPO outer loop and the exact
//! best-response fixed-point iteration.

use std::time::Instant;

use crate::dynamics::{kernel_power_apply, EXACT_TOL, FIXED_POINT_TOL};
use crate::error::{Error, Result};
use crate::eval::exploitability;
use crate::mdp::{FrozenMdp, MfMdp};
use crate::schedule::StepSchedule;
use crate::trace::{Recorder, RunTrace, TraceOptions};
use crate::types::{Dist, Policy, PROB_FLOOR};

/// Occupation mass below which a state counts as unvisited.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

/// TRPO learning rate `1 / (eta (ell + 2))`.
pub fn learning_rate(eta: f64, ell: usize) -> f64 {
    1.0 / (eta * (ell as f64 + 2.0))
}

/// Softmax mirror-ascent step on the rows listed in `states`:
/// `pi'(a|s) ~ pi(a|s) exp(alpha_ell (Q(s,a) - eta ln pi(a|s)))`.
///
/// `q` is row-major `|S| x |A|`. Other rows are copied unchanged.
pub fn policy_update(pi: &Policy, q: &[f64], eta: f64, ell: usize, states: &[usize]) -> Result<Policy> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::invalid(format!("policy update needs eta > 0, got {eta}")));
    }
    let na = pi.n_actions();
    if q.len() != pi.n_states() * na {
        return Err(Error::invalid(format!(
            "Q table has {} entries, policy is {}x{}",
            q.len(),
            pi.n_states(),
            na
        )));
    }
    let alpha = learning_rate(eta, ell);
    let mut out = pi.clone();
    let mut logits = vec![0.0; na];
    for &s in states {
        if s >= pi.n_states() {
            return Err(Error::invalid(format!("state {s} out of range")));
        }
        let q_row = &q[s * na..(s + 1) * na];
        if let Some(bad) = q_row.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite Q value {bad} at state {s}")));
        }
        let row = pi.row(s);
        for a in 0..na {
            let lp = row[a].ln();
            logits[a] = lp + alpha * (q_row[a] - eta * lp);
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let new_row = out.row_mut(s);
        let mut sum = 0.0;
        for a in 0..na {
            new_row[a] = (logits[a] - max).exp();
            sum += new_row[a];
        }
        for p in new_row.iter_mut() {
            *p = (*p / sum).max(PROB_FLOOR);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ExactTrpoConfig {
    pub eta: f64,
    /// Number of policy updates `L`.
    pub iterations: usize,
    /// Starting policy; uniform when absent.
    pub warm_start: Option<Policy>,
    /// Initial distribution of the occupation measure that decides which
    /// states get updated; the mean field itself when absent.
    pub restart: Option<Dist>,
}

impl ExactTrpoConfig {
    pub fn new(eta: f64, iterations: usize) -> Self {
        ExactTrpoConfig {
            eta,
            iterations,
            warm_start: None,
            restart: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("TRPO needs at least one iteration"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrpoRun {
    /// `pi_L`.
    pub policy: Policy,
    /// `J(pi_ell, mu, mu)` for `ell = 0..=L`.
    pub values: Vec<f64>,
}

pub fn exact_trpo(mdp: &MfMdp, mu: &Dist, cfg: &ExactTrpoConfig) -> Result<TrpoRun> {
    let frozen = mdp.freeze(mu)?;
    trpo_on(&frozen, mu, cfg, cfg.warm_start.as_ref())
}

fn trpo_on(frozen: &FrozenMdp, mu: &Dist, cfg: &ExactTrpoConfig, warm: Option<&Policy>) -> Result<TrpoRun> {
    cfg.validate()?;
    let (ns, na) = (frozen.n_states(), frozen.n_actions());
    let mut pi = match warm {
        Some(p) => {
            p.check_shape(ns, na)?;
            p.clone()
        }
        None => Policy::uniform(ns, na),
    };
    let restart = cfg.restart.as_ref().unwrap_or(mu);
    let mut values = Vec::with_capacity(cfg.iterations + 1);
    for ell in 0..cfg.iterations {
        let v = frozen.evaluate(&pi, cfg.eta)?;
        values.push(mu.dot(&v.j));
        let occ = frozen.occupation_measure(&pi, restart)?;
        let support: Vec<usize> = (0..ns).filter(|&s| occ.marginal[s] > SUPPORT_THRESHOLD).collect();
        pi = policy_update(&pi, &v.q, cfg.eta, ell, &support)?;
        debug_assert!(pi.min_entry() > 0.0);
    }
    values.push(mu.dot(&frozen.evaluate(&pi, cfg.eta)?.j));
    Ok(TrpoRun { policy: pi, values })
}

#[derive(Clone, Debug)]
pub struct MftrpoConfig {
    pub trpo: ExactTrpoConfig,
    /// Outer iterations `K`.
    pub outer_iters: usize,
    pub beta: StepSchedule,
    /// Kernel applications `M` per population update.
    pub pushforward_steps: usize,
    pub mu0: Dist,
    /// Start each inner solve from the previous outer policy.
    pub warm_start: bool,
    pub trace: TraceOptions,
}

impl MftrpoConfig {
    pub fn new(trpo: ExactTrpoConfig, outer_iters: usize, beta: StepSchedule, pushforward_steps: usize, mu0: Dist) -> Self {
        MftrpoConfig {
            trpo,
            outer_iters,
            beta,
            pushforward_steps,
            mu0,
            warm_start: true,
            trace: TraceOptions::default(),
        }
    }

    fn validate(&self, mdp: &MfMdp) -> Result<()> {
        self.trpo.validate()?;
        self.beta.validate()?;
        mdp.check_dist(&self.mu0, "initial mean field")?;
        if self.outer_iters == 0 {
            return Err(Error::invalid("outer loop needs K >= 1"));
        }
        if self.pushforward_steps == 0 {
            return Err(Error::invalid("population update needs M >= 1"));
        }
        Ok(())
    }
}

/// Exact MF-TRPO. Record `k` holds metrics of `(pi_k, mu_k)`; the final
/// policy is one more TRPO solve against `mu_K`.
pub fn exact_mftrpo(mdp: &MfMdp, cfg: &MftrpoConfig) -> Result<RunTrace> {
    cfg.validate(mdp)?;
    let started = Instant::now();
    let rec = Recorder {
        mdp,
        eta: cfg.trpo.eta,
        big_k: cfg.outer_iters,
        opts: &cfg.trace,
        started,
    };
    let mut pi = cfg
        .trpo
        .warm_start
        .clone()
        .unwrap_or_else(|| Policy::uniform(mdp.n_states(), mdp.n_actions()));
    let mut mu = cfg.mu0.clone();
    let initial = rec.record(0, &pi, &mu, 0.0).map_err(Error::at(0))?;
    let mut trace = RunTrace {
        algorithm: "exact-mftrpo".into(),
        initial,
        records: Vec::with_capacity(cfg.outer_iters),
        mu_snapshots: Vec::new(),
        policy_snapshots: Vec::new(),
        final_mu: mu.clone(),
        final_policy: pi.clone(),
        final_exploitability: None,
        notes: vec![("final_policy".into(), "trpo(mu_K)".into())],
    };
    if cfg.trace.wants_snapshot(0) {
        trace.mu_snapshots.push((0, mu.clone()));
        trace.policy_snapshots.push((0, pi.clone()));
    }
    for k in 1..=cfg.outer_iters {
        let step = || -> Result<(Policy, Dist)> {
            let frozen = mdp.freeze(&mu)?;
            let warm = if cfg.warm_start { Some(&pi) } else { cfg.trpo.warm_start.as_ref() };
            let next_pi = trpo_on(&frozen, &mu, &cfg.trpo, warm)?.policy;
            let kernel = frozen.induced_kernel(&next_pi)?;
            let target = kernel_power_apply(&mu, &kernel, cfg.pushforward_steps)?;
            Ok((next_pi, mu.damped_toward(&target, cfg.beta.at(k))))
        };
        let (next_pi, next_mu) = step().map_err(Error::at(k))?;
        let drift = next_mu.l1_distance(&mu);
        pi = next_pi;
        mu = next_mu;
        debug_assert!(pi.min_entry() > 0.0);
        trace.records.push(rec.record(k, &pi, &mu, drift).map_err(Error::at(k))?);
        if cfg.trace.wants_snapshot(k) {
            trace.mu_snapshots.push((k, mu.clone()));
            trace.policy_snapshots.push((k, pi.clone()));
        }
    }
    let k_final = cfg.outer_iters + 1;
    let finish = || -> Result<(Policy, f64)> {
        let frozen = mdp.freeze(&mu)?;
        let warm = if cfg.warm_start { Some(&pi) } else { cfg.trpo.warm_start.as_ref() };
        let last = trpo_on(&frozen, &mu, &cfg.trpo, warm)?.policy;
        let phi = exploitability(mdp, &last, &mu, cfg.trpo.eta, cfg.trace.tol)?.phi;
        Ok((last, phi))
    };
    let (last, phi) = finish().map_err(Error::at(k_final))?;
    trace.final_mu = mu;
    trace.final_policy = last;
    trace.final_exploitability = Some(phi);
    Ok(trace)
}

/// Damped iteration `mu_k = mu_{k-1} + beta_k (mu_{k-1} (P^{pi}_{mu_{k-1}})^M - mu_{k-1})`
/// with `pi` the exact regularized best response to `mu_{k-1}`.
pub fn exact_fixed_point(
    mdp: &MfMdp,
    mu0: &Dist,
    beta: StepSchedule,
    big_m: usize,
    big_k: usize,
    eta: f64,
) -> Result<Dist> {
    exact_fixed_point_observed(mdp, mu0, beta, big_m, big_k, eta, |_, _| {})
}

/// [`exact_fixed_point`] calling `observe(k, mu_k)` after every update.
pub fn exact_fixed_point_observed(
    mdp: &MfMdp,
    mu0: &Dist,
    beta: StepSchedule,
    big_m: usize,
    big_k: usize,
    eta: f64,
    mut observe: impl FnMut(usize, &Dist),
) -> Result<Dist> {
    beta.validate()?;
    mdp.check_dist(mu0, "initial mean field")?;
    let mut mu = mu0.clone();
    for k in 1..=big_k {
        let step = || -> Result<Dist> {
            let frozen = mdp.freeze(&mu)?;
            let (_, br) = frozen.soft_value_iteration(eta, FIXED_POINT_TOL * 1e-2)?;
            let kernel = frozen.induced_kernel(&br)?;
            let target = kernel_power_apply(&mu, &kernel, big_m)?;
            Ok(mu.damped_toward(&target, beta.at(k)))
        };
        mu = step().map_err(Error::at(k))?;
        observe(k, &mu);
    }
    Ok(mu)
}

/// Exact-fixed-point iteration packaged as a [`RunTrace`] (policy `pi_k` is
/// the best response to `mu_{k-1}`).
pub fn exact_fixed_point_trace(
    mdp: &MfMdp,
    mu0: &Dist,
    beta: StepSchedule,
    big_m: usize,
    big_k: usize,
    eta: f64,
    opts: &TraceOptions,
) -> Result<RunTrace> {
    beta.validate()?;
    mdp.check_dist(mu0, "initial mean field")?;
    let rec = Recorder {
        mdp,
        eta,
        big_k,
        opts,
        started: Instant::now(),
    };
    let mut mu = mu0.clone();
    let mut pi = mdp.freeze(&mu)?.soft_value_iteration(eta, EXACT_TOL)?.1;
    let initial = rec.record(0, &pi, &mu, 0.0).map_err(Error::at(0))?;
    let mut trace = RunTrace {
        algorithm: "exact-fixed-point".into(),
        initial,
        records: Vec::with_capacity(big_k),
        mu_snapshots: Vec::new(),
        policy_snapshots: Vec::new(),
        final_mu: mu.clone(),
        final_policy: pi.clone(),
        final_exploitability: None,
        notes: vec![("final_policy".into(), "best_response(mu_K)".into())],
    };
    if opts.wants_snapshot(0) {
        trace.mu_snapshots.push((0, mu.clone()));
        trace.policy_snapshots.push((0, pi.clone()));
    }
    for k in 1..=big_k {
        let step = || -> Result<(Policy, Dist)> {
            let frozen = mdp.freeze(&mu)?;
            let (_, br) = frozen.soft_value_iteration(eta, EXACT_TOL)?;
            let kernel = frozen.induced_kernel(&br)?;
            let target = kernel_power_apply(&mu, &kernel, big_m)?;
            Ok((br, mu.damped_toward(&target, beta.at(k))))
        };
        let (br, next) = step().map_err(Error::at(k))?;
        let drift = next.l1_distance(&mu);
        pi = br;
        mu = next;
        trace.records.push(rec.record(k, &pi, &mu, drift).map_err(Error::at(k))?);
        if opts.wants_snapshot(k) {
            trace.mu_snapshots.push((k, mu.clone()));
            trace.policy_snapshots.push((k, pi.clone()));
        }
    }
    let last = mdp.freeze(&mu)?.soft_value_iteration(eta, EXACT_TOL)?.1;
    trace.final_exploitability = Some(exploitability(mdp, &last, &mu, eta, opts.tol)?.phi);
    trace.final_mu = mu;
    trace.final_policy = last;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::TabularModel;

    #[test]
    fn update_closed_form() {
        let pi = Policy::uniform(1, 2);
        let out = policy_update(&pi, &[1.0, 0.0], 1.0, 0, &[0]).unwrap();
        // e^{1/2} / (1 + e^{1/2})
        assert!((out.prob(0, 0) - 0.622_459_331_201_854_6).abs() < 1e-12);
        assert!((out.prob(0, 1) - 0.377_540_668_798_145_4).abs() < 1e-12);
    }

    #[test]
    fn update_uniform_stays_uniform_for_flat_q() {
        let pi = Policy::uniform(2, 3);
        let out = policy_update(&pi, &[4.0; 6], 0.3, 5, &[0, 1]).unwrap();
        for &p in out.as_slice() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn update_only_touches_listed_rows() {
        let pi = Policy::uniform(2, 2);
        let out = policy_update(&pi, &[1.0, 0.0, 1.0, 0.0], 0.5, 0, &[1]).unwrap();
        assert_eq!(out.row(0), pi.row(0));
        assert!(out.prob(1, 0) > 0.5);
    }

    #[test]
    fn update_rejects_non_finite_q() {
        let pi = Policy::uniform(1, 2);
        assert!(policy_update(&pi, &[f64::NAN, 0.0], 1.0, 0, &[0]).is_err());
        assert!(policy_update(&pi, &[1.0, 0.0], 0.0, 0, &[0]).is_err());
    }

    #[test]
    fn one_action_trpo_is_trivial() {
        let mdp = TabularModel::new(1, 1, vec![1.0], vec![2.0]).unwrap().into_mdp(0.5).unwrap();
        let run = exact_trpo(&mdp, &Dist::uniform(1), &ExactTrpoConfig::new(0.1, 1)).unwrap();
        assert_eq!(run.policy, Policy::uniform(1, 1));
        assert_eq!(run.values.len(), 2);
    }

    #[test]
    fn zero_step_freezes_population() {
        let mdp = TabularModel::new(2, 2, vec![0.9, 0.1, 0.1, 0.9, 0.5, 0.5, 0.2, 0.8], vec![1.0, 0.0, 0.0, 1.0])
            .unwrap()
            .with_crowd(0.5)
            .into_mdp(0.9)
            .unwrap();
        let mu0 = Dist::new(vec![0.8, 0.2]).unwrap();
        let mut cfg = MftrpoConfig::new(ExactTrpoConfig::new(0.2, 3), 4, StepSchedule::Constant(0.0), 2, mu0.clone());
        cfg.trace.cadence = crate::trace::EvalCadence::Never;
        let trace = exact_mftrpo(&mdp, &cfg).unwrap();
        assert_eq!(trace.records.len(), 4);
        assert_eq!(trace.final_mu, mu0);
        assert!(trace.records.iter().all(|r| r.mu_drift == 0.0));
    }

    #[test]
    fn config_validation() {
        let mdp = TabularModel::new(1, 1, vec![1.0], vec![2.0]).unwrap().into_mdp(0.5).unwrap();
        let mut cfg = MftrpoConfig::new(ExactTrpoConfig::new(0.1, 1), 0, StepSchedule::Constant(0.1), 1, Dist::uniform(1));
        assert!(exact_mftrpo(&mdp, &cfg).is_err());
        cfg.outer_iters = 1;
        cfg.pushforward_steps = 0;
        assert!(exact_mftrpo(&mdp, &cfg).is_err());
        cfg.pushforward_steps = 1;
        cfg.mu0 = Dist::uniform(2);
        assert!(exact_mftrpo(&mdp, &cfg).is_err());
    }
}
