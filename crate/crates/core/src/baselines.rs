//! Fictitious play and online mirror descent on the exact model.
//!
//! OMD uses the same damped `M`-step population update as exact MF-TRPO.
//! Fictitious play pushes its running average `M` steps and lets the uniform
//! averaging act as the step size.

use std::time::Instant;

use crate::dynamics::{kernel_power_apply, stationary_distribution, EXACT_TOL};
use crate::error::{Error, Result};
use crate::mdp::MfMdp;
use crate::schedule::StepSchedule;
use crate::trace::{Recorder, RunTrace, TraceOptions};
use crate::types::{Dist, Policy};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    FictitiousPlay,
    OnlineMirrorDescent,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::FictitiousPlay => "fp",
            Baseline::OnlineMirrorDescent => "omd",
        }
    }
}

/// Population target of a fictitious-play step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FpPopulation {
    /// `M`-step pushforward of the running average.
    #[default]
    PushForward,
    /// Stationary distribution of the best response's kernel.
    Stationary,
}

#[derive(Clone, Debug)]
pub struct BaselineConfig {
    pub algorithm: Baseline,
    pub outer_iters: usize,
    pub eta: f64,
    /// OMD step on the cumulative `Q` table.
    pub learning_rate: f64,
    pub mu0: Dist,
    /// Population step of OMD; fictitious play averages with `1/k` instead.
    pub beta: StepSchedule,
    pub pushforward_steps: usize,
    pub fp_population: FpPopulation,
    pub trace: TraceOptions,
}

impl BaselineConfig {
    pub fn new(algorithm: Baseline, outer_iters: usize, eta: f64, mu0: Dist) -> Self {
        BaselineConfig {
            algorithm,
            outer_iters,
            eta,
            learning_rate: 1.0,
            mu0,
            beta: StepSchedule::Constant(0.01),
            pushforward_steps: 1,
            fp_population: FpPopulation::default(),
            trace: TraceOptions::default(),
        }
    }

    fn validate(&self, mdp: &MfMdp, expected: Baseline) -> Result<()> {
        if self.algorithm != expected {
            return Err(Error::invalid(format!(
                "config is for {}, not {}",
                self.algorithm.name(),
                expected.name()
            )));
        }
        if self.outer_iters == 0 {
            return Err(Error::invalid("baseline needs K >= 1"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!("eta must be > 0, got {}", self.eta)));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.pushforward_steps == 0 {
            return Err(Error::invalid("population update needs M >= 1"));
        }
        self.beta.validate()?;
        mdp.check_dist(&self.mu0, "initial mean field")
    }
}

fn new_trace(name: &str, initial: crate::trace::IterRecord, mu: &Dist, pi: &Policy) -> RunTrace {
    RunTrace {
        algorithm: name.into(),
        initial,
        records: Vec::new(),
        mu_snapshots: Vec::new(),
        policy_snapshots: Vec::new(),
        final_mu: mu.clone(),
        final_policy: pi.clone(),
        final_exploitability: None,
        notes: Vec::new(),
    }
}

/// `pi_k` is the regularized best response to the running average
/// `bar mu_{k-1}`; the trace records `(pi_k, bar mu_k)`.
pub fn fictitious_play(mdp: &MfMdp, cfg: &BaselineConfig) -> Result<RunTrace> {
    cfg.validate(mdp, Baseline::FictitiousPlay)?;
    let rec = Recorder {
        mdp,
        eta: cfg.eta,
        big_k: cfg.outer_iters,
        opts: &cfg.trace,
        started: Instant::now(),
    };
    let mut avg = cfg.mu0.clone();
    let mut pi = Policy::uniform(mdp.n_states(), mdp.n_actions());
    let initial = rec.record(0, &pi, &avg, 0.0).map_err(Error::at(0))?;
    let mut trace = new_trace("fp", initial, &avg, &pi);
    trace.notes.push(("population".into(), format!("{:?}", cfg.fp_population)));
    if cfg.trace.wants_snapshot(0) {
        trace.mu_snapshots.push((0, avg.clone()));
        trace.policy_snapshots.push((0, pi.clone()));
    }
    for k in 1..=cfg.outer_iters {
        let step = || -> Result<(Policy, Dist)> {
            let frozen = mdp.freeze(&avg)?;
            let (_, br) = frozen.soft_value_iteration(cfg.eta, EXACT_TOL)?;
            let kernel = frozen.induced_kernel(&br)?;
            let mu_k = match cfg.fp_population {
                FpPopulation::PushForward => kernel_power_apply(&avg, &kernel, cfg.pushforward_steps)?,
                FpPopulation::Stationary => stationary_distribution(&kernel, EXACT_TOL)?,
            };
            Ok((br, avg.damped_toward(&mu_k, 1.0 / k as f64)))
        };
        let (br, next) = step().map_err(Error::at(k))?;
        let drift = next.l1_distance(&avg);
        pi = br;
        avg = next;
        trace.records.push(rec.record(k, &pi, &avg, drift).map_err(Error::at(k))?);
        if cfg.trace.wants_snapshot(k) {
            trace.mu_snapshots.push((k, avg.clone()));
            trace.policy_snapshots.push((k, pi.clone()));
        }
    }
    trace.final_exploitability = trace.records.last().and_then(|r| r.exploitability);
    trace.final_mu = avg;
    trace.final_policy = pi;
    Ok(trace)
}

/// `Y_k = Y_{k-1} + lr Q^{pi_{k-1}}_{mu_{k-1}}`, `pi_k = softmax(Y_k / eta)`,
/// then the damped population update under `pi_k`.
pub fn online_mirror_descent(mdp: &MfMdp, cfg: &BaselineConfig) -> Result<RunTrace> {
    cfg.validate(mdp, Baseline::OnlineMirrorDescent)?;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let rec = Recorder {
        mdp,
        eta: cfg.eta,
        big_k: cfg.outer_iters,
        opts: &cfg.trace,
        started: Instant::now(),
    };
    let mut mu = cfg.mu0.clone();
    let mut pi = Policy::uniform(ns, na);
    let mut cumulative = vec![0.0; ns * na];
    let initial = rec.record(0, &pi, &mu, 0.0).map_err(Error::at(0))?;
    let mut trace = new_trace("omd", initial, &mu, &pi);
    trace.notes.push(("learning_rate".into(), cfg.learning_rate.to_string()));
    if cfg.trace.wants_snapshot(0) {
        trace.mu_snapshots.push((0, mu.clone()));
        trace.policy_snapshots.push((0, pi.clone()));
    }
    for k in 1..=cfg.outer_iters {
        let mut step = || -> Result<(Policy, Dist)> {
            let frozen = mdp.freeze(&mu)?;
            let q = frozen.evaluate(&pi, cfg.eta)?.q;
            for (y, qv) in cumulative.iter_mut().zip(&q) {
                *y += cfg.learning_rate * qv;
            }
            let next_pi = Policy::softmax(ns, na, &cumulative, cfg.eta);
            let kernel = frozen.induced_kernel(&next_pi)?;
            let target = kernel_power_apply(&mu, &kernel, cfg.pushforward_steps)?;
            Ok((next_pi, mu.damped_toward(&target, cfg.beta.at(k))))
        };
        let (next_pi, next_mu) = step().map_err(Error::at(k))?;
        let drift = next_mu.l1_distance(&mu);
        pi = next_pi;
        mu = next_mu;
        trace.records.push(rec.record(k, &pi, &mu, drift).map_err(Error::at(k))?);
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

pub fn run_baseline(mdp: &MfMdp, cfg: &BaselineConfig) -> Result<RunTrace> {
    match cfg.algorithm {
        Baseline::FictitiousPlay => fictitious_play(mdp, cfg),
        Baseline::OnlineMirrorDescent => online_mirror_descent(mdp, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::TabularModel;

    fn bandit() -> MfMdp {
        TabularModel::new(1, 2, vec![1.0, 1.0], vec![1.0, 0.0])
            .unwrap()
            .into_mdp(0.5)
            .unwrap()
    }

    #[test]
    fn omd_zero_rate_keeps_uniform() {
        let mut cfg = BaselineConfig::new(Baseline::OnlineMirrorDescent, 3, 0.5, Dist::uniform(1));
        cfg.learning_rate = 0.0;
        let tr = online_mirror_descent(&bandit(), &cfg).unwrap();
        assert_eq!(tr.final_policy, Policy::uniform(1, 2));
    }

    #[test]
    fn fp_first_average_is_first_population() {
        let mdp = bandit();
        let cfg = BaselineConfig::new(Baseline::FictitiousPlay, 1, 0.5, Dist::uniform(1));
        let tr = fictitious_play(&mdp, &cfg).unwrap();
        assert_eq!(tr.records.len(), 1);
        assert_eq!(tr.final_mu, Dist::uniform(1));
        assert!(tr.records[0].exploitability.unwrap().abs() < 1e-9);
    }

    #[test]
    fn wrong_algorithm_is_rejected() {
        let cfg = BaselineConfig::new(Baseline::FictitiousPlay, 1, 0.5, Dist::uniform(1));
        assert!(online_mirror_descent(&bandit(), &cfg).is_err());
    }
}
