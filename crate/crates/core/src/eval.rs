//! Equilibrium diagnostics: exploitability, MFNE residuals, the
//! policy-distance/value-gap inequality and a monotonicity probe for the
//! population operator.

use rand::Rng;
use rayon::prelude::*;

use crate::dynamics::{kernel_power_apply, stationary_distribution, EXACT_TOL};
use crate::error::{Error, Result};
use crate::mdp::MfMdp;
use crate::rng::SeedPath;
use crate::types::{tv_distance, Dist, Kernel, Policy};

/// Exploitability `phi(pi, mu)` together with the quantities it is built from.
#[derive(Clone, Debug)]
pub struct ExploitabilityReport {
    pub phi: f64,
    /// Stationary distribution of `P^pi_mu`.
    pub stationary: Dist,
    pub best_response_value: f64,
    pub policy_value: f64,
}

/// Gain of the best response over `pi` when the population sits at the
/// stationary distribution `G` of `P^pi_mu`; both values are `J(., G, G)`
/// with the entropy-regularized return.
pub fn exploitability(mdp: &MfMdp, pi: &Policy, mu: &Dist, eta: f64, tol: f64) -> Result<ExploitabilityReport> {
    let stationary = stationary_of(mdp, pi, mu)?;
    let frozen = mdp.freeze(&stationary)?;
    let (best, _) = frozen.soft_value_iteration(eta, tol)?;
    let own = frozen.evaluate(pi, eta)?;
    Ok(report(stationary, best.j, own.j))
}

/// Same as [`exploitability`] with unregularized (`eta = 0`) returns for both
/// the best response and `pi`.
pub fn exploitability_unregularized(mdp: &MfMdp, pi: &Policy, mu: &Dist, tol: f64) -> Result<ExploitabilityReport> {
    let stationary = stationary_of(mdp, pi, mu)?;
    let frozen = mdp.freeze(&stationary)?;
    let best = frozen.optimal_values(tol)?;
    let own = frozen.evaluate(pi, 0.0)?;
    Ok(report(stationary, best.j, own.j))
}

fn stationary_of(mdp: &MfMdp, pi: &Policy, mu: &Dist) -> Result<Dist> {
    pi.check_shape(mdp.n_states(), mdp.n_actions())?;
    let k = mdp.freeze(mu)?.induced_kernel(pi)?;
    stationary_distribution(&k, EXACT_TOL)
}

fn report(stationary: Dist, best_j: Vec<f64>, own_j: Vec<f64>) -> ExploitabilityReport {
    let best_response_value = stationary.dot(&best_j);
    let policy_value = stationary.dot(&own_j);
    ExploitabilityReport {
        phi: best_response_value - policy_value,
        stationary,
        best_response_value,
        policy_value,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MfneResidual {
    /// `V(mu, mu) - J(pi, mu, mu)`.
    pub value_gap: f64,
    /// `|mu - mu P^pi_mu|_1`.
    pub fixed_point_gap: f64,
}

pub fn mfne_residual(mdp: &MfMdp, pi: &Policy, mu: &Dist, eta: f64) -> Result<MfneResidual> {
    pi.check_shape(mdp.n_states(), mdp.n_actions())?;
    let frozen = mdp.freeze(mu)?;
    let (best, _) = frozen.soft_value_iteration(eta, EXACT_TOL)?;
    let own = frozen.evaluate(pi, eta)?;
    let k = frozen.induced_kernel(pi)?;
    let pushed = kernel_power_apply(mu, &k, 1)?;
    Ok(MfneResidual {
        value_gap: mu.dot(&best.j) - mu.dot(&own.j),
        fixed_point_gap: mu.l1_distance(&pushed),
    })
}

/// Per-state sides of `TV(pi, pi_mu)^2 <= 2 / (eta (1 - gamma)) * (J(pi_mu) - J(pi))`.
#[derive(Clone, Debug)]
pub struct PinskerCheck {
    pub passed: bool,
    /// `min_s (rhs - lhs)`.
    pub min_slack: f64,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
}

/// Violations smaller than this are attributed to round-off.
pub const PINSKER_ROUNDOFF: f64 = 1e-9;

pub fn pinsker_bound_check(mdp: &MfMdp, pi: &Policy, mu: &Dist, eta: f64) -> Result<PinskerCheck> {
    if !(eta > 0.0) {
        return Err(Error::invalid("the policy/value inequality needs eta > 0"));
    }
    pi.check_shape(mdp.n_states(), mdp.n_actions())?;
    let frozen = mdp.freeze(mu)?;
    let (_, best_policy) = frozen.soft_value_iteration(eta, 1e-12)?;
    let best = frozen.evaluate(&best_policy, eta)?;
    let own = frozen.evaluate(pi, eta)?;
    let factor = 2.0 / (eta * (1.0 - mdp.gamma()));
    let mut lhs = Vec::with_capacity(mdp.n_states());
    let mut rhs = Vec::with_capacity(mdp.n_states());
    for s in 0..mdp.n_states() {
        let tv = tv_distance(pi.row(s), best_policy.row(s));
        lhs.push(tv * tv);
        rhs.push(factor * (best.j[s] - own.j[s]));
    }
    let min_slack = lhs
        .iter()
        .zip(&rhs)
        .map(|(l, r)| r - l)
        .fold(f64::INFINITY, f64::min);
    Ok(PinskerCheck {
        passed: min_slack >= -PINSKER_ROUNDOFF,
        min_slack,
        lhs,
        rhs,
    })
}

/// `Phi(mu) = mu (P^{pi_mu}_mu)^M` with `pi_mu` the regularized best response.
pub fn population_operator(mdp: &MfMdp, mu: &Dist, eta: f64, big_m: usize) -> Result<Dist> {
    let frozen = mdp.freeze(mu)?;
    let (_, br) = frozen.soft_value_iteration(eta, EXACT_TOL)?;
    let k = frozen.induced_kernel(&br)?;
    kernel_power_apply(mu, &k, big_m)
}

#[derive(Clone, Debug)]
pub struct MonotonicityProbeReport {
    pub samples: usize,
    /// Empirical sup of `<mu - mu', Phi(mu) - Phi(mu')> / |mu - mu'|_2^2`.
    pub max_ratio: f64,
    pub big_m: usize,
    pub ratios: Vec<f64>,
    /// Set when no non-degenerate pair exists (a single state).
    pub degenerate: bool,
}

const MIN_PAIR_DISTANCE: f64 = 1e-8;
const MAX_RESAMPLES: usize = 100;

fn dirichlet_ones<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Dist {
    // normalized Exp(1) draws
    let p: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    Dist::normalized(p)
}

/// Draws `samples` uniform pairs from the simplex and records the ratio for
/// each. Pairs are processed in parallel with one random stream per pair.
pub fn monotonicity_probe(
    mdp: &MfMdp,
    eta: f64,
    big_m: usize,
    samples: usize,
    seed: u64,
) -> Result<MonotonicityProbeReport> {
    if samples == 0 {
        return Err(Error::invalid("monotonicity probe needs at least one sample"));
    }
    let n = mdp.n_states();
    if n == 1 {
        return Ok(MonotonicityProbeReport {
            samples: 0,
            max_ratio: 0.0,
            big_m,
            ratios: Vec::new(),
            degenerate: true,
        });
    }
    let root = SeedPath::new(seed);
    let ratios = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = root.child(i as u64).rng();
            let mut pair = None;
            for _ in 0..MAX_RESAMPLES {
                let a = dirichlet_ones(n, &mut rng);
                let b = dirichlet_ones(n, &mut rng);
                if a.l2_distance(&b) >= MIN_PAIR_DISTANCE {
                    pair = Some((a, b));
                    break;
                }
            }
            let (a, b) = pair.ok_or_else(|| Error::Numerical("could not draw a distinct pair".into()))?;
            let fa = population_operator(mdp, &a, eta, big_m)?;
            let fb = population_operator(mdp, &b, eta, big_m)?;
            let num: f64 = (0..n).map(|s| (a[s] - b[s]) * (fa[s] - fb[s])).sum();
            let den = a.l2_distance(&b).powi(2);
            Ok(num / den)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(MonotonicityProbeReport {
        samples,
        max_ratio,
        big_m,
        ratios,
        degenerate: false,
    })
}

/// `TV(xi K^t, G)` for `t = 0..=horizon`.
pub fn mixing_profile(k: &Kernel, xi: &Dist, horizon: usize) -> Result<Vec<f64>> {
    let g = stationary_distribution(k, EXACT_TOL)?;
    let mut x = xi.clone();
    let mut out = Vec::with_capacity(horizon + 1);
    for _ in 0..=horizon {
        out.push(tv_distance(x.as_slice(), g.as_slice()));
        x = kernel_power_apply(&x, k, 1)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::TabularModel;

    fn bandit() -> MfMdp {
        TabularModel::new(1, 1, vec![1.0], vec![0.3]).unwrap().into_mdp(0.9).unwrap()
    }

    #[test]
    fn single_state_single_action_has_zero_exploitability() {
        let mdp = bandit();
        let r = exploitability(&mdp, &Policy::uniform(1, 1), &Dist::uniform(1), 0.1, 1e-12).unwrap();
        assert!(r.phi.abs() < 1e-9);
        assert_eq!(r.phi, r.best_response_value - r.policy_value);
        let res = mfne_residual(&mdp, &Policy::uniform(1, 1), &Dist::uniform(1), 0.1).unwrap();
        assert!(res.value_gap.abs() < 1e-9);
        assert_eq!(res.fixed_point_gap, 0.0);
    }

    #[test]
    fn probe_flags_single_state() {
        let r = monotonicity_probe(&bandit(), 0.1, 3, 5, 0).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.samples, 0);
        assert!(monotonicity_probe(&bandit(), 0.1, 3, 0, 0).is_err());
    }

    #[test]
    fn pinsker_needs_positive_eta() {
        assert!(pinsker_bound_check(&bandit(), &Policy::uniform(1, 1), &Dist::uniform(1), 0.0).is_err());
    }

    #[test]
    fn mixing_profile_of_two_state_chain() {
        let k = Kernel::new(2, vec![0.7, 0.3, 0.6, 0.4]).unwrap();
        let prof = mixing_profile(&k, &Dist::point_mass(2, 0), 5).unwrap();
        // second eigenvalue 0.1
        for t in 0..5 {
            assert!((prof[t + 1] / prof[t] - 0.1).abs() < 1e-6);
        }
    }
}
