//! Exact tabular computations at a fixed mean field: induced kernels,
//! stationary distributions, occupation measures, entropy-regularized policy
//! evaluation and the regularized best response.
//!
//! Regularization convention: the per-step reward seen by an agent following
//! `pi` is `r(s, a, mu) - eta * ln pi(a|s)` (an entropy bonus). With this sign
//! the optimal value solves `J(s) = eta * ln sum_a exp(Q(s, a) / eta)` and the
//! best response is `softmax(Q / eta)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdp::{FrozenMdp, MfMdp};
use crate::types::{soft_max_value, softmax_into, Dist, Kernel, Policy, ValueTable};

/// Default tolerance for exact linear algebra.
pub const EXACT_TOL: f64 = 1e-10;
/// Default tolerance for fixed-point iterations.
pub const FIXED_POINT_TOL: f64 = 1e-8;
/// Above this many states policy evaluation switches to fixed-point iteration.
pub const DIRECT_SOLVE_MAX_STATES: usize = 2000;

/// Single power-iteration steps before switching to repeated squaring.
pub const STATIONARY_PLAIN_STEPS: usize = 2000;
/// Squarings after the plain phase; the last covers `2^60` steps.
const STATIONARY_SQUARINGS: usize = 60;
const VALUE_ITERATION_CAP: usize = 1_000_000;
const EVAL_FIXED_POINT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinearSolver {
    /// Dense LU for small state spaces, fixed-point iteration otherwise.
    Auto,
    Direct,
    FixedPoint,
}

/// Discounted state-action occupation measure and its state marginal.
#[derive(Clone, Debug)]
pub struct OccupationMeasure {
    pub n_actions: usize,
    /// Row-major `[s][a]`.
    pub pairs: Vec<f64>,
    pub marginal: Vec<f64>,
}

impl OccupationMeasure {
    pub fn at(&self, s: usize, a: usize) -> f64 {
        self.pairs[s * self.n_actions + a]
    }
}

pub fn induced_kernel(mdp: &MfMdp, pi: &Policy, mu: &Dist) -> Result<Kernel> {
    pi.check_shape(mdp.n_states(), mdp.n_actions())?;
    mdp.freeze(mu)?.induced_kernel(pi)
}

/// `mu K^m` by `m` successive vector-matrix products.
pub fn kernel_power_apply(mu: &Dist, k: &Kernel, m: usize) -> Result<Dist> {
    if mu.len() != k.n_states() {
        return Err(Error::invalid(format!(
            "distribution has {} entries, kernel is {}x{}",
            mu.len(),
            k.n_states(),
            k.n_states()
        )));
    }
    let mut x = mu.as_slice().to_vec();
    let mut y = vec![0.0; x.len()];
    for _ in 0..m {
        k.left_apply(&x, &mut y);
        std::mem::swap(&mut x, &mut y);
    }
    Ok(Dist::normalized(x))
}

/// Stationary distribution of a unichain kernel by power iteration from the
/// uniform distribution. The result satisfies `|G K - G|_1 <= tol`.
///
/// After [`STATIONARY_PLAIN_STEPS`] single steps the iteration switches to
/// `x <- x K^(2^j)` by repeated squaring, so slowly mixing chains (rooms
/// joined by narrow doors) take a few dozen matrix products instead of
/// millions of steps. Periodic chains never settle and are reported.
pub fn stationary_distribution(k: &Kernel, tol: f64) -> Result<Dist> {
    let n = k.n_states();
    let mut x = vec![1.0 / n as f64; n];
    let mut y = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..STATIONARY_PLAIN_STEPS {
        k.left_apply(&x, &mut y);
        residual = crate::types::l1(&x, &y);
        if residual <= tol {
            return Ok(Dist::normalized(x));
        }
        // renormalize each step so round-off cannot drift the mass
        let mass: f64 = y.iter().sum();
        y.iter_mut().for_each(|v| *v /= mass);
        std::mem::swap(&mut x, &mut y);
    }
    let mut power = DMatrix::from_row_slice(n, n, k.as_slice());
    for _ in 0..STATIONARY_SQUARINGS {
        // x <- x P, as P^T x^T
        let xv = power.tr_mul(&DVector::from_column_slice(&x));
        let mass: f64 = xv.iter().sum();
        x = xv.iter().map(|v| v.max(0.0) / mass).collect();
        k.left_apply(&x, &mut y);
        residual = crate::types::l1(&x, &y);
        if residual <= tol {
            return Ok(Dist::normalized(x));
        }
        power = &power * &power;
    }
    Err(Error::Convergence {
        what: "stationary distribution (is the chain unichain and aperiodic?)",
        iterations: STATIONARY_PLAIN_STEPS + STATIONARY_SQUARINGS,
        residual,
    })
}

pub fn policy_evaluation_regularized(mdp: &MfMdp, pi: &Policy, mu: &Dist, eta: f64) -> Result<ValueTable> {
    pi.check_shape(mdp.n_states(), mdp.n_actions())?;
    mdp.freeze(mu)?.evaluate(pi, eta)
}

/// Regularized optimal value and the unique regularized best response at `mu`.
pub fn soft_value_iteration(mdp: &MfMdp, mu: &Dist, eta: f64, tol: f64) -> Result<(ValueTable, Policy)> {
    mdp.freeze(mu)?.soft_value_iteration(eta, tol)
}

pub fn occupation_measure(mdp: &MfMdp, pi: &Policy, mu: &Dist, xi: &Dist) -> Result<OccupationMeasure> {
    pi.check_shape(mdp.n_states(), mdp.n_actions())?;
    mdp.check_dist(xi, "initial distribution")?;
    mdp.freeze(mu)?.occupation_measure(pi, xi)
}

/// `(reward_bound + eta ln|A|) / (1 - gamma)`.
pub fn value_bound(mdp: &MfMdp, eta: f64) -> f64 {
    (mdp.reward_bound() + eta * (mdp.n_actions() as f64).ln()) / (1.0 - mdp.gamma())
}

fn solve_dense(a: DMatrix<f64>, b: DVector<f64>) -> Result<Vec<f64>> {
    let lu = a.lu();
    let x = lu
        .solve(&b)
        .ok_or_else(|| Error::Numerical("singular linear system".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite solution of linear system".into()));
    }
    Ok(x.iter().copied().collect())
}

impl FrozenMdp {
    pub fn induced_kernel(&self, pi: &Policy) -> Result<Kernel> {
        pi.check_shape(self.n_states, self.n_actions)?;
        let n = self.n_states;
        let mut mat = vec![0.0; n * n];
        for s in 0..n {
            let row = &mut mat[s * n..(s + 1) * n];
            for (a, &p) in pi.row(s).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for &(t, q) in self.successors(s, a) {
                    row[t] += p * q;
                }
            }
        }
        Ok(Kernel::from_raw(n, mat))
    }

    /// Expected regularized one-step reward under `pi` in every state.
    pub fn regularized_reward(&self, pi: &Policy, eta: f64) -> Vec<f64> {
        (0..self.n_states)
            .map(|s| {
                pi.row(s)
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(a, &p)| p * (self.reward(s, a) - eta * p.ln()))
                    .sum()
            })
            .collect()
    }

    pub fn evaluate(&self, pi: &Policy, eta: f64) -> Result<ValueTable> {
        self.evaluate_with(pi, eta, LinearSolver::Auto)
    }

    pub fn evaluate_with(&self, pi: &Policy, eta: f64, solver: LinearSolver) -> Result<ValueTable> {
        if !(eta >= 0.0) {
            return Err(Error::invalid(format!("regularization {eta} must be >= 0")));
        }
        let k = self.induced_kernel(pi)?;
        let r = self.regularized_reward(pi, eta);
        let n = self.n_states;
        let direct = match solver {
            LinearSolver::Auto => n <= DIRECT_SOLVE_MAX_STATES,
            LinearSolver::Direct => true,
            LinearSolver::FixedPoint => false,
        };
        let j = if direct {
            let a = DMatrix::from_fn(n, n, |s, t| {
                let id = if s == t { 1.0 } else { 0.0 };
                id - self.gamma * k.get(s, t)
            });
            solve_dense(a, DVector::from_vec(r))?
        } else {
            self.evaluate_fixed_point(&k, &r)?
        };
        Ok(self.q_from_values(j))
    }

    fn evaluate_fixed_point(&self, k: &Kernel, r: &[f64]) -> Result<Vec<f64>> {
        let n = self.n_states;
        let mut j = r.to_vec();
        let mut next = vec![0.0; n];
        let stop = EVAL_FIXED_POINT_TOL * (1.0 - self.gamma);
        for _ in 0..VALUE_ITERATION_CAP {
            let mut diff: f64 = 0.0;
            for s in 0..n {
                let ev: f64 = k.row(s).iter().zip(&j).map(|(p, v)| p * v).sum();
                next[s] = r[s] + self.gamma * ev;
                diff = diff.max((next[s] - j[s]).abs());
            }
            std::mem::swap(&mut j, &mut next);
            if diff <= stop {
                return Ok(j);
            }
        }
        Err(Error::Convergence {
            what: "policy evaluation fixed point",
            iterations: VALUE_ITERATION_CAP,
            residual: f64::NAN,
        })
    }

    /// `Q(s, a) = r(s, a) + gamma * P(.|s, a) . J`.
    pub fn q_from_values(&self, j: Vec<f64>) -> ValueTable {
        let mut q = Vec::with_capacity(self.n_states * self.n_actions);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                q.push(self.reward(s, a) + self.gamma * self.expect(s, a, &j));
            }
        }
        ValueTable {
            j,
            q,
            n_actions: self.n_actions,
        }
    }

    /// Fixed point of `J <- eta ln sum_a exp(Q / eta)`, stopping once the
    /// sup-norm change is at most `tol (1 - gamma)`.
    pub fn soft_value_iteration(&self, eta: f64, tol: f64) -> Result<(ValueTable, Policy)> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid(format!("soft value iteration needs eta > 0, got {eta}")));
        }
        let j = self.value_iteration(tol, |q| soft_max_value(q, eta))?;
        let values = self.q_from_values(j);
        let mut probs = vec![0.0; self.n_states * self.n_actions];
        for s in 0..self.n_states {
            let range = s * self.n_actions..(s + 1) * self.n_actions;
            softmax_into(&values.q[range.clone()], eta, &mut probs[range]);
        }
        Ok((values, Policy::from_raw(self.n_states, self.n_actions, probs)))
    }

    /// Unregularized optimal values (`eta = 0`).
    pub fn optimal_values(&self, tol: f64) -> Result<ValueTable> {
        let j = self.value_iteration(tol, |q| q.iter().copied().fold(f64::NEG_INFINITY, f64::max))?;
        Ok(self.q_from_values(j))
    }

    fn value_iteration(&self, tol: f64, backup: impl Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
        let (ns, na) = (self.n_states, self.n_actions);
        let stop = tol * (1.0 - self.gamma);
        let mut j = vec![0.0; ns];
        let mut next = vec![0.0; ns];
        let mut q = vec![0.0; na];
        let mut diff = f64::INFINITY;
        for _ in 0..VALUE_ITERATION_CAP {
            diff = 0.0;
            for s in 0..ns {
                for (a, qa) in q.iter_mut().enumerate() {
                    *qa = self.reward(s, a) + self.gamma * self.expect(s, a, &j);
                }
                next[s] = backup(&q);
                diff = diff.max((next[s] - j[s]).abs());
            }
            std::mem::swap(&mut j, &mut next);
            if diff <= stop {
                return Ok(j);
            }
        }
        Err(Error::Convergence {
            what: "value iteration",
            iterations: VALUE_ITERATION_CAP,
            residual: diff,
        })
    }

    /// Solves `d = (1 - gamma) xi + gamma d P^pi` and splits by `pi`.
    pub fn occupation_measure(&self, pi: &Policy, xi: &Dist) -> Result<OccupationMeasure> {
        let k = self.induced_kernel(pi)?;
        let n = self.n_states;
        let a = DMatrix::from_fn(n, n, |s, t| {
            let id = if s == t { 1.0 } else { 0.0 };
            // transposed system
            id - self.gamma * k.get(t, s)
        });
        let b = DVector::from_iterator(n, xi.as_slice().iter().map(|x| (1.0 - self.gamma) * x));
        let mut marginal = solve_dense(a, b)?;
        // clip round-off below zero
        marginal.iter_mut().for_each(|x| *x = x.max(0.0));
        let mut pairs = Vec::with_capacity(n * self.n_actions);
        for (s, &m) in marginal.iter().enumerate() {
            pairs.extend(pi.row(s).iter().map(|p| p * m));
        }
        Ok(OccupationMeasure {
            n_actions: self.n_actions,
            pairs,
            marginal,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::TabularModel;

    fn chain_kernel() -> Kernel {
        Kernel::new(2, vec![0.7, 0.3, 0.6, 0.4]).unwrap()
    }

    #[test]
    fn power_apply_identity_and_zero() {
        let mu = Dist::new(vec![0.2, 0.8]).unwrap();
        assert_eq!(kernel_power_apply(&mu, &chain_kernel(), 0).unwrap(), mu);
        assert_eq!(kernel_power_apply(&mu, &Kernel::identity(2), 7).unwrap(), mu);
        let one = kernel_power_apply(&Dist::point_mass(2, 0), &chain_kernel(), 1).unwrap();
        assert!((one[0] - 0.7).abs() < 1e-15 && (one[1] - 0.3).abs() < 1e-15);
        assert!(kernel_power_apply(&Dist::uniform(3), &chain_kernel(), 1).is_err());
    }

    #[test]
    fn stationary_of_two_state_chain() {
        let g = stationary_distribution(&chain_kernel(), 1e-12).unwrap();
        assert!((g[0] - 2.0 / 3.0).abs() < 1e-11);
        assert!((g[1] - 1.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn stationary_reports_periodic_chain() {
        // bipartite chain {0, 2} <-> {1}: power iteration from uniform oscillates
        let periodic = Kernel::new(3, vec![0.0, 1.0, 0.0, 0.5, 0.0, 0.5, 0.0, 1.0, 0.0]).unwrap();
        match stationary_distribution(&periodic, 1e-10) {
            Err(Error::Convergence { residual, .. }) => assert!(residual > 0.5),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn one_state_geometric_series() {
        let m = TabularModel::new(1, 1, vec![1.0], vec![1.0]).unwrap();
        let mdp = m.into_mdp(0.9).unwrap();
        for eta in [0.0, 0.5, 3.0] {
            let v = policy_evaluation_regularized(&mdp, &Policy::uniform(1, 1), &Dist::uniform(1), eta).unwrap();
            assert!((v.j[0] - 10.0).abs() < 1e-12);
            assert!((v.q[0] - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn soft_vi_closed_form_bandit() {
        let m = TabularModel::new(1, 2, vec![1.0, 1.0], vec![1.0, 0.0]).unwrap();
        let mdp = m.into_mdp(0.0).unwrap();
        let (v, pi) = soft_value_iteration(&mdp, &Dist::uniform(1), 1.0, 1e-12).unwrap();
        // ln(1 + e), e / (1 + e)
        assert!((v.j[0] - 1.313_261_687_518_222_8).abs() < 1e-12);
        assert!((pi.prob(0, 0) - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!((pi.prob(0, 1) - 0.268_941_421_369_995_1).abs() < 1e-12);
    }

    #[test]
    fn evaluation_rejects_negative_eta() {
        let m = TabularModel::new(1, 1, vec![1.0], vec![1.0]).unwrap();
        let mdp = m.into_mdp(0.5).unwrap();
        assert!(policy_evaluation_regularized(&mdp, &Policy::uniform(1, 1), &Dist::uniform(1), -1.0).is_err());
        assert!(soft_value_iteration(&mdp, &Dist::uniform(1), 0.0, 1e-8).is_err());
    }

    #[test]
    fn occupation_gamma_zero_is_one_step() {
        let m = TabularModel::new(2, 2, vec![0.5, 0.5, 1.0, 0.0, 0.0, 1.0, 0.3, 0.7], vec![0.0; 4]).unwrap();
        let mdp = m.into_mdp(0.0).unwrap();
        let pi = Policy::new(2, 2, vec![0.2, 0.8, 0.6, 0.4]).unwrap();
        let xi = Dist::new(vec![0.3, 0.7]).unwrap();
        let d = occupation_measure(&mdp, &pi, &Dist::uniform(2), &xi).unwrap();
        for s in 0..2 {
            for a in 0..2 {
                assert!((d.at(s, a) - xi[s] * pi.prob(s, a)).abs() < 1e-15);
            }
        }
    }
}
