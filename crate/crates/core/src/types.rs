//! Probability vectors, row-stochastic tables and value tables.

use std::ops::Index;

use crate::error::{Error, Result};

/// Accepted deviation from unit mass when validating external input.
pub const INPUT_MASS_TOL: f64 = 1e-9;

/// Smallest probability a softmax row may hold, so that `ln` stays finite.
pub const PROB_FLOOR: f64 = f64::MIN_POSITIVE;

fn check_simplex(p: &[f64], what: &str) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::invalid(format!("{what} is empty")));
    }
    let mut sum = 0.0;
    for (i, &x) in p.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::invalid(format!("{what}[{i}] = {x} is not a probability")));
        }
        sum += x;
    }
    if (sum - 1.0).abs() > INPUT_MASS_TOL {
        return Err(Error::invalid(format!("{what} sums to {sum}, expected 1")));
    }
    Ok(sum)
}

/// Mass error below which stored values are kept as written.
const STORED_MASS_TOL: f64 = 1e-12;

fn rescale_unless_unit(p: &mut [f64], sum: f64) {
    if (sum - 1.0).abs() > STORED_MASS_TOL {
        p.iter_mut().for_each(|x| *x /= sum);
    }
}

/// A probability distribution over states.
#[derive(Clone, Debug, PartialEq)]
pub struct Dist(Vec<f64>);

impl Dist {
    /// Validates and renormalizes `p`.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        let sum = check_simplex(&p, "distribution")?;
        Ok(Dist(p.into_iter().map(|x| x / sum).collect()))
    }

    /// Validates `p` like [`Dist::new`] but keeps the entries bit for bit
    /// when they already sum to one up to round-off (values read from disk).
    pub fn from_stored(mut p: Vec<f64>) -> Result<Self> {
        let sum = check_simplex(&p, "distribution")?;
        rescale_unless_unit(&mut p, sum);
        Ok(Dist(p))
    }

    /// Rescales a non-negative vector produced by internal arithmetic to unit mass.
    pub(crate) fn normalized(mut p: Vec<f64>) -> Self {
        let sum: f64 = p.iter().sum();
        debug_assert!(sum > 0.0 && sum.is_finite(), "degenerate mass {sum}");
        for x in p.iter_mut() {
            *x = x.max(0.0) / sum;
        }
        Dist(p)
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0);
        Dist(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, s: usize) -> Self {
        assert!(s < n, "state {s} out of range for {n} states");
        let mut p = vec![0.0; n];
        p[s] = 1.0;
        Dist(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    pub fn l1_distance(&self, other: &Dist) -> f64 {
        l1(&self.0, &other.0)
    }

    pub fn l2_distance(&self, other: &Dist) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `self + beta * (target - self)`.
    pub fn damped_toward(&self, target: &Dist, beta: f64) -> Dist {
        let p = self
            .0
            .iter()
            .zip(&target.0)
            .map(|(m, t)| m + beta * (t - m))
            .collect();
        Dist::normalized(p)
    }
}

impl Index<usize> for Dist {
    type Output = f64;
    fn index(&self, s: usize) -> &f64 {
        &self.0[s]
    }
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Total-variation distance, half the l1 distance.
pub fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    0.5 * l1(a, b)
}

/// Row-stochastic `|S| x |A|` table of action probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        Self::build(n_states, n_actions, probs, |row, sum| row.iter_mut().for_each(|x| *x /= sum))
    }

    /// Like [`Policy::new`], but rows that already sum to one up to round-off
    /// are kept bit for bit.
    pub fn from_stored(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        Self::build(n_states, n_actions, probs, rescale_unless_unit)
    }

    fn build(n_states: usize, n_actions: usize, probs: Vec<f64>, rescale: fn(&mut [f64], f64)) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::invalid("policy needs at least one state and one action"));
        }
        if probs.len() != n_states * n_actions {
            return Err(Error::invalid(format!(
                "policy table has {} entries, expected {}x{}",
                probs.len(),
                n_states,
                n_actions
            )));
        }
        let mut probs = probs;
        for s in 0..n_states {
            let row = &mut probs[s * n_actions..(s + 1) * n_actions];
            let sum = check_simplex(row, &format!("policy row {s}"))?;
            rescale(row, sum);
        }
        Ok(Policy {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Policy {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Point-mass policy choosing `action` everywhere.
    pub fn deterministic(n_states: usize, n_actions: usize, action: usize) -> Self {
        let mut probs = vec![0.0; n_states * n_actions];
        for s in 0..n_states {
            probs[s * n_actions + action] = 1.0;
        }
        Policy {
            n_states,
            n_actions,
            probs,
        }
    }

    /// Row-wise softmax of `logits / temperature`, max-subtracted.
    pub fn softmax(n_states: usize, n_actions: usize, logits: &[f64], temperature: f64) -> Self {
        let mut probs = vec![0.0; n_states * n_actions];
        for s in 0..n_states {
            let range = s * n_actions..(s + 1) * n_actions;
            softmax_into(&logits[range.clone()], temperature, &mut probs[range]);
        }
        Policy {
            n_states,
            n_actions,
            probs,
        }
    }

    pub(crate) fn from_raw(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), n_states * n_actions);
        Policy {
            n_states,
            n_actions,
            probs,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub(crate) fn row_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn min_entry(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest per-state total-variation distance to `other`.
    pub fn max_tv_distance(&self, other: &Policy) -> f64 {
        (0..self.n_states)
            .map(|s| tv_distance(self.row(s), other.row(s)))
            .fold(0.0, f64::max)
    }

    /// Entry-wise average of several policies of identical shape.
    pub fn average(policies: &[Policy]) -> Result<Policy> {
        let first = policies
            .first()
            .ok_or_else(|| Error::invalid("cannot average an empty policy list"))?;
        let mut probs = vec![0.0; first.probs.len()];
        for p in policies {
            if p.n_states != first.n_states || p.n_actions != first.n_actions {
                return Err(Error::invalid("policies to average differ in shape"));
            }
            for (acc, x) in probs.iter_mut().zip(&p.probs) {
                *acc += x;
            }
        }
        let n = policies.len() as f64;
        probs.iter_mut().for_each(|x| *x /= n);
        Ok(Policy::from_raw(first.n_states, first.n_actions, probs))
    }

    pub(crate) fn check_shape(&self, n_states: usize, n_actions: usize) -> Result<()> {
        if self.n_states != n_states || self.n_actions != n_actions {
            return Err(Error::invalid(format!(
                "policy is {}x{}, model is {}x{}",
                self.n_states, self.n_actions, n_states, n_actions
            )));
        }
        Ok(())
    }
}

/// `out = softmax(x / temperature)`, entries floored at [`PROB_FLOOR`].
pub(crate) fn softmax_into(x: &[f64], temperature: f64, out: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = ((v - max) / temperature).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o = (*o / sum).max(PROB_FLOOR);
    }
}

/// `log sum exp(x / temperature) * temperature`, max-subtracted.
pub(crate) fn soft_max_value(x: &[f64], temperature: f64) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = x.iter().map(|&v| ((v - max) / temperature).exp()).sum();
    max + temperature * sum.ln()
}

/// Row-stochastic `|S| x |S|` transition matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    n: usize,
    mat: Vec<f64>,
}

impl Kernel {
    pub fn new(n: usize, mat: Vec<f64>) -> Result<Self> {
        if mat.len() != n * n {
            return Err(Error::invalid(format!(
                "kernel has {} entries, expected {n}x{n}",
                mat.len()
            )));
        }
        for s in 0..n {
            check_simplex(&mat[s * n..(s + 1) * n], &format!("kernel row {s}"))?;
        }
        Ok(Kernel { n, mat })
    }

    pub fn identity(n: usize) -> Self {
        let mut mat = vec![0.0; n * n];
        for s in 0..n {
            mat[s * n + s] = 1.0;
        }
        Kernel { n, mat }
    }

    pub(crate) fn from_raw(n: usize, mat: Vec<f64>) -> Self {
        Kernel { n, mat }
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.mat[s * self.n..(s + 1) * self.n]
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.mat[s * self.n + t]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mat
    }

    /// Row vector times matrix.
    pub fn left_apply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (s, &xs) in x.iter().enumerate() {
            if xs == 0.0 {
                continue;
            }
            for (o, &k) in out.iter_mut().zip(self.row(s)) {
                *o += xs * k;
            }
        }
    }
}

/// Per-state values `j` and per-pair values `q` (row-major `|S| x |A|`).
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    pub j: Vec<f64>,
    pub q: Vec<f64>,
    pub n_actions: usize,
}

impl ValueTable {
    pub fn q_row(&self, s: usize) -> &[f64] {
        &self.q[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn q_at(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.n_actions + a]
    }

    /// `J(pi, mu, xi) = xi . J`.
    pub fn value_at(&self, xi: &Dist) -> f64 {
        xi.dot(&self.j)
    }
}
