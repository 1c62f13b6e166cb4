//! Per-iteration metrics shared by every outer-loop solver.

use std::time::Instant;

use crate::dynamics::EXACT_TOL;
use crate::error::Result;
use crate::eval::{exploitability, exploitability_unregularized};
use crate::mdp::MfMdp;
use crate::types::{Dist, Policy};

#[derive(Clone, Debug, PartialEq)]
pub struct IterRecord {
    pub k: usize,
    /// Regularized exploitability; `None` on iterations skipped by the cadence.
    pub exploitability: Option<f64>,
    pub exploitability_unreg: Option<f64>,
    /// `|mu_k - mu_{k-1}|_1`.
    pub mu_drift: f64,
    /// `J(pi_k, mu_k, mu_k)`.
    pub value: f64,
    pub wall_ms: f64,
}

impl IterRecord {
    /// Equality ignoring wall-clock time.
    pub fn same_metrics(&self, other: &IterRecord) -> bool {
        let eq = |a: Option<f64>, b: Option<f64>| a.map(f64::to_bits) == b.map(f64::to_bits);
        self.k == other.k
            && eq(self.exploitability, other.exploitability)
            && eq(self.exploitability_unreg, other.exploitability_unreg)
            && self.mu_drift.to_bits() == other.mu_drift.to_bits()
            && self.value.to_bits() == other.value.to_bits()
    }
}

#[derive(Clone, Debug)]
pub struct RunTrace {
    pub algorithm: String,
    /// Metrics of `(pi_0, mu_0)` before the first update.
    pub initial: IterRecord,
    /// One record per completed outer iteration, `k = 1..=K`.
    pub records: Vec<IterRecord>,
    pub mu_snapshots: Vec<(usize, Dist)>,
    pub policy_snapshots: Vec<(usize, Policy)>,
    pub final_mu: Dist,
    /// Policy reported alongside `final_mu`.
    pub final_policy: Policy,
    pub final_exploitability: Option<f64>,
    /// Free-form key/value metadata (evaluation conventions, etc.).
    pub notes: Vec<(String, String)>,
}

impl RunTrace {
    /// All records including the initial one, in order.
    pub fn all_records(&self) -> impl Iterator<Item = &IterRecord> {
        std::iter::once(&self.initial).chain(self.records.iter())
    }

    pub fn mu_snapshot(&self, k: usize) -> Option<&Dist> {
        self.mu_snapshots.iter().find(|(i, _)| *i == k).map(|(_, d)| d)
    }

    pub fn last_exploitability(&self) -> Option<f64> {
        self.all_records().filter_map(|r| r.exploitability).last()
    }
}

/// When to compute exploitability inside a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EvalCadence {
    /// Every iteration for `K <= 1000`, otherwise every `ceil(K / 1000)`.
    #[default]
    Auto,
    Every(usize),
    Never,
}

impl EvalCadence {
    pub fn due(self, k: usize, big_k: usize) -> bool {
        let every = match self {
            EvalCadence::Never => return false,
            EvalCadence::Every(n) => n.max(1),
            EvalCadence::Auto => {
                if big_k <= 1000 {
                    1
                } else {
                    big_k.div_ceil(1000)
                }
            }
        };
        k == 0 || k == big_k || k.is_multiple_of(every)
    }
}

#[derive(Clone, Debug)]
pub struct TraceOptions {
    pub cadence: EvalCadence,
    /// Iterations whose `mu_k` (and policy) are stored; `0` is the initial state.
    pub snapshot_steps: Vec<usize>,
    /// Also store a snapshot every this many iterations.
    pub snapshot_every: Option<usize>,
    pub unregularized: bool,
    pub tol: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            cadence: EvalCadence::Auto,
            snapshot_steps: Vec::new(),
            snapshot_every: None,
            unregularized: true,
            tol: EXACT_TOL,
        }
    }
}

impl TraceOptions {
    pub(crate) fn wants_snapshot(&self, k: usize) -> bool {
        self.snapshot_steps.contains(&k) || self.snapshot_every.is_some_and(|n| n > 0 && k.is_multiple_of(n))
    }
}

pub(crate) struct Recorder<'a> {
    pub mdp: &'a MfMdp,
    pub eta: f64,
    pub big_k: usize,
    pub opts: &'a TraceOptions,
    pub started: Instant,
}

impl Recorder<'_> {
    pub fn record(&self, k: usize, pi: &Policy, mu: &Dist, mu_drift: f64) -> Result<IterRecord> {
        let due = self.opts.cadence.due(k, self.big_k);
        let exploit = if due {
            Some(exploitability(self.mdp, pi, mu, self.eta, self.opts.tol)?.phi)
        } else {
            None
        };
        let exploit_unreg = if due && self.opts.unregularized {
            Some(exploitability_unregularized(self.mdp, pi, mu, self.opts.tol)?.phi)
        } else {
            None
        };
        let value = mu.dot(&self.mdp.freeze(mu)?.evaluate(pi, self.eta)?.j);
        Ok(IterRecord {
            k,
            exploitability: exploit,
            exploitability_unreg: exploit_unreg,
            mu_drift,
            value,
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
        })
    }
}
