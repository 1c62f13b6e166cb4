//! Tabular mean-field game solvers.
//!
//! The crate is organised bottom-up:
//!
//! * [`types`], [`mdp`], [`dynamics`]: distributions, policies, kernels and the
//!   exact linear algebra of a mean-field MDP (evaluation, soft value
//!   iteration, stationary distributions, occupation measures).
//! * [`exact`]: model-based TRPO and MF-TRPO.
//! * [`sampled`]: the oracle-only counterparts built on rollouts.
//! * [`eval`]: exploitability and other equilibrium diagnostics.
//! * [`envs`]: crowd-modeling grids and the two-islands graph.
//! * [`baselines`]: fictitious play and online mirror descent.
//! * [`harness`]: config files, experiment runs and CSV/SVG output.

pub mod baselines;
pub mod dynamics;
pub mod envs;
pub mod error;
pub mod eval;
pub mod exact;
pub mod harness;
pub mod mdp;
pub mod rng;
pub mod sampled;
pub mod schedule;
pub mod trace;
pub mod types;

pub use error::{Error, Result};
pub use mdp::{MeanFieldModel, MfMdp};
pub use schedule::StepSchedule;
pub use trace::{IterRecord, RunTrace};
pub use types::{Dist, Kernel, Policy, ValueTable};
