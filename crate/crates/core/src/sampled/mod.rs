//! Oracle-only solvers: rollouts replace the model.

mod mftrpo;
mod oracle;
mod trpo;

pub use mftrpo::{
    init_state_from_history, level_probabilities, population_pushforward_estimate, sample_based_mftrpo,
    sample_level, History, SampledMftrpoConfig,
};
pub use oracle::{make_oracle, EnvOracle, TabularOracle};
pub use trpo::{
    mixture_policy_draw, population_samples_bound, rollout_horizon, rollout_q_estimate, sample_based_trpo,
    sample_occupation_state, trpo_samples_bound, MixturePolicy, QEstimator, Restart, SampledTrpoConfig, BLOCK_SIZE, SAMPLE_BOUND_CAP,
};
