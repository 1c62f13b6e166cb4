//! Sample-based MF-TRPO on the 5x5 target grid at desk scale. The solver
//! only talks to a sampling oracle; the exact model is passed along for
//! diagnostics.
//!
//! The default importance-weighted Q estimator is noisy on this game. Pass
//! `variance-reduced` to use per-action averages and restarts from the
//! current mean field instead.
//!
//!     cargo run --release --example sampled_mftrpo [variance-reduced]

use mftrpo::envs::{GridCrowd, GridSpec};
use mftrpo::sampled::{
    make_oracle, sample_based_mftrpo, QEstimator, Restart, SampledMftrpoConfig, SampledTrpoConfig,
};
use mftrpo::trace::EvalCadence;
use mftrpo::{Result, StepSchedule};

fn main() -> Result<()> {
    let reduced = std::env::args().nth(1).as_deref() == Some("variance-reduced");
    let grid = GridCrowd::new(GridSpec::five_by_five(true))?;
    let nu = grid.nu();
    let mdp = grid.into_mdp(0.9)?;
    let oracle = make_oracle(&mdp, &nu)?;

    let mut trpo = SampledTrpoConfig::new(0.05, 20, 10_000, 0);
    if reduced {
        trpo.estimator = QEstimator::ActionMean;
        trpo.restart = Restart::MeanField;
    }
    println!("rollout horizon T = {}", trpo.horizon_for(&oracle));
    let mut cfg = SampledMftrpoConfig::new(trpo, 50, StepSchedule::Constant(0.1), 20, 10_000, 1);
    cfg.trace.cadence = EvalCadence::Every(5);
    cfg.trace.unregularized = false;

    let trace = sample_based_mftrpo(&oracle, &cfg, Some(&mdp))?;
    for r in trace.all_records().filter(|r| r.exploitability.is_some()) {
        println!(
            "k = {:>2}  exploitability {:8.4}  |mu_k - mu_k-1|_1 {:.3}  ({:.1} s)",
            r.k,
            r.exploitability.unwrap(),
            r.mu_drift,
            r.wall_ms / 1e3
        );
    }
    Ok(())
}
