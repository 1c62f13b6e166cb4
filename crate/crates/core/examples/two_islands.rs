//! Exact MF-TRPO on the two-islands graph: the crowd starts on island one
//! and drifts to the better-paying island two.
//!
//!     cargo run --release --example two_islands

use mftrpo::envs::{IslandsSpec, TwoIslands, ISLAND_SIZE};
use mftrpo::exact::{exact_mftrpo, ExactTrpoConfig, MftrpoConfig};
use mftrpo::trace::EvalCadence;
use mftrpo::{Result, StepSchedule};

fn main() -> Result<()> {
    let islands = TwoIslands::new(IslandsSpec {
        seed: 7,
        ..IslandsSpec::default()
    })?;
    let nu = islands.nu();
    let mdp = islands.into_mdp(0.9)?;
    let mut cfg = MftrpoConfig::new(ExactTrpoConfig::new(0.05, 10), 5000, StepSchedule::Constant(0.01), 1, nu);
    cfg.trace.cadence = EvalCadence::Every(1000);
    cfg.trace.snapshot_steps = vec![0, 1000, 2000, 5000];
    let trace = exact_mftrpo(&mdp, &cfg)?;

    for (k, mu) in &trace.mu_snapshots {
        let second: f64 = mu.as_slice()[ISLAND_SIZE..].iter().sum();
        let phi = trace.all_records().find(|r| r.k == *k).and_then(|r| r.exploitability);
        println!("step {k:>4}: mass on island two {second:.3}, exploitability {:.4}", phi.unwrap_or(f64::NAN));
    }
    Ok(())
}
