//! Drives the experiment harness from code: loads a bundled preset, shrinks
//! it, and writes metrics, snapshots and heatmaps to a temporary directory.
//!
//!     cargo run --release --example run_preset [preset]

use mftrpo::harness::{load_preset, run_experiment, RunOptions};
use mftrpo::Result;

fn main() -> Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "grid5-exact".into());
    let mut cfg = load_preset(&name)?;
    cfg.solver.outer_iters = cfg.solver.outer_iters.min(500);
    cfg.output.snapshot_steps = vec![0, cfg.solver.outer_iters];
    let dir = std::env::temp_dir().join(format!("mftrpo-{name}"));
    let out = run_experiment(
        &cfg,
        &RunOptions {
            out_dir: Some(dir),
            ..RunOptions::default()
        },
    )?;
    for f in &out.files {
        println!("{}", f.display());
    }
    let summary = std::fs::read_to_string(out.dir.join("summary.csv")).expect("summary was written");
    println!("\nlast summary row: {}", summary.lines().last().unwrap_or(""));
    Ok(())
}
