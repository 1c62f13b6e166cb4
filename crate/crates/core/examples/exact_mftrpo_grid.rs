//! Exact MF-TRPO on the 5x5 crowd grid with a point of interest, printing the
//! exploitability curve and the final crowd as a text heatmap.
//!
//!     cargo run --release --example exact_mftrpo_grid [K]

use mftrpo::envs::{GridCrowd, GridSpec};
use mftrpo::exact::{exact_mftrpo, ExactTrpoConfig, MftrpoConfig};
use mftrpo::trace::EvalCadence;
use mftrpo::{Result, StepSchedule};

fn main() -> Result<()> {
    let k: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5000);
    let grid = GridCrowd::new(GridSpec::five_by_five(true))?;
    let mdp = grid.clone().into_mdp(0.9)?;

    let mut cfg = MftrpoConfig::new(ExactTrpoConfig::new(0.05, 10), k, StepSchedule::Constant(0.01), 1, grid.nu());
    cfg.trace.cadence = EvalCadence::Every((k / 10).max(1));
    let trace = exact_mftrpo(&mdp, &cfg)?;

    for r in trace.all_records().filter(|r| r.exploitability.is_some()) {
        println!("k = {:>5}  exploitability {:.5}", r.k, r.exploitability.unwrap());
    }
    println!("final (pi_K+1, mu_K): {:.5}", trace.final_exploitability.unwrap());

    println!("\nmean field after {k} iterations (x across, y down):");
    for y in 0..grid.height() {
        let row: Vec<String> = (0..grid.width())
            .map(|x| match grid.state_of(x, y) {
                Some(s) => format!("{:5.3}", trace.final_mu[s]),
                None => "  ## ".into(),
            })
            .collect();
        println!("  {}", row.join(" "));
    }
    Ok(())
}
