//! Exact MF-TRPO against fictitious play and online mirror descent on the
//! 5x5 target grid, all with the same environment and initial crowd.
//!
//!     cargo run --release --example baselines [K]

use mftrpo::baselines::{run_baseline, Baseline, BaselineConfig};
use mftrpo::envs::{GridCrowd, GridSpec};
use mftrpo::exact::{exact_mftrpo, ExactTrpoConfig, MftrpoConfig};
use mftrpo::trace::{EvalCadence, TraceOptions};
use mftrpo::{Result, RunTrace, StepSchedule};

fn main() -> Result<()> {
    let k: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5000);
    let eta = 0.05;
    let grid = GridCrowd::new(GridSpec::five_by_five(true))?;
    let nu = grid.nu();
    let mdp = grid.into_mdp(0.9)?;
    let trace = TraceOptions {
        cadence: EvalCadence::Every((k / 5).max(1)),
        unregularized: false,
        ..TraceOptions::default()
    };

    let mut mf = MftrpoConfig::new(ExactTrpoConfig::new(eta, 10), k, StepSchedule::Constant(0.01), 1, nu.clone());
    mf.trace = trace.clone();
    let mut fp = BaselineConfig::new(Baseline::FictitiousPlay, k, eta, nu.clone());
    fp.trace = trace.clone();
    let mut omd = BaselineConfig::new(Baseline::OnlineMirrorDescent, k, eta, nu);
    omd.learning_rate = 0.1;
    omd.trace = trace;

    let runs: Vec<RunTrace> = vec![exact_mftrpo(&mdp, &mf)?, run_baseline(&mdp, &fp)?, run_baseline(&mdp, &omd)?];
    print!("{:>6}", "k");
    for r in &runs {
        print!("{:>16}", r.algorithm);
    }
    println!();
    let rows: Vec<_> = runs[0].all_records().filter(|r| r.exploitability.is_some()).map(|r| r.k).collect();
    for k in rows {
        print!("{k:>6}");
        for r in &runs {
            let phi = r.all_records().find(|x| x.k == k).and_then(|x| x.exploitability);
            print!("{:>16.5}", phi.unwrap_or(f64::NAN));
        }
        println!();
    }
    Ok(())
}
