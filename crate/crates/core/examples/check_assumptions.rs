//! Empirical checks of the structural assumptions: the monotonicity ratio of
//! the population operator for several M, and the geometric mixing rate of
//! the best-response chain.
//!
//!     cargo run --release --example check_assumptions

use mftrpo::envs::{GridCrowd, GridSpec};
use mftrpo::eval::{mixing_profile, monotonicity_probe};
use mftrpo::harness::fit_geometric_decay;
use mftrpo::Result;

fn main() -> Result<()> {
    let eta = 0.3;
    let grid = GridCrowd::new(GridSpec::five_by_five(false))?;
    let nu = grid.nu();
    let mdp = grid.into_mdp(0.9)?;

    for big_m in [1, 10, 100] {
        let probe = monotonicity_probe(&mdp, eta, big_m, 64, 1)?;
        println!("M = {big_m:>3}: max ratio {:.4} over {} pairs", probe.max_ratio, probe.samples);
    }

    let frozen = mdp.freeze(&nu)?;
    let (_, br) = frozen.soft_value_iteration(eta, 1e-12)?;
    let profile = mixing_profile(&frozen.induced_kernel(&br)?, &nu, 200)?;
    if let Some(fit) = fit_geometric_decay(&profile) {
        println!("TV(nu K^t, G) ~ rho^t with rho = {:.4} (R^2 {:.4})", fit.rho, fit.r_squared);
    }
    Ok(())
}
