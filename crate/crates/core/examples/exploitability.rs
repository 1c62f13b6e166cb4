//! Equilibrium diagnostics for a policy and mean field: exploitability
//! (regularized and not), the two MFNE residuals and the per-state
//! policy/value inequality.
//!
//!     cargo run --release --example exploitability

use mftrpo::envs::{GridCrowd, GridSpec};
use mftrpo::eval::{exploitability, exploitability_unregularized, mfne_residual, pinsker_bound_check};
use mftrpo::exact::exact_fixed_point;
use mftrpo::{Dist, Policy, Result, StepSchedule};

fn report(label: &str, mdp: &mftrpo::MfMdp, pi: &Policy, mu: &Dist, eta: f64) -> Result<()> {
    let phi = exploitability(mdp, pi, mu, eta, 1e-10)?;
    let phi0 = exploitability_unregularized(mdp, pi, mu, 1e-10)?;
    let res = mfne_residual(mdp, pi, mu, eta)?;
    let pinsker = pinsker_bound_check(mdp, pi, mu, eta)?;
    println!("{label}");
    println!("  exploitability      {:.6} (unregularized {:.6})", phi.phi, phi0.phi);
    println!("  value gap           {:.3e}", res.value_gap);
    println!("  fixed-point gap     {:.3e}", res.fixed_point_gap);
    println!("  TV^2 <= bound       {} (min slack {:.3e})", pinsker.passed, pinsker.min_slack);
    Ok(())
}

fn main() -> Result<()> {
    let eta = 0.05;
    let grid = GridCrowd::new(GridSpec::five_by_five(true))?;
    let nu = grid.nu();
    let mdp = grid.into_mdp(0.9)?;
    let n = mdp.n_states();

    report("uniform policy, uniform crowd", &mdp, &Policy::uniform(n, 5), &Dist::uniform(n), eta)?;

    let mu = exact_fixed_point(&mdp, &nu, StepSchedule::Constant(0.05), 10, 3000, eta)?;
    let (_, br) = mdp.freeze(&mu)?.soft_value_iteration(eta, 1e-12)?;
    report("best response at the damped fixed point", &mdp, &br, &mu, eta)?;
    Ok(())
}
