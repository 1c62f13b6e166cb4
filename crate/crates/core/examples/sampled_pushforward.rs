//! Particle estimate of the population pushforward against the exact
//! `mu (P^pi_mu)^M` on a small random game.
//!
//!     cargo run --release --example sampled_pushforward

use mftrpo::dynamics::kernel_power_apply;
use mftrpo::envs::{random_dist, random_game, random_policy, RandomGameSpec};
use mftrpo::rng::SeedPath;
use mftrpo::sampled::{make_oracle, population_pushforward_estimate};
use mftrpo::{Result, StepSchedule};

fn main() -> Result<()> {
    let mdp = random_game(&RandomGameSpec::new(5, 2, 3), 0.9)?;
    let mut rng = SeedPath::new(9).rng();
    let nu = random_dist(5, &mut rng);
    let pi = random_policy(5, 2, &mut rng);
    let oracle = make_oracle(&mdp, &nu)?;
    let big_m = 3;

    // k = 1: particles start from nu, which is also mu_0
    let exact = kernel_power_apply(&nu, &mdp.freeze(&nu)?.induced_kernel(&pi)?, big_m)?;
    for p in [100, 1_000, 10_000, 100_000] {
        let est = population_pushforward_estimate(
            &oracle,
            &pi,
            &nu,
            &[],
            &StepSchedule::Constant(0.5),
            1,
            big_m,
            p,
            &SeedPath::new(p as u64),
        )?;
        println!("P = {p:>6}: l1 error {:.4}", est.l1_distance(&exact));
    }
    Ok(())
}
