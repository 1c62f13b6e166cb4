//! Exact TRPO at a frozen mean field converges to the soft best response.
//!
//!     cargo run --release --example exact_best_response

use mftrpo::envs::{random_dist, random_game, RandomGameSpec};
use mftrpo::exact::{exact_trpo, ExactTrpoConfig};
use mftrpo::rng::SeedPath;
use mftrpo::Result;

fn main() -> Result<()> {
    let eta = 0.1;
    let mdp = random_game(&RandomGameSpec::new(4, 3, 11), 0.9)?;
    let mu = random_dist(4, &mut SeedPath::new(5).rng());

    let (best, br) = mdp.freeze(&mu)?.soft_value_iteration(eta, 1e-12)?;
    let target = mu.dot(&best.j);
    println!("soft value iteration: value {target:.6}");

    for l in [10, 100, 1000] {
        let run = exact_trpo(&mdp, &mu, &ExactTrpoConfig::new(eta, l))?;
        let value = *run.values.last().unwrap();
        println!(
            "L = {l:>4}: value {value:.6}  gap {:.2e}  max TV to best response {:.2e}",
            target - value,
            run.policy.max_tv_distance(&br)
        );
    }
    Ok(())
}
