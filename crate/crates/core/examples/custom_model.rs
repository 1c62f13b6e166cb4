//! Plugging in a user-defined game through `MeanFieldModel`: a ring of
//! restaurants where diners move left, stay or move right and dislike
//! crowded tables.
//!
//!     cargo run --release --example custom_model

use mftrpo::exact::{exact_mftrpo, ExactTrpoConfig, MftrpoConfig};
use mftrpo::{Dist, MeanFieldModel, MfMdp, Result, StepSchedule};

struct Ring {
    n: usize,
    quality: Vec<f64>,
}

impl MeanFieldModel for Ring {
    fn n_states(&self) -> usize {
        self.n
    }

    fn n_actions(&self) -> usize {
        3
    }

    fn transition(&self, s: usize, a: usize, _mu: &Dist, out: &mut [f64]) {
        out.fill(0.0);
        let next = (s + self.n + a - 1) % self.n;
        out[next] += 0.9;
        out[s] += 0.1;
    }

    fn reward(&self, s: usize, _a: usize, mu: &Dist) -> f64 {
        self.quality[s] - 2.0 * mu[s]
    }
}

fn main() -> Result<()> {
    let ring = Ring {
        n: 6,
        quality: vec![1.0, 0.2, 0.5, 0.9, 0.1, 0.4],
    };
    // |r| <= 1 + 2
    let mdp = MfMdp::new(ring, 0.9, 3.0)?;
    let cfg = MftrpoConfig::new(
        ExactTrpoConfig::new(0.1, 10),
        2000,
        StepSchedule::Constant(0.05),
        1,
        Dist::point_mass(6, 1),
    );
    let trace = exact_mftrpo(&mdp, &cfg)?;
    println!("initial exploitability {:.4}", trace.initial.exploitability.unwrap());
    println!("final exploitability   {:.2e}", trace.final_exploitability.unwrap());
    let shares: Vec<String> = trace.final_mu.as_slice().iter().map(|m| format!("{m:.3}")).collect();
    println!("crowd per restaurant   {}", shares.join(" "));
    Ok(())
}
