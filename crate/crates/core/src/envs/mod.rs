//! Benchmark games and oracle adapters.

mod grid;
mod islands;
mod random;

use std::io::Write;

pub use grid::{build_grid_crowd, GridAction, GridCrowd, GridSpec, DEFAULT_MU_FLOOR};
pub use islands::{build_two_islands, IslandsSpec, TwoIslands, ISLAND_SIZE};
pub use random::{random_dist, random_game, random_policy, RandomGameSpec};

use crate::error::Result;
use crate::mdp::MfMdp;
use crate::types::Dist;

/// Writes the transition table and rewards at mean field `mu` as CSV with
/// header `state,action,next_state,prob,reward`, skipping zero entries.
pub fn write_transition_table<W: Write>(mdp: &MfMdp, mu: &Dist, mut out: W) -> Result<()> {
    let frozen = mdp.freeze(mu)?;
    let io = |e| crate::error::Error::Io {
        path: "<transition table>".into(),
        source: e,
    };
    writeln!(out, "state,action,next_state,prob,reward").map_err(io)?;
    for s in 0..frozen.n_states() {
        for a in 0..frozen.n_actions() {
            let r = frozen.reward(s, a);
            for &(t, p) in frozen.successors(s, a) {
                writeln!(out, "{s},{a},{t},{p},{r}").map_err(io)?;
            }
        }
    }
    Ok(())
}
