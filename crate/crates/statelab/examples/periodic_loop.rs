//! Repetitive inputs trap the state in a low-rank regime.
//!
//! A loop over U distinct events keeps the state inside the span of U outer
//! products, so its rank is capped at U regardless of the ambient dimension
//! or the stream length — the structural signature of looping inputs.
//!
//! ```bash
//! cargo run --release --example periodic_loop
//! ```

use statelab::datagen::{StreamKind, StreamSpec};
use statelab::dynamics::{run_layer, RankKind};
use statelab::spectral::RankTolerance;
use statelab::state::{HeadConfig, UpdateRule};

fn main() {
    let d = 32;
    let t_max = 240;
    let unique = 6;
    let heads = vec![HeadConfig::new(d, d, UpdateRule::StandardLinear, 0, 0).unwrap()];
    let schedule: Vec<usize> = (1..=t_max).collect();

    println!("d = {d}, loop period U = {unique}, T = {t_max}");

    let looped = StreamSpec::new(StreamKind::PeriodicLoop { unique }, t_max, 3, d, d);
    let run = run_layer(&heads, &looped, &schedule, &RankTolerance::default()).unwrap();
    let loop_traj = run.trajectory(RankKind::Algebraic).unwrap();

    let fresh = StreamSpec::new(StreamKind::Gaussian, t_max, 3, d, d);
    let run = run_layer(&heads, &fresh, &schedule, &RankTolerance::default()).unwrap();
    let fresh_traj = run.trajectory(RankKind::Algebraic).unwrap();

    println!("  step   rank (looped)   rank (fresh tokens)   bound min(t, d)");
    for &t in &[1usize, 3, 6, 12, 32, 64, 120, 240] {
        let i = loop_traj.step_index(t).unwrap();
        println!(
            "  {:>4}   {:>13}   {:>19}   {:>15}",
            t,
            loop_traj.rank_vectors()[i][0],
            fresh_traj.rank_vectors()[i][0],
            t.min(d)
        );
    }

    let max_loop_rank = loop_traj
        .rank_vectors()
        .iter()
        .map(|r| r[0])
        .fold(0.0, f64::max);
    println!("max rank under the loop: {max_loop_rank} (cap = {unique})");
}
