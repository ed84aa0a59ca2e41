//! Rank stratification: heads bifurcate into high-rank and low-rank regimes.
//!
//! A mixture layer drives half its heads with full-span streams (they climb
//! to the min(t, d) ceiling) and half with low-subspace streams (they
//! saturate early at their intrinsic ceiling).  The group split recovers the
//! generator's ground-truth labels from telemetry alone.
//!
//! ```bash
//! cargo run --release --example stratification
//! ```

use statelab::datagen::{StreamKind, StreamSpec};
use statelab::dynamics::{run_layer, RankKind};
use statelab::pruning::rank_group_split;
use statelab::spectral::RankTolerance;
use statelab::state::{HeadConfig, UpdateRule};

fn main() {
    let d = 64;
    let t_max = 512;
    let h = 16;
    let heads: Vec<HeadConfig> = (0..h)
        .map(|i| HeadConfig::new(d, d, UpdateRule::StandardLinear, i, 0).unwrap())
        .collect();
    let spec = StreamSpec::new(
        StreamKind::Mixture {
            labels: (0..h).map(|i| i < h / 2).collect(),
            low_m_k: 4,
            low_m_v: 4,
        },
        t_max,
        21,
        d,
        d,
    );
    let schedule: Vec<usize> = (1..=t_max).filter(|t| t % 32 == 0).collect();
    let run = run_layer(&heads, &spec, &schedule, &RankTolerance::default()).unwrap();
    let traj = run.trajectory(RankKind::Effective).unwrap();

    println!("effective rank per head over time (d = {d}, 8 full-span + 8 low-subspace heads):");
    print!("  step |");
    for i in 0..h {
        print!(" h{i:02}");
    }
    println!();
    for (i, &t) in traj.steps().iter().enumerate() {
        if t % 128 != 0 {
            continue;
        }
        print!("  {t:>4} |");
        for j in 0..h {
            print!(" {:>3}", traj.rank_vectors()[i][j]);
        }
        println!();
    }

    let (high, low) = rank_group_split(&traj, (d, t_max), 0.5).unwrap();
    println!("high-rank group (mean rank/d >= 0.5): {high:?}");
    println!("low-rank group: {low:?}");
    println!("generator labels: first {} heads were full-span", h / 2);
}
