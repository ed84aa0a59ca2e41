//! Temporal consistency: the relative rank/norm profile across heads locks
//! in early and persists.
//!
//! For widely separated step pairs the report computes Spearman rank
//! correlation and cosine similarity of both the rank vector r(t) and the
//! norm vector n(t), plus the per-head scatter coordinates those metrics
//! summarize.
//!
//! ```bash
//! cargo run --release --example consistency
//! ```

use statelab::datagen::{StreamKind, StreamSpec};
use statelab::dynamics::{consistency_report, run_layer, RankKind};
use statelab::spectral::RankTolerance;
use statelab::state::{HeadConfig, UpdateRule};

fn opt(v: Option<f64>) -> String {
    v.map_or("undefined".into(), |x| format!("{x:.4}"))
}

fn main() {
    let d = 32;
    let h = 16;
    let heads: Vec<HeadConfig> = (0..h)
        .map(|i| HeadConfig::new(d, d, UpdateRule::StandardLinear, i, 0).unwrap())
        .collect();
    // a stratified layer gives the metrics a nontrivial head profile
    let spec = StreamSpec::new(
        StreamKind::Mixture {
            labels: (0..h).map(|i| i % 2 == 0).collect(),
            low_m_k: 3,
            low_m_v: 3,
        },
        192,
        5,
        d,
        d,
    );
    let run = run_layer(&heads, &spec, &[64, 128, 192], &RankTolerance::default()).unwrap();
    let traj = run.trajectory(RankKind::Effective).unwrap();

    let rows = consistency_report(&traj, &[(64, 128), (128, 192)]).unwrap();
    for row in &rows {
        println!("pair t = {} vs t = {}", row.pair.0, row.pair.1);
        println!(
            "  rank: spearman {}  cosine {}",
            opt(row.rank_spearman),
            opt(row.rank_cosine)
        );
        println!(
            "  norm: spearman {}  cosine {}",
            opt(row.norm_spearman),
            opt(row.norm_cosine)
        );
        println!("  head scatter (rank_x -> rank_y, norm_x -> norm_y):");
        for p in row.scatter.iter().take(4) {
            println!(
                "    head {:>2}: {:>3} -> {:>3}   {:>9.2} -> {:>9.2}",
                p.head_id, p.rank_x, p.rank_y, p.norm_x, p.norm_y
            );
        }
        println!("    ... ({} heads total)", row.scatter.len());
    }
}
