//! Intrinsic per-head rank ceilings from the key/value spans.
//!
//! When keys live in an m_k-dimensional subspace and values in an
//! m_v-dimensional one, the state rank can never exceed
//! min(dim span keys, dim span values), no matter how long the stream runs.
//! The span tracker measures those dimensions incrementally from the raw
//! stream and the certificate checks the bound at every recorded step.
//!
//! ```bash
//! cargo run --release --example subspace_bounds
//! ```

use statelab::datagen::{StreamKind, StreamSpec};
use statelab::dynamics::{run_layer, verify_span_bound, RankKind};
use statelab::spectral::RankTolerance;
use statelab::state::{HeadConfig, UpdateRule};

fn main() {
    let d = 32;
    let t_max = 200;
    let heads: Vec<HeadConfig> = (0..2)
        .map(|h| HeadConfig::new(d, d, UpdateRule::StandardLinear, h, 0).unwrap())
        .collect();
    let spec = StreamSpec::new(
        StreamKind::SubspaceConstrained { m_k: 3, m_v: 5 },
        t_max,
        11,
        d,
        d,
    );
    let schedule: Vec<usize> = (1..=t_max).collect();
    let run = run_layer(&heads, &spec, &schedule, &RankTolerance::default()).unwrap();
    let traj = run.trajectory(RankKind::Algebraic).unwrap();

    println!("ambient dimension d = {d}, key span = 3, value span = 5");
    println!("  step   rank(head 0)");
    for &t in &[1usize, 2, 3, 4, 10, 50, 200] {
        let i = traj.step_index(t).unwrap();
        println!("  {:>4}   {}", t, traj.rank_vectors()[i][0]);
    }

    let (cert, trackers) = verify_span_bound(&run.streams, &traj).unwrap();
    for (h, tr) in trackers.iter().enumerate() {
        println!(
            "head {h}: key span dim {}, value span dim {}, intrinsic ceiling m = {}",
            tr.key_dim(),
            tr.value_dim(),
            tr.intrinsic_bound()
        );
    }
    println!(
        "span-bound certificate: {} (checks: {}, worst margin: {})",
        if cert.passed { "PASS" } else { "FAIL" },
        cert.checks,
        cert.worst_margin
    );
}
