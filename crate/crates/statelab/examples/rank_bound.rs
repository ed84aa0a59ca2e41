//! State-rank upper bound: rank(S(t)) <= min(t, d) for every update rule.
//!
//! Runs each rule on a Gaussian stream and prints the measured rank next to
//! the bound, then evaluates the rank-bound certificate across all rules.
//!
//! ```bash
//! cargo run --release --example rank_bound
//! ```

use statelab::datagen::{StreamKind, StreamSpec};
use statelab::dynamics::{run_layer, verify_rank_bound, verify_step_growth, RankKind};
use statelab::spectral::RankTolerance;
use statelab::state::{HeadConfig, UpdateRule};

fn main() {
    let d = 16;
    let t_max = 48;
    let tol = RankTolerance::default();
    let schedule: Vec<usize> = (1..=t_max).collect();

    for rule in [
        UpdateRule::StandardLinear,
        UpdateRule::GatedLinear,
        UpdateRule::DeltaNet,
    ] {
        let heads: Vec<HeadConfig> = (0..4)
            .map(|h| HeadConfig::new(d, d, rule, h, 0).unwrap())
            .collect();
        let mut spec = StreamSpec::new(StreamKind::Gaussian, t_max, 7, d, d);
        if rule == UpdateRule::DeltaNet {
            spec = spec.with_normalized_keys();
        }
        let run = run_layer(&heads, &spec, &schedule, &tol).unwrap();
        let traj = run.trajectory(RankKind::Algebraic).unwrap();

        println!("rule = {}", rule.name());
        println!("  step   rank(head 0)   bound min(t, d)");
        for &t in &[1usize, 4, 8, 12, 16, 24, 48] {
            let i = traj.step_index(t).unwrap();
            println!(
                "  {:>4}   {:>12}   {:>15}",
                t,
                traj.rank_vectors()[i][0],
                t.min(d)
            );
        }

        let cert = verify_rank_bound(&traj);
        let growth = verify_step_growth(&traj);
        println!(
            "  rank-bound certificate: {} (checks: {}, worst margin: {})",
            if cert.passed { "PASS" } else { "FAIL" },
            cert.checks,
            cert.worst_margin
        );
        println!(
            "  step-growth certificate (rank increment <= 1): {}\n",
            if growth.passed { "PASS" } else { "FAIL" }
        );
    }
}
