//! Directional stability of the nuclear-norm vector.
//!
//! Each rank-one write changes a head's nuclear norm by at most |k||v|, so
//! the layer-level norm vector n(t) moves by a bounded increment while its
//! length keeps growing.  The relative step size r_t = B / |n(t-1)| decays,
//! and adjacent cosines obey cos(n(t-1), n(t)) >= (1 - r_t) / (1 + r_t).
//! The orthogonal decomposition of each increment shows how little of it
//! points away from the established direction.
//!
//! ```bash
//! cargo run --release --example norm_stability
//! ```

use statelab::datagen::{StreamKind, StreamSpec};
use statelab::dynamics::{
    cosine_lower_bound, decompose_norm_increment, run_layer, verify_norm_stability, RankKind,
};
use statelab::spectral::RankTolerance;
use statelab::state::{HeadConfig, UpdateRule};

fn main() {
    let d = 16;
    let t_max = 512;
    let heads: Vec<HeadConfig> = (0..16)
        .map(|i| HeadConfig::new(d, d, UpdateRule::StandardLinear, i, 0).unwrap())
        .collect();
    let spec = StreamSpec::new(StreamKind::Gaussian, t_max, 9, d, d);
    let schedule: Vec<usize> = (1..=t_max).collect();
    let run = run_layer(&heads, &spec, &schedule, &RankTolerance::default()).unwrap();
    let traj = run.trajectory(RankKind::Effective).unwrap();

    let out = verify_norm_stability(&traj, None).unwrap();
    println!("measured tightest increment bound B = {:.4}", out.bound_used);
    println!("  step    r_t        bound (1-r)/(1+r)");
    for &t in &[2usize, 8, 32, 128, 512] {
        let i = traj.step_index(t).unwrap() - 1; // pairs are indexed from the second step
        let r = out.relative_steps[i];
        println!("  {:>4}    {:.5}    {:.5}", t, r, cosine_lower_bound(r.min(1.0)));
    }
    println!(
        "certificate: {} over {} adjacent pairs (worst margin {:.3e})",
        if out.certificate.passed { "PASS" } else { "FAIL" },
        out.certificate.checks,
        out.certificate.worst_margin
    );

    let decs = decompose_norm_increment(&traj).unwrap();
    let late = &decs[decs.len() - 1];
    let early = &decs[4];
    println!("increment decomposition against the previous direction:");
    for (label, dec) in [("early", early), ("late", late)] {
        println!(
            "  {label}: step {:>3}  a_t = {:+.4}  orthogonal ratio = {:.4}  cosine = {:.8}",
            dec.step, dec.parallel_coeff, dec.orthogonal_ratio, dec.adjacent_cosine
        );
    }
}
