//! The delta rule, two ways: the projection form
//! `(I - lr k k^T) S + lr k v^T` and the error-correction form
//! `S + k e^T` with `e = lr (v - S^T k)` are the same update.
//!
//! Also shows the behaviors that make the rule an online regressor: exact
//! recall of a stored association and idempotence under replay.
//!
//! ```bash
//! cargo run --release --example delta_rule
//! ```

use nalgebra::DVector;
use statelab::state::{
    delta_correction_form, delta_projection_form, readout, update_delta, KVEvent, StateMatrix,
    UpdateRule,
};

fn main() {
    // both algebraic forms agree on a random state
    let mut seed = 42u64;
    let mut next = move || {
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((seed >> 11) as f64) / (1u64 << 53) as f64 * 10.0 - 5.0
    };
    let state = StateMatrix::from_entries(
        nalgebra::DMatrix::from_fn(4, 4, |_, _| next()),
        UpdateRule::DeltaNet,
    );
    let ev = KVEvent::new(
        DVector::from_fn(4, |_, _| next()),
        DVector::from_fn(4, |_, _| next()),
    )
    .unwrap()
    .with_lr(0.5)
    .unwrap();
    let a = delta_projection_form(&state, &ev).unwrap();
    let b = delta_correction_form(&state, &ev).unwrap();
    println!(
        "projection form vs error-correction form: relative difference {:.3e}",
        (&a - &b).norm() / a.norm()
    );

    // store one association, then read it back
    let k = DVector::from_vec(vec![0.6, 0.8, 0.0]);
    let v = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    let event = KVEvent::new(k.clone(), v.clone()).unwrap();
    let s0 = StateMatrix::zeros(3, 3, UpdateRule::DeltaNet).unwrap();
    let s1 = update_delta(s0, &event).unwrap();
    let recalled = readout(&s1, &k).unwrap();
    println!("stored value  : {:?}", v.as_slice());
    println!("recalled S^T k: {:?}", recalled.as_slice());

    // replaying the same event is a no-op once the association is stored
    let s2 = update_delta(s1.clone(), &event).unwrap();
    println!(
        "replay changes the state by {:.3e} (reconstruction error already zero)",
        (s2.entries() - s1.entries()).norm()
    );

    // the correction term lets the rule overwrite: a new value under the
    // same key replaces the old association instead of accumulating
    let v2 = DVector::from_vec(vec![-3.0, 0.0, 2.0]);
    let overwrite = KVEvent::new(k.clone(), v2.clone()).unwrap();
    let s3 = update_delta(s2, &overwrite).unwrap();
    let recalled = readout(&s3, &k).unwrap();
    println!("overwritten   : {:?}", v2.as_slice());
    println!("recalled S^T k: {:?}", recalled.as_slice());
}
