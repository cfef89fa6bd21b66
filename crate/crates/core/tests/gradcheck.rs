mod common;

use common::gradcases::{detector_loss_case, primitive_cases};
use common::grad_check;

const EPS: f64 = 1e-4;
const TOL: f64 = 1e-4;

#[test]
fn every_primitive_matches_central_differences() {
    for seed in 0..5 {
        for c in primitive_cases(seed) {
            let err = grad_check(&c.inputs, EPS, &c.f);
            assert!(err <= TOL, "{} (seed {seed}): relative error {err:e}", c.name);
        }
    }
}

#[test]
fn detector_loss_matches_central_differences() {
    for seed in [3, 11] {
        let c = detector_loss_case(seed);
        let err = grad_check(&c.inputs, EPS, &c.f);
        assert!(err <= TOL, "detector loss (seed {seed}): relative error {err:e}");
    }
}
