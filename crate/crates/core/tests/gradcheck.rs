mod common;

use std::collections::BTreeMap;

use common::cases::{end_to_end_cases, op_cases};

#[test]
fn every_op_matches_central_differences() {
    let cases = op_cases(11, 4);
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    for c in &cases {
        let e = c.error();
        let w = worst.entry(c.name).or_insert(0.0);
        *w = w.max(e);
    }
    for (name, e) in &worst {
        assert!(*e < 1e-5, "{name}: gradient error {e:e}");
    }
    assert!(worst.len() >= 30, "only {} ops covered", worst.len());
}

#[test]
fn two_layer_losses_match_central_differences() {
    for c in end_to_end_cases(3) {
        assert!(c.error < 1e-4, "{}: gradient error {:e}", c.name, c.error);
    }
}
