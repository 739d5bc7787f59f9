mod support;

use support::gradients::{network_suite, op_suite};

#[test]
fn every_op_matches_finite_differences() {
    for result in op_suite(100) {
        println!("{result}");
        assert!(result.passed(), "{result}");
    }
}

#[test]
fn full_network_matches_finite_differences() {
    let result = network_suite(100);
    println!("{result}");
    assert!(result.passed(), "{result}");
    // The kink screen may only drop a minority of coordinates.
    assert!(result.skipped * 4 < result.checked, "{result}");
}
