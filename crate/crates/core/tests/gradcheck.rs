mod common;

use common::grad;
use common::GRAD_TOL;

const CASES: usize = 24;

fn check(name: &str, case: fn(u64) -> Option<f64>) {
    let errs = grad::run(case, CASES);
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    assert!(worst < GRAD_TOL, "{name}: worst relative error {worst}");
}

#[test]
fn conv2d_gradients() {
    check("conv2d", grad::conv);
}

#[test]
fn relu_gradients() {
    check("relu", grad::relu_case);
}

#[test]
fn cross_entropy_gradients() {
    check("cross_entropy", grad::cross_entropy);
}

#[test]
fn ohem_gradients() {
    check("ohem", grad::ohem);
}

#[test]
fn contrastive_chain_gradients() {
    check("contrastive", grad::contrastive);
}

/// Through five layers the f32 loss resolves the finite difference only to
/// about 1%, so this composition check is looser than the per-op ones.
#[test]
fn contrast_network_gradients() {
    let errs = grad::run(grad::network, CASES);
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    assert!(worst < 1e-2, "contrast network: worst relative error {worst}");
}
