//! Acceptance suite: runs every shipped criterion at its stated tolerance
//! and prints one pass/fail line per criterion.
//!
//! Two clauses are known-red at desk scale and fail here honestly rather
//! than being weakened: the h_rho-halving clause of criterion 6 (the rho
//! midpoint sum is already converged far below the box floor at every legal
//! operating point) and the shallow-well slope clause of criterion 11 (the
//! zero-energy scattering amplitude sec^2(1) ~ 3.43 of the depth -1 well
//! develops through every reachable window, flattening the measured slope
//! to ~ -1.0 independent of box size).

use dispersive::acceptance;

const SEED: u64 = 7;

fn check(c: acceptance::Criterion) {
    println!("{}", c.line());
    assert!(c.passed, "{}", c.line());
}

#[test]
fn criterion_01_kato_norm_closed_form() {
    check(acceptance::criterion_1());
}

#[test]
fn criterion_02_scaling_invariance() {
    check(acceptance::criterion_2());
}

#[test]
fn criterion_03_birman_schwinger_norm_bound() {
    check(acceptance::criterion_3());
}

#[test]
fn criterion_04_resonance_threshold() {
    check(acceptance::criterion_4());
}

#[test]
fn criterion_05_wiener_norm_bound() {
    check(acceptance::criterion_5());
}

#[test]
fn criterion_06_fourier_consistency() {
    check(acceptance::criterion_6());
}

#[test]
fn criterion_07_wiener_inversion_contractive() {
    check(acceptance::criterion_7());
}

#[test]
fn criterion_08_wiener_inversion_local_stage() {
    check(acceptance::criterion_8());
}

#[test]
fn criterion_09_kernel_pair() {
    check(acceptance::criterion_9());
}

#[test]
fn criterion_10_free_decay() {
    check(acceptance::criterion_10());
}

#[test]
fn criterion_11_perturbed_decay() {
    check(acceptance::criterion_11());
}

#[test]
fn criterion_12_invariant_sweep() {
    check(acceptance::criterion_12(SEED));
}
