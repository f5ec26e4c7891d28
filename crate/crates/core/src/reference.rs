//! The three-dimensional non-convex-basin example and its probe points.

use nalgebra::DVector;

use crate::model::SystemSpec;

/// System file shipped with the crate (`M = 1`).
pub const SYSTEM_JSON: &str = include_str!("../assets/reference_system.json");

pub const P1: [f64; 3] = [-1.080860, -0.487008, -0.804244];
pub const P2: [f64; 3] = [0.514148, -0.183494, 0.797384];
/// Printed midpoint of `P1` and `P2`.
pub const P3: [f64; 3] = [-0.283356, -0.335251, -0.003430];

pub fn system() -> SystemSpec {
    SystemSpec::from_json(SYSTEM_JSON).expect("embedded system file is valid")
}

pub fn p1() -> DVector<f64> {
    DVector::from_row_slice(&P1)
}

pub fn p2() -> DVector<f64> {
    DVector::from_row_slice(&P2)
}

pub fn p3() -> DVector<f64> {
    DVector::from_row_slice(&P3)
}

/// True when `spec` is the embedded example up to rounding of the gain.
pub fn matches(spec: &SystemSpec) -> bool {
    let reference = system();
    spec.n() == 3
        && spec.m() == 1
        && spec.sat_bound() == reference.sat_bound()
        && (spec.a() - reference.a()).amax() <= 1e-12
        && (spec.b() - reference.b()).amax() <= 1e-12
        && (spec.k() - reference.k()).amax() <= 1e-12
}
