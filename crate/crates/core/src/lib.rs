//! Analysis of linear plants under saturated state feedback,
//! `x' = A x + B sat(K x)`.
//!
//! - [`model`]: system data, the closed-loop field, region bookkeeping,
//!   validation and synthesis helpers.
//! - [`equilibria`]: exhaustive equilibrium enumeration over region
//!   signatures, indices, stability and the single-input parity law.
//! - [`degree`]: Brouwer degree over balls by planar winding and by signed
//!   preimage counting, and the index-sum identity.
//! - [`dynamics`]: Lyapunov solver, inner/outer certificates, adaptive
//!   Dormand-Prince integration and certified trajectory fates.
//! - [`basin`]: membership, boundary ray scans, symmetry and convexity probes.

pub mod basin;
pub mod degree;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod linalg;
pub mod model;
pub mod reference;
mod serde_util;

pub use nalgebra;
pub use num_complex;

pub use basin::{
    basin_point_cloud, boundary_ray_scan, convexity_probe, in_basin, symmetry_check, BasinProbe, BasinVerdict,
    ConvexityReport, PairSource, PointCloud, RayScanResult, SymmetryReport,
};
pub use degree::{
    index_sum_check, piecewise_affine_degree, safe_radius, winding_number_2d, winding_number_spec, DegreeMethod,
    DegreeReport, IndexSumReport,
};
pub use dynamics::{
    classify_fate, convergence_certificate, escape_certificate, integrate_adaptive, solve_lyapunov, EscapeCertificate,
    FateClassifier, FateReport, FateVerdict, LyapunovCertificate, Trajectory,
};
pub use equilibria::{
    classify_stability, enumerate_equilibria, equilibrium_index, parity_check, Equilibrium, EquilibriumSet,
    ParityReport, Stability,
};
pub use error::{Error, Result};
pub use model::{
    closed_loop_field, eigenvalues, place_poles_single_input, random_antistable_system, region_jacobian, region_offset,
    region_signature, saturate, validate_spec, Channel, RegionInfo, RegionSignature, SystemSpec, ValidationReport,
};
