//! Geometry of the origin's basin of attraction, probed through certified
//! trajectory fates.

mod probes;
mod ray;

use nalgebra::DVector;
use serde::Serialize;

use crate::degree::safe_radius;
use crate::dynamics::{FateClassifier, FateVerdict, IntegratorOptions, DEFAULT_T_MAX};
use crate::error::{Error, Result};
use crate::model::SystemSpec;

pub use probes::{
    ellipsoid_pairs, equilibrium_ray_check, ConvexityReport, ConvexityViolation, EquilibriumRay, PairSource,
    SymmetryReport,
};
pub use ray::{
    CloudRecord, PointCloud, RayFlag, RayScanResult, COARSE_MARCH_POINTS, DEFAULT_RAY_TOL, MAX_UNDECIDED_HITS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BasinVerdict {
    In,
    Out,
    Undecided,
}

impl From<FateVerdict> for BasinVerdict {
    fn from(v: FateVerdict) -> Self {
        match v {
            FateVerdict::ConvergedToOrigin => BasinVerdict::In,
            FateVerdict::NotConverged => BasinVerdict::Out,
            FateVerdict::Undecided => BasinVerdict::Undecided,
        }
    }
}

impl std::fmt::Display for BasinVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BasinVerdict::In => "In",
            BasinVerdict::Out => "Out",
            BasinVerdict::Undecided => "Undecided",
        })
    }
}

/// A fate classifier plus the outer radius used to seed ray scans.
#[derive(Debug, Clone)]
pub struct BasinProbe {
    classifier: FateClassifier,
    outer_radius: f64,
}

impl BasinProbe {
    /// Needs both certificates: the inner one seeds ray scans and the outer
    /// one is the only source of `Out` verdicts.
    pub fn new(spec: &SystemSpec, t_max: f64, options: IntegratorOptions) -> Result<Self> {
        let classifier = FateClassifier::new(spec, t_max, options)?;
        let r_div = classifier
            .outer()
            .ok_or_else(|| Error::Unsupported("basin probing needs an anti-stable A".into()))?
            .r_div;
        let outer_radius = 2.0 * safe_radius(spec)?.max(r_div);
        Ok(Self {
            classifier,
            outer_radius,
        })
    }

    pub fn with_defaults(spec: &SystemSpec) -> Result<Self> {
        Self::new(spec, DEFAULT_T_MAX, IntegratorOptions::default())
    }

    pub fn classifier(&self) -> &FateClassifier {
        &self.classifier
    }

    pub fn spec(&self) -> &SystemSpec {
        self.classifier.spec()
    }

    /// `2 max(safe_radius, R_div)`, where ray scans place their outer seed.
    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }

    pub fn verdict(&self, x: &[f64]) -> Result<BasinVerdict> {
        Ok(self.classifier.classify(x)?.verdict.into())
    }
}

pub fn in_basin(spec: &SystemSpec, x: &DVector<f64>) -> Result<BasinVerdict> {
    let cls = FateClassifier::with_defaults(spec)?;
    Ok(cls.classify(x.as_slice())?.verdict.into())
}

pub fn boundary_ray_scan(spec: &SystemSpec, direction: &DVector<f64>, tol: f64) -> Result<RayScanResult> {
    BasinProbe::with_defaults(spec)?.scan_ray(direction.as_slice(), tol)
}

pub fn convexity_probe(spec: &SystemSpec, pairs: &PairSource) -> Result<ConvexityReport> {
    BasinProbe::with_defaults(spec)?.convexity(pairs)
}

pub fn basin_point_cloud(spec: &SystemSpec, num_rays: usize, seed: u64, tol: f64) -> Result<PointCloud> {
    BasinProbe::with_defaults(spec)?.point_cloud(num_rays, seed, tol)
}

pub fn symmetry_check(spec: &SystemSpec, num_points: usize, seed: u64) -> Result<SymmetryReport> {
    BasinProbe::with_defaults(spec)?.symmetry(num_points, seed)
}
