//! Brouwer degree of the closed-loop field over balls `B(r)`.
//!
//! Two independent routes are provided:
//!
//! - [`winding_number_2d`] tracks the angle of `f/|f|` around a circle
//!   (planar systems only);
//! - [`piecewise_affine_degree`] counts the preimages of a small regular
//!   value `c`, each weighted by the determinant sign of its region's
//!   Jacobian. The field is affine on every region, so each region holds at
//!   most one preimage and the count is exact once `c` keeps all preimages
//!   away from switching planes and from the sphere.
//!
//! [`index_sum_check`] compares the degree with the sum of equilibrium
//! indices from [`crate::equilibria`].

mod sphere;
mod winding;

pub use sphere::{fibonacci_sphere, unit_directions};
pub use winding::{winding_number_2d, winding_number_spec, MAX_WINDING_SAMPLES};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::equilibria::{enumerate_equilibria, region_root, GP_TOL};
use crate::error::{invalid, positive_finite, Error, Result};
use crate::linalg;
use crate::model::{validate_spec, Channel, RegionSignature, SystemSpec};

/// Regular value magnitude relative to the smallest sampled `|f|` on the sphere.
pub const REGULAR_VALUE_SCALE: f64 = 1e-6;
/// Preimages closer than this to a switching plane or to the sphere force a redraw.
pub const PREIMAGE_MARGIN: f64 = 1e-9;
pub const MAX_REDRAWS: usize = 16;
const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DegreeMethod {
    Winding2D,
    PiecewiseAffinePreimage,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DegreeContribution {
    #[serde(serialize_with = "crate::serde_util::dvector")]
    pub x: DVector<f64>,
    pub signature: RegionSignature,
    pub sign: i32,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DegreeReport {
    pub value: i32,
    pub method: DegreeMethod,
    pub radius: f64,
    #[serde(serialize_with = "crate::serde_util::dvector")]
    pub regular_value: DVector<f64>,
    pub solutions: Vec<DegreeContribution>,
    pub margin_ok: bool,
    /// Smallest `|f|` over the sphere samples.
    pub min_sphere_norm: f64,
    /// Regular values tried, including the accepted one.
    pub attempts: usize,
    pub degenerate_regions: Vec<RegionSignature>,
}

/// Radius beyond which `|A x|` dominates `|B sat(K x)|` on the whole sphere:
/// `|B|_2 M sqrt(m) / sigma_min(A)`.
pub fn safe_radius(spec: &SystemSpec) -> Result<f64> {
    if linalg::is_singular(spec.a(), 1e-12) {
        return Err(Error::SingularEquation("A is singular; no safe radius".into()));
    }
    let perturbation = linalg::spectral_norm(spec.b()) * spec.sat_bound() * (spec.m() as f64).sqrt();
    Ok(perturbation / linalg::sigma_min(spec.a()))
}

/// Smallest `|f(x)|` over deterministic samples of the sphere of radius `r`.
pub fn min_field_norm_on_sphere(spec: &SystemSpec, r: f64) -> f64 {
    let n = spec.n();
    let mut x = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut best = f64::INFINITY;
    for dir in unit_directions(n) {
        for (xi, di) in x.iter_mut().zip(&dir) {
            *xi = r * di;
        }
        spec.field_into(&x, &mut f);
        best = best.min(f.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    best
}

enum Placement {
    Inside,
    Outside,
    Ambiguous,
}

fn classify_preimage(spec: &SystemSpec, sig: &RegionSignature, x: &DVector<f64>, r: f64) -> Placement {
    let bound = spec.sat_bound();
    let mut ambiguous = false;
    for (i, ch) in sig.channels().iter().enumerate() {
        let u = spec.channel_input(i, x.as_slice());
        let depth = match ch {
            Channel::PosSat => u - bound,
            Channel::NegSat => -bound - u,
            Channel::Linear => bound - u.abs(),
        };
        if depth < -PREIMAGE_MARGIN {
            return Placement::Outside;
        }
        if depth <= PREIMAGE_MARGIN {
            ambiguous = true;
        }
    }
    let radial = r - x.norm();
    if radial < -PREIMAGE_MARGIN {
        return Placement::Outside;
    }
    if ambiguous || radial <= PREIMAGE_MARGIN {
        Placement::Ambiguous
    } else {
        Placement::Inside
    }
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Degree over `B(r)` as the signed count of preimages of a regular value.
///
/// With `regular_value = None` the value has magnitude
/// `REGULAR_VALUE_SCALE * min |f|` on the sphere and a seeded random
/// direction. A value whose preimages sit within [`PREIMAGE_MARGIN`] of a
/// switching plane or of the sphere is redrawn, up to [`MAX_REDRAWS`] times.
pub fn piecewise_affine_degree(
    spec: &SystemSpec,
    r: f64,
    regular_value: Option<&DVector<f64>>,
    seed: u64,
) -> Result<DegreeReport> {
    let n = spec.n();
    if !positive_finite(r) {
        return Err(invalid(format!("radius must be positive, got {r}")));
    }
    if let Some(c) = regular_value {
        if c.len() != n {
            return Err(invalid(format!("regular value has length {}, expected {n}", c.len())));
        }
    }

    let equilibria = enumerate_equilibria(spec, GP_TOL);
    if let Some(e) = equilibria
        .equilibria
        .iter()
        .find(|e| (e.x.norm() - r).abs() <= PREIMAGE_MARGIN)
    {
        return Err(Error::ZeroOnSphere {
            radius: r,
            norm: (e.x.norm() - r).abs(),
        });
    }
    let min_sphere_norm = min_field_norm_on_sphere(spec, r);
    if min_sphere_norm.is_nan() || min_sphere_norm < ZERO_NORM {
        return Err(Error::ZeroOnSphere {
            radius: r,
            norm: min_sphere_norm,
        });
    }

    let magnitude = REGULAR_VALUE_SCALE * min_sphere_norm;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signatures = RegionSignature::enumerate(spec.m());

    for attempt in 0..=MAX_REDRAWS {
        let c = match (attempt, regular_value) {
            (0, Some(c)) => c.clone(),
            _ => random_unit(&mut rng, n) * magnitude,
        };
        let mut solutions = Vec::new();
        let mut degenerate_regions = Vec::new();
        let mut margin_ok = true;
        for sig in &signatures {
            let Some(x) = region_root(spec, sig, Some(&c)) else {
                degenerate_regions.push(sig.clone());
                continue;
            };
            match classify_preimage(spec, sig, &x, r) {
                Placement::Outside => {}
                Placement::Ambiguous => {
                    margin_ok = false;
                    break;
                }
                Placement::Inside => {
                    let jac = crate::model::region_jacobian(spec, sig)?;
                    solutions.push(DegreeContribution {
                        x,
                        signature: sig.clone(),
                        sign: linalg::det_sign(&jac),
                    });
                }
            }
        }
        if margin_ok {
            return Ok(DegreeReport {
                value: solutions.iter().map(|s| s.sign).sum(),
                method: DegreeMethod::PiecewiseAffinePreimage,
                radius: r,
                regular_value: c,
                solutions,
                margin_ok,
                min_sphere_norm,
                attempts: attempt + 1,
                degenerate_regions,
            });
        }
    }
    Err(Error::DegenerateValue {
        attempts: MAX_REDRAWS + 1,
    })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct IndexSumReport {
    pub radius: f64,
    /// Sum of equilibrium indices inside the ball.
    pub lhs: i32,
    /// Degree of the field over the ball.
    pub rhs: i32,
    pub equilibria_inside: usize,
    pub anti_stable: bool,
    /// `radius > safe_radius`; together with `anti_stable` this requires `rhs = +1`.
    pub beyond_safe_radius: bool,
    pub pass: bool,
}

/// `1.1 * max(safe_radius, largest equilibrium norm + 1)`.
pub fn auto_radius(spec: &SystemSpec) -> Result<f64> {
    let set = enumerate_equilibria(spec, GP_TOL);
    Ok(1.1 * safe_radius(spec)?.max(set.max_norm() + 1.0))
}

/// Sum of equilibrium indices inside `B(r)` against the degree over `B(r)`.
pub fn index_sum_check(spec: &SystemSpec, r: Option<f64>, seed: u64) -> Result<IndexSumReport> {
    let radius = match r {
        Some(r) => r,
        None => auto_radius(spec)?,
    };
    let set = enumerate_equilibria(spec, GP_TOL);
    if let Some(sig) = set.degenerate_regions.first() {
        return Err(Error::DegenerateEquilibrium(format!(
            "region {sig} has a singular Jacobian; equilibria may not be isolated"
        )));
    }
    let mut lhs = 0;
    let mut equilibria_inside = 0;
    for e in set.equilibria.iter().filter(|e| e.x.norm() < radius) {
        lhs += crate::equilibria::equilibrium_index(spec, e)?;
        equilibria_inside += 1;
    }
    let rhs = piecewise_affine_degree(spec, radius, None, seed)?.value;
    let anti_stable = validate_spec(spec).anti_stable;
    let beyond_safe_radius = radius > safe_radius(spec)?;
    Ok(IndexSumReport {
        radius,
        lhs,
        rhs,
        equilibria_inside,
        anti_stable,
        beyond_safe_radius,
        pass: lhs == rhs && (!(anti_stable && beyond_safe_radius) || rhs == 1),
    })
}
