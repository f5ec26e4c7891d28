//! Equilibria of `A x + B sat(K x) = 0`.
//!
//! On each of the `3^m` regions the field is affine, so every region
//! contributes at most one isolated zero (or a continuum when its Jacobian
//! is singular). Enumeration solves each region's linear system and keeps
//! solutions that actually lie in the region they were solved for.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{
    eigenvalues, region_jacobian, region_of_slice, region_offset, validate_spec, Channel, RegionSignature, SystemSpec,
};

/// Default distance (in input units) from a switching plane below which an
/// equilibrium is not in general position.
pub const GP_TOL: f64 = 1e-9;
/// Solutions closer than this are the same equilibrium.
pub const MERGE_DIST: f64 = 1e-8;
/// Relative `sigma_min / sigma_max` below which a region Jacobian is singular.
pub const SINGULAR_RTOL: f64 = 1e-12;
/// Half-width of the marginal band in [`classify_stability`].
pub const STABILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stability {
    AsymptoticallyStable,
    Repelling,
    Saddle,
    Marginal,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Equilibrium {
    #[serde(serialize_with = "crate::serde_util::dvector")]
    pub x: DVector<f64>,
    pub signature: RegionSignature,
    /// `sign(det J)` when in general position and nondegenerate.
    pub index: Option<i32>,
    pub stability: Stability,
    /// Smallest `|M - |k_i x||` over channels.
    pub margin: f64,
    pub general_position: bool,
    #[serde(serialize_with = "crate::serde_util::complex_list")]
    pub jac_eigs: Vec<Complex64>,
}

/// Result of [`enumerate_equilibria`]: isolated equilibria plus the regions
/// whose Jacobian is singular (possible continua, not enumerated).
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EquilibriumSet {
    pub equilibria: Vec<Equilibrium>,
    pub degenerate_regions: Vec<RegionSignature>,
}

impl EquilibriumSet {
    pub fn len(&self) -> usize {
        self.equilibria.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equilibria.is_empty()
    }

    pub fn all_general_position(&self) -> bool {
        self.equilibria.iter().all(|e| e.general_position)
    }

    pub fn min_margin(&self) -> f64 {
        self.equilibria.iter().fold(f64::INFINITY, |acc, e| acc.min(e.margin))
    }

    pub fn max_norm(&self) -> f64 {
        self.equilibria.iter().fold(0.0, |acc, e| acc.max(e.x.norm()))
    }
}

enum RegionSolve {
    Degenerate,
    Rejected,
    Accepted(DVector<f64>),
}

/// Solves `F_sigma x + offset(sigma) = target` (target defaults to zero).
/// `None` when the region Jacobian is singular.
pub(crate) fn region_root(
    spec: &SystemSpec,
    sig: &RegionSignature,
    target: Option<&DVector<f64>>,
) -> Option<DVector<f64>> {
    let jac = region_jacobian(spec, sig).expect("signature length matches");
    if linalg::is_singular(&jac, SINGULAR_RTOL) {
        return None;
    }
    let offset = region_offset(spec, sig).expect("signature length matches");
    let rhs = match target {
        Some(c) => c - offset,
        None => -offset,
    };
    jac.lu().solve(&rhs)
}

fn solve_region(spec: &SystemSpec, sig: &RegionSignature, gp_tol: f64) -> RegionSolve {
    let Some(x) = region_root(spec, sig, None) else {
        return RegionSolve::Degenerate;
    };
    let bound = spec.sat_bound();
    let inside = sig.channels().iter().enumerate().all(|(i, ch)| {
        let u = spec.channel_input(i, x.as_slice());
        match ch {
            Channel::PosSat => u >= bound - gp_tol,
            Channel::NegSat => u <= -bound + gp_tol,
            Channel::Linear => u.abs() <= bound + gp_tol,
        }
    });
    if inside {
        RegionSolve::Accepted(x)
    } else {
        RegionSolve::Rejected
    }
}

/// Solves each region's affine system and keeps the self-consistent roots.
pub fn enumerate_equilibria(spec: &SystemSpec, gp_tol: f64) -> EquilibriumSet {
    let signatures = RegionSignature::enumerate(spec.m());
    let solves: Vec<(RegionSignature, RegionSolve)> = signatures
        .into_par_iter()
        .map(|sig| {
            let solve = solve_region(spec, &sig, gp_tol);
            (sig, solve)
        })
        .collect();

    let mut degenerate_regions = Vec::new();
    let mut roots: Vec<DVector<f64>> = Vec::new();
    for (sig, solve) in solves {
        match solve {
            RegionSolve::Degenerate => degenerate_regions.push(sig),
            RegionSolve::Rejected => {}
            RegionSolve::Accepted(x) => {
                if roots.iter().all(|r| (r - &x).norm() > MERGE_DIST) {
                    roots.push(x);
                }
            }
        }
    }

    let mut equilibria: Vec<Equilibrium> = roots.into_iter().map(|x| describe(spec, x, gp_tol)).collect();
    equilibria.sort_by(|a, b| {
        a.signature.cmp(&b.signature).then_with(|| {
            a.x.iter()
                .zip(b.x.iter())
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    EquilibriumSet {
        equilibria,
        degenerate_regions,
    }
}

fn describe(spec: &SystemSpec, x: DVector<f64>, gp_tol: f64) -> Equilibrium {
    let info = region_of_slice(spec, x.as_slice());
    let margin = info.min_abs_margin();
    let general_position = margin > gp_tol;
    let jac = region_jacobian(spec, &info.signature).expect("signature length matches");
    let jac_eigs = eigenvalues(&jac).expect("square Jacobian");
    let index = if general_position {
        Some(linalg::det_sign(&jac)).filter(|&s| s != 0)
    } else {
        None
    };
    Equilibrium {
        stability: classify_stability(&jac_eigs),
        x,
        signature: info.signature,
        index,
        margin,
        general_position,
        jac_eigs,
    }
}

/// `sign(det J)` of the equilibrium's region Jacobian.
pub fn equilibrium_index(spec: &SystemSpec, eq: &Equilibrium) -> Result<i32> {
    if !eq.general_position {
        return Err(Error::DegenerateEquilibrium(format!(
            "equilibrium at {:?} lies within {:e} of a switching plane",
            eq.x.as_slice(),
            eq.margin
        )));
    }
    let jac = region_jacobian(spec, &eq.signature)?;
    match linalg::det_sign(&jac) {
        0 => Err(Error::DegenerateEquilibrium(format!(
            "singular Jacobian in region {}",
            eq.signature
        ))),
        s => Ok(s),
    }
}

/// Stability class from a Jacobian spectrum.
pub fn classify_stability(eigs: &[Complex64]) -> Stability {
    let tol = STABILITY_TOL;
    let neg = eigs.iter().filter(|l| l.re < -tol).count();
    let pos = eigs.iter().filter(|l| l.re > tol).count();
    if neg == eigs.len() {
        Stability::AsymptoticallyStable
    } else if pos == eigs.len() {
        Stability::Repelling
    } else if neg + pos == eigs.len() {
        Stability::Saddle
    } else {
        Stability::Marginal
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ParityReport {
    pub count: usize,
    pub expected_count: usize,
    pub index_sum: i32,
    pub generic: bool,
    pub pass: bool,
    pub min_margin: f64,
    /// `-K A^{-1} B`; saturated equilibria exist iff this is `>= 1`.
    pub sign_test: f64,
}

/// Single-input parity law: one equilibrium for even `n`, three for odd
/// `n`, indices summing to `+1`.
pub fn parity_check(spec: &SystemSpec) -> Result<ParityReport> {
    if spec.m() != 1 {
        return Err(Error::Unsupported(format!(
            "parity law is stated for single input, got m = {}",
            spec.m()
        )));
    }
    let report = validate_spec(spec);
    if !report.all_ok() {
        return Err(Error::Unsupported(format!(
            "system violates the standing assumptions (anti-stable {}, controllable {}, closed-loop Hurwitz {})",
            report.anti_stable, report.controllable, report.closed_loop_hurwitz
        )));
    }
    let set = enumerate_equilibria(spec, GP_TOL);
    let generic = set.all_general_position() && set.degenerate_regions.is_empty();
    let index_sum = set.equilibria.iter().filter_map(|e| e.index).sum();
    let expected_count = if spec.n().is_multiple_of(2) { 1 } else { 3 };
    let count = set.len();
    Ok(ParityReport {
        count,
        expected_count,
        index_sum,
        generic,
        pass: !generic || (count == expected_count && index_sum == 1),
        min_margin: set.min_margin(),
        sign_test: sign_test(spec)?,
    })
}

/// `-K A^{-1} B` for a single-input system.
pub fn sign_test(spec: &SystemSpec) -> Result<f64> {
    let a_inv_b: DMatrix<f64> = spec
        .a()
        .clone()
        .lu()
        .solve(spec.b())
        .ok_or_else(|| Error::SingularEquation("A is singular".into()))?;
    Ok(-(spec.k() * a_inv_b)[(0, 0)])
}
