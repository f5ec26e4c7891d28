use std::f64::consts::PI;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::{BasinProbe, BasinVerdict};
use crate::degree::fibonacci_sphere;
use crate::error::{invalid, positive_finite, Error, Result};

pub const DEFAULT_RAY_TOL: f64 = 1e-3;
/// Evenly spaced radii tried between the seeds before bisecting, so the
/// bracket found is the innermost crossing at that resolution.
pub const COARSE_MARCH_POINTS: usize = 16;
/// Undecided evaluations tolerated before a scan stops early.
pub const MAX_UNDECIDED_HITS: usize = 12;
const MAX_ITERATIONS: usize = 200;
/// Inner seed as a fraction of the ellipsoid's extent along the ray.
const INNER_SEED_FRACTION: f64 = 0.9;

/// Certified bracket `[r_lo, r_hi]` around a basin boundary crossing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayScanResult {
    pub direction: Vec<f64>,
    pub r_lo: f64,
    pub r_hi: f64,
    pub iterations: usize,
    pub undecided_hits: usize,
    /// Undecided states kept the bracket from reaching the tolerance.
    pub early_stop: bool,
}

impl RayScanResult {
    pub fn width(&self) -> f64 {
        self.r_hi - self.r_lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.r_lo + self.r_hi)
    }

    pub fn point(&self, r: f64) -> Vec<f64> {
        self.direction.iter().map(|v| v * r).collect()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Middle,
    BelowBand,
    AboveBand,
}

impl BasinProbe {
    /// Locates the innermost `In -> Out` transition along `direction`.
    ///
    /// `Undecided` radii form a band the certified endpoints never cross;
    /// the scan then shrinks the gaps on either side of the band.
    pub fn scan_ray(&self, direction: &[f64], tol: f64) -> Result<RayScanResult> {
        let n = self.spec().n();
        if direction.len() != n {
            return Err(invalid(format!(
                "direction has length {}, expected {n}",
                direction.len()
            )));
        }
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !positive_finite(norm) {
            return Err(invalid("ray direction must be nonzero and finite"));
        }
        if !positive_finite(tol) {
            return Err(invalid(format!("tolerance must be positive, got {tol}")));
        }
        let v: Vec<f64> = direction.iter().map(|d| d / norm).collect();
        let fate = |r: f64| -> Result<BasinVerdict> {
            let x: Vec<f64> = v.iter().map(|d| d * r).collect();
            self.verdict(&x)
        };

        let inner = self.classifier().inner();
        let r_in = INNER_SEED_FRACTION * (inner.level / inner.value(&v)).sqrt();
        let r_out = self.outer_radius();
        let (f_in, f_out) = (fate(r_in)?, fate(r_out)?);
        if f_in != BasinVerdict::In || f_out != BasinVerdict::Out || r_in >= r_out {
            return Err(Error::Geometry {
                r_lo: r_in,
                r_hi: r_out,
                lo_fate: f_in.to_string(),
                hi_fate: f_out.to_string(),
            });
        }

        let mut lo = r_in;
        let mut hi = r_out;
        let mut band: Option<(f64, f64)> = None;
        let mut undecided = 0;
        let mut iterations = 2;

        let step = (r_out - r_in) / (COARSE_MARCH_POINTS + 1) as f64;
        for j in 1..=COARSE_MARCH_POINTS {
            let r = r_in + j as f64 * step;
            iterations += 1;
            match fate(r)? {
                BasinVerdict::In => match band.as_mut() {
                    None => lo = r,
                    Some(b) => b.1 = r,
                },
                BasinVerdict::Out => {
                    hi = r;
                    break;
                }
                BasinVerdict::Undecided => {
                    undecided += 1;
                    band = Some(band.map_or((r, r), |b| (b.0, r)));
                }
            }
        }

        while hi - lo > tol && iterations < MAX_ITERATIONS && undecided < MAX_UNDECIDED_HITS {
            let (probe, side) = match band {
                None => (0.5 * (lo + hi), Side::Middle),
                Some((a, b)) => {
                    let (below, above) = (a - lo, hi - b);
                    if below.max(above) <= 0.25 * tol {
                        break;
                    }
                    if below >= above {
                        (0.5 * (lo + a), Side::BelowBand)
                    } else {
                        (0.5 * (b + hi), Side::AboveBand)
                    }
                }
            };
            iterations += 1;
            match (fate(probe)?, side) {
                (BasinVerdict::In, Side::AboveBand) => {
                    if let Some(b) = band.as_mut() {
                        b.1 = probe;
                    }
                }
                (BasinVerdict::In, _) => lo = probe,
                (BasinVerdict::Out, Side::AboveBand) => hi = probe,
                (BasinVerdict::Out, _) => {
                    hi = probe;
                    band = None;
                }
                (BasinVerdict::Undecided, _) => {
                    undecided += 1;
                    band = Some(band.map_or((probe, probe), |(a, b)| (a.min(probe), b.max(probe))));
                }
            }
        }

        Ok(RayScanResult {
            direction: v,
            r_lo: lo,
            r_hi: hi,
            iterations,
            undecided_hits: undecided,
            early_stop: hi - lo > tol,
        })
    }

    pub fn point_cloud(&self, num_rays: usize, seed: u64, tol: f64) -> Result<PointCloud> {
        let n = self.spec().n();
        let directions = cloud_directions(n, num_rays, seed)?;
        let records = directions
            .into_par_iter()
            .enumerate()
            .map(|(dir_index, direction)| match self.scan_ray(&direction, tol) {
                Ok(s) => CloudRecord {
                    dir_index,
                    flag: if s.early_stop { RayFlag::EarlyStop } else { RayFlag::Ok },
                    direction: s.direction,
                    r_lo: s.r_lo,
                    r_hi: s.r_hi,
                },
                Err(Error::Geometry { r_lo, r_hi, .. }) => CloudRecord {
                    dir_index,
                    direction,
                    r_lo,
                    r_hi,
                    flag: RayFlag::GeometryError,
                },
                Err(_) => CloudRecord {
                    dir_index,
                    direction,
                    r_lo: f64::NAN,
                    r_hi: f64::NAN,
                    flag: RayFlag::Failed,
                },
            })
            .collect();
        Ok(PointCloud { seed, tol, records })
    }
}

/// Ray directions in antipodal pairs `(d, -d)`: a seeded rotation of a
/// Fibonacci hemisphere for `n = 3`, evenly spaced half-turn angles with a
/// seeded offset for `n = 2`.
pub fn cloud_directions(n: usize, num_rays: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let half = num_rays.div_ceil(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<Vec<f64>> = match n {
        2 => {
            let offset = rng.random::<f64>() * PI / half.max(1) as f64;
            (0..half)
                .map(|i| {
                    let t = offset + PI * i as f64 / half as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect()
        }
        3 => {
            let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            let rot = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
            fibonacci_sphere(2 * half)
                .into_iter()
                .take(half)
                .map(|d| {
                    let r = rot * Vector3::new(d[0], d[1], d[2]);
                    vec![r.x, r.y, r.z]
                })
                .collect()
        }
        _ => return Err(invalid(format!("point clouds need n = 2 or 3, got {n}"))),
    };
    let mut out = Vec::with_capacity(2 * half);
    for d in base {
        let neg = d.iter().map(|v| -v).collect();
        out.push(d);
        out.push(neg);
    }
    out.truncate(num_rays);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RayFlag {
    Ok,
    EarlyStop,
    GeometryError,
    Failed,
}

impl RayFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            RayFlag::Ok => "ok",
            RayFlag::EarlyStop => "early_stop",
            RayFlag::GeometryError => "geometry_error",
            RayFlag::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CloudRecord {
    pub dir_index: usize,
    pub direction: Vec<f64>,
    pub r_lo: f64,
    pub r_hi: f64,
    pub flag: RayFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointCloud {
    pub seed: u64,
    pub tol: f64,
    pub records: Vec<CloudRecord>,
}

impl PointCloud {
    /// Bracket midpoints of rays flagged `ok`.
    pub fn boundary_points(&self) -> Vec<Vec<f64>> {
        self.records
            .iter()
            .filter(|r| r.flag == RayFlag::Ok)
            .map(|r| {
                let mid = 0.5 * (r.r_lo + r.r_hi);
                r.direction.iter().map(|v| v * mid).collect()
            })
            .collect()
    }

    /// CSV with header `dir_index,vx1..vxn,r_lo,r_hi,flag`.
    pub fn to_csv(&self) -> String {
        let n = self.records.first().map_or(0, |r| r.direction.len());
        let mut out = String::from("dir_index");
        for i in 1..=n {
            out.push_str(&format!(",vx{i}"));
        }
        out.push_str(",r_lo,r_hi,flag\n");
        for r in &self.records {
            out.push_str(&r.dir_index.to_string());
            for v in &r.direction {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push_str(&format!(",{:.16e},{:.16e},{}\n", r.r_lo, r.r_hi, r.flag.as_str()));
        }
        out
    }
}
