use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{BasinProbe, BasinVerdict, RayScanResult};
use crate::degree::safe_radius;
use crate::dynamics::LyapunovCertificate;
use crate::equilibria::{enumerate_equilibria, GP_TOL};
use crate::error::{invalid, Result};
use crate::reference;

/// Where convexity test pairs come from.
#[derive(Debug, Clone, PartialEq)]
pub enum PairSource {
    Explicit(Vec<(Vec<f64>, Vec<f64>)>),
    /// Uniform pairs in the box of half-width `2 max |x_eq|`.
    Random {
        count: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityViolation {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub midpoint: Vec<f64>,
    /// Verdicts at `p`, `q` and the midpoint.
    pub fates: [BasinVerdict; 3],
    pub is_reference_triple: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    /// Pairs examined, including the built-in reference pair when it applies.
    pub trials: usize,
    /// Pairs with both endpoints `In`, whose midpoint was then classified.
    pub midpoints_tested: usize,
    pub undecided_midpoints: usize,
    pub violations: Vec<ConvexityViolation>,
    pub reference_triple_tested: bool,
    /// The reference pair was tested and its midpoint is certified `Out`.
    pub contains_paper_triple: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub points: usize,
    pub half_width: f64,
    pub decided_pairs: usize,
    pub matched: usize,
    pub undecided_pairs: usize,
    /// States whose fate differs from the fate of their negation.
    pub mismatches: Vec<Vec<f64>>,
    pub pass: bool,
}

/// Boundary bracket along the ray through a nonzero equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumRay {
    pub equilibrium: Vec<f64>,
    pub norm: f64,
    pub scan: RayScanResult,
    /// The bracket, widened by `slack`, contains the equilibrium's norm.
    pub within_slack: bool,
    pub slack: f64,
}

fn box_half_width(probe: &BasinProbe) -> Result<f64> {
    let eqs = enumerate_equilibria(probe.spec(), GP_TOL);
    let w = 2.0 * eqs.max_norm();
    if w > 0.0 {
        Ok(w)
    } else {
        Ok(2.0 * safe_radius(probe.spec())?)
    }
}

fn uniform_box(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-half_width..=half_width)).collect()
}

impl BasinProbe {
    pub fn convexity(&self, source: &PairSource) -> Result<ConvexityReport> {
        let n = self.spec().n();
        let mut pairs: Vec<(Vec<f64>, Vec<f64>, bool)> = match source {
            PairSource::Explicit(list) => list.iter().map(|(p, q)| (p.clone(), q.clone(), false)).collect(),
            PairSource::Random { count, seed } => {
                let w = box_half_width(self)?;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..*count)
                    .map(|_| (uniform_box(&mut rng, n, w), uniform_box(&mut rng, n, w), false))
                    .collect()
            }
        };
        if pairs.iter().any(|(p, q, _)| p.len() != n || q.len() != n) {
            return Err(invalid(format!("convexity pairs must have length {n}")));
        }
        let reference_triple_tested = n == 3 && reference::matches(self.spec());
        if reference_triple_tested {
            pairs.push((reference::P1.to_vec(), reference::P2.to_vec(), true));
        }

        let mut report = ConvexityReport {
            trials: pairs.len(),
            midpoints_tested: 0,
            undecided_midpoints: 0,
            violations: Vec::new(),
            reference_triple_tested,
            contains_paper_triple: false,
        };
        let endpoints: Vec<Vec<f64>> = pairs.iter().flat_map(|(p, q, _)| [p.clone(), q.clone()]).collect();
        let verdicts = self.verdicts(&endpoints)?;
        let candidates: Vec<usize> = (0..pairs.len())
            .filter(|&i| verdicts[2 * i] == BasinVerdict::In && verdicts[2 * i + 1] == BasinVerdict::In)
            .collect();
        let midpoints: Vec<Vec<f64>> = candidates
            .iter()
            .map(|&i| pairs[i].0.iter().zip(&pairs[i].1).map(|(a, b)| 0.5 * (a + b)).collect())
            .collect();
        let mid_verdicts = self.verdicts(&midpoints)?;
        report.midpoints_tested = candidates.len();
        for ((&i, mid), fate) in candidates.iter().zip(midpoints).zip(mid_verdicts) {
            match fate {
                BasinVerdict::Out => {
                    let (p, q, is_reference) = &pairs[i];
                    report.contains_paper_triple |= *is_reference;
                    report.violations.push(ConvexityViolation {
                        p: p.clone(),
                        q: q.clone(),
                        midpoint: mid,
                        fates: [BasinVerdict::In, BasinVerdict::In, BasinVerdict::Out],
                        is_reference_triple: *is_reference,
                    });
                }
                BasinVerdict::Undecided => report.undecided_midpoints += 1,
                BasinVerdict::In => {}
            }
        }
        Ok(report)
    }

    pub fn symmetry(&self, num_points: usize, seed: u64) -> Result<SymmetryReport> {
        let n = self.spec().n();
        let half_width = box_half_width(self)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Vec<f64>> = (0..num_points).map(|_| uniform_box(&mut rng, n, half_width)).collect();
        let all: Vec<Vec<f64>> = points
            .iter()
            .flat_map(|x| [x.clone(), x.iter().map(|v| -v).collect()])
            .collect();
        let verdicts = self.verdicts(&all)?;
        let mut report = SymmetryReport {
            points: num_points,
            half_width,
            decided_pairs: 0,
            matched: 0,
            undecided_pairs: 0,
            mismatches: Vec::new(),
            pass: true,
        };
        for (i, x) in points.into_iter().enumerate() {
            let (a, b) = (verdicts[2 * i], verdicts[2 * i + 1]);
            if a == BasinVerdict::Undecided || b == BasinVerdict::Undecided {
                report.undecided_pairs += 1;
            } else {
                report.decided_pairs += 1;
                if a == b {
                    report.matched += 1;
                } else {
                    report.mismatches.push(x);
                }
            }
        }
        report.pass = report.mismatches.is_empty();
        Ok(report)
    }

    fn verdicts(&self, states: &[Vec<f64>]) -> Result<Vec<BasinVerdict>> {
        self.classifier()
            .classify_many(states)
            .into_iter()
            .map(|r| r.map(|f| f.verdict.into()))
            .collect()
    }
}

/// Random pairs on the surface of the inner certificate's ellipsoid.
pub fn ellipsoid_pairs(cert: &LyapunovCertificate, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = cert.p.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut point = || {
        let dir = DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
        let scale: f64 = rng.random_range(0.0..=1.0);
        cert.surface_point(dir.as_slice())
            .into_iter()
            .map(|v| v * scale)
            .collect::<Vec<f64>>()
    };
    (0..count).map(|_| (point(), point())).collect()
}

/// Brackets the basin boundary along the ray through each nonzero
/// equilibrium and reports whether it passes within `slack` of it.
/// Exploratory: nothing here is asserted.
pub fn equilibrium_ray_check(probe: &BasinProbe, tol: f64, slack: f64) -> Result<Vec<EquilibriumRay>> {
    let eqs = enumerate_equilibria(probe.spec(), GP_TOL);
    eqs.equilibria
        .iter()
        .filter(|e| e.x.norm() > 0.0)
        .map(|e| {
            let norm = e.x.norm();
            let scan = probe.scan_ray(e.x.as_slice(), tol)?;
            Ok(EquilibriumRay {
                equilibrium: e.x.as_slice().to_vec(),
                norm,
                within_slack: scan.r_lo - slack <= norm && norm <= scan.r_hi + slack,
                scan,
                slack,
            })
        })
        .collect()
}
