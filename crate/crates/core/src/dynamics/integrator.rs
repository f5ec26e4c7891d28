//! Dormand-Prince 5(4) with FSAL and error-per-unit-step control.
//!
//! The saturated field is Lipschitz but only piecewise smooth; steps that
//! straddle a switching plane produce large error estimates and are
//! rejected and shrunk, so no event location is done.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{invalid, positive_finite, Error, Result};
use crate::model::SystemSpec;

pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const DEFAULT_ABS_TOL: f64 = 1e-10;
/// Upper bound on the step, which is also the sample spacing.
pub const MAX_STEP: f64 = 0.05;
pub const MIN_STEP: f64 = 1e-14;
/// State norm treated as escape to infinity.
pub const ESCAPE_NORM: f64 = 1e12;

const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
/// Fifth-order weights (also row 7 of the tableau).
const B5: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
/// `b5 - b4` for the embedded error estimate.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            abs_tol: DEFAULT_ABS_TOL,
            max_step: MAX_STEP,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(self.rel_tol) || !ok(self.abs_tol) || !ok(self.max_step) {
            return Err(invalid(format!("tolerances and max step must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest normalised error estimate among accepted steps.
    pub max_error_estimate: f64,
    /// Integration stopped because the state norm passed [`ESCAPE_NORM`].
    pub escaped: bool,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        &self.samples.last().expect("trajectory has its initial sample").x
    }

    pub fn final_time(&self) -> f64 {
        self.samples.last().expect("trajectory has its initial sample").t
    }

    /// CSV with header `t,x1,...,xn` and 17 significant digits per value.
    pub fn to_csv(&self) -> String {
        let n = self.samples.first().map_or(0, |s| s.x.len());
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",x{i}"));
        }
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!("{:.16e}", s.t));
            for v in &s.x {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// What the per-step observer wants next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStats {
    pub t: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub max_error_estimate: f64,
    pub escaped: bool,
    pub stopped: bool,
}

/// Integrates from `x0` up to `t_end`, calling `observe(t, x)` at `t = 0`
/// and after every accepted step. Returns when `t_end` is reached, the
/// observer stops, or the state escapes.
pub fn integrate_observed<O>(
    spec: &SystemSpec,
    x0: &[f64],
    t_end: f64,
    opts: &IntegratorOptions,
    mut observe: O,
) -> Result<RunStats>
where
    O: FnMut(f64, &[f64]) -> Control,
{
    let n = spec.n();
    if x0.len() != n {
        return Err(invalid(format!("initial state has length {}, expected {n}", x0.len())));
    }
    if !positive_finite(t_end) {
        return Err(invalid(format!("t_end must be positive, got {t_end}")));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(invalid("initial state must be finite"));
    }
    opts.validate()?;

    let mut stats = RunStats {
        t: 0.0,
        accepted: 0,
        rejected: 0,
        max_error_estimate: 0.0,
        escaped: false,
        stopped: false,
    };
    let mut x = x0.to_vec();
    if observe(0.0, &x) == Control::Stop {
        stats.stopped = true;
        return Ok(stats);
    }

    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut stage = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    spec.field_into(&x, &mut k[0]);

    let mut t = 0.0;
    let mut h = (1e-3f64).min(opts.max_step);
    while t < t_end {
        h = h.min(opts.max_step);
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        let rows: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
        for (s, row) in rows.iter().enumerate() {
            for i in 0..n {
                let mut acc = x[i];
                for (j, a) in row.iter().enumerate() {
                    acc += h * a * k[j][i];
                }
                stage[i] = acc;
            }
            spec.field_into(&stage, &mut k[s + 1]);
        }
        for i in 0..n {
            let mut acc = x[i];
            for (j, b) in B5.iter().enumerate() {
                acc += h * b * k[j][i];
            }
            x_new[i] = acc;
        }
        spec.field_into(&x_new, &mut k[6]);

        let mut err_sq = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, c) in E.iter().enumerate() {
                e += c * k[j][i];
            }
            e *= h;
            let scale = opts.abs_tol + opts.rel_tol * x[i].abs().max(x_new[i].abs());
            err_sq += (e / scale).powi(2);
        }
        // error per unit step
        let err = (err_sq / n as f64).sqrt() / h;

        if err <= 1.0 && err.is_finite() {
            t = if last { t_end } else { t + h };
            std::mem::swap(&mut x, &mut x_new);
            k.swap(0, 6);
            stats.accepted += 1;
            stats.max_error_estimate = stats.max_error_estimate.max(err);
            stats.t = t;
            if observe(t, &x) == Control::Stop {
                stats.stopped = true;
                return Ok(stats);
            }
            if x.iter().map(|v| v * v).sum::<f64>().sqrt() > ESCAPE_NORM {
                stats.escaped = true;
                return Ok(stats);
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.25)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            stats.rejected += 1;
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.25)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= factor;
            if h < MIN_STEP {
                return Err(Error::Stiffness { t, h });
            }
        }
    }
    Ok(stats)
}

/// Adaptive integration recording every accepted step.
pub fn integrate_adaptive(
    spec: &SystemSpec,
    x0: &DVector<f64>,
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Trajectory> {
    let opts = IntegratorOptions::with_tolerances(rel_tol, abs_tol);
    let mut samples = Vec::new();
    let stats = integrate_observed(spec, x0.as_slice(), t_end, &opts, |t, x| {
        samples.push(Sample { t, x: x.to_vec() });
        Control::Continue
    })?;
    Ok(Trajectory {
        samples,
        accepted_steps: stats.accepted,
        rejected_steps: stats.rejected,
        max_error_estimate: stats.max_error_estimate,
        escaped: stats.escaped,
    })
}

/// Final state only, without storing samples.
pub fn integrate_to(spec: &SystemSpec, x0: &[f64], t_end: f64, opts: &IntegratorOptions) -> Result<Vec<f64>> {
    let mut last = x0.to_vec();
    integrate_observed(spec, x0, t_end, opts, |_, x| {
        last.copy_from_slice(x);
        Control::Continue
    })?;
    Ok(last)
}
