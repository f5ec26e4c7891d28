use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{invalid, positive_finite, Error, Result};
use crate::model::SystemSpec;

/// Hard cap on field evaluations during refinement.
pub const MAX_WINDING_SAMPLES: usize = 1 << 20;
const ZERO_NORM: f64 = 1e-12;

/// Winding number of a planar field around the circle of radius `r`
/// centred at the origin.
///
/// Angle increments of `f/|f|` between consecutive samples are wrapped to
/// `(-pi, pi]`; any increment of `pi/2` or more triggers bisection of that
/// arc, so the accumulated turn is trustworthy once every arc is resolved.
pub fn winding_number_2d<F>(field: F, r: f64, min_samples: usize) -> Result<i32>
where
    F: Fn([f64; 2]) -> [f64; 2],
{
    if !positive_finite(r) {
        return Err(invalid(format!("radius must be positive, got {r}")));
    }
    let min_samples = min_samples.max(4);
    let eval = |theta: f64| -> Result<[f64; 2]> {
        let f = field([r * theta.cos(), r * theta.sin()]);
        let norm = f[0].hypot(f[1]);
        if norm.is_nan() || norm < ZERO_NORM {
            return Err(Error::ZeroOnSphere { radius: r, norm });
        }
        Ok(f)
    };

    let mut evaluations = 0usize;
    let mut total = 0.0;
    let mut stack: Vec<(f64, [f64; 2], f64, [f64; 2])> = Vec::new();
    let step = TAU / min_samples as f64;
    let mut prev = eval(0.0)?;
    for j in 1..=min_samples {
        let theta_b = if j == min_samples { TAU } else { j as f64 * step };
        let next = if j == min_samples { eval(0.0)? } else { eval(theta_b)? };
        evaluations += 1;
        stack.push(((j - 1) as f64 * step, prev, theta_b, next));
        while let Some((ta, fa, tb, fb)) = stack.pop() {
            let delta = turn(fa, fb);
            if delta.abs() < FRAC_PI_2 {
                total += delta;
                continue;
            }
            if evaluations >= MAX_WINDING_SAMPLES || tb - ta < 1e-14 {
                return Err(Error::Resolution(format!(
                    "angle jump {delta:.3} rad over arc [{ta:.6}, {tb:.6}] after {evaluations} samples"
                )));
            }
            let tm = 0.5 * (ta + tb);
            let fm = eval(tm)?;
            evaluations += 1;
            stack.push((tm, fm, tb, fb));
            stack.push((ta, fa, tm, fm));
        }
        prev = next;
    }

    let turns = total / TAU;
    let rounded = turns.round();
    if (turns - rounded).abs() >= 0.01 {
        return Err(Error::Resolution(format!("accumulated {turns} turns")));
    }
    Ok(rounded as i32)
}

/// Signed angle from `a` to `b`, in `(-pi, pi]`.
fn turn(a: [f64; 2], b: [f64; 2]) -> f64 {
    let cross = a[0] * b[1] - a[1] * b[0];
    let dot = a[0] * b[0] + a[1] * b[1];
    let t = cross.atan2(dot);
    if t == -PI {
        PI
    } else {
        t
    }
}

/// [`winding_number_2d`] applied to the closed-loop field of a planar system.
pub fn winding_number_spec(spec: &SystemSpec, r: f64, min_samples: usize) -> Result<i32> {
    if spec.n() != 2 {
        return Err(invalid(format!("winding number needs n = 2, got {}", spec.n())));
    }
    winding_number_2d(
        |x| {
            let mut out = [0.0; 2];
            spec.field_into(&x, &mut out);
            out
        },
        r,
        min_samples,
    )
}
