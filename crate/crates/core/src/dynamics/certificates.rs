use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::lyapunov::{lyapunov_residual, solve_lyapunov};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{eigenvalues, SystemSpec};

/// Number of states on `|x| = 1.1 R_div` where the escape inequality is
/// spot-checked.
pub const ESCAPE_SPOT_CHECKS: usize = 100;

/// Quadratic inner certificate: `{x : x^T P x <= c}` lies in the linear slab
/// of every channel, where `V = x^T P x` decreases strictly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovCertificate {
    #[serde(serialize_with = "crate::serde_util::dmatrix")]
    pub p: DMatrix<f64>,
    pub level: f64,
    /// Relative residual of the Lyapunov solve.
    pub residual: f64,
    /// Largest `|x|` on the ellipsoid, `sqrt(c / lambda_min(P))`.
    pub bounding_radius: f64,
}

impl LyapunovCertificate {
    pub fn value(&self, x: &[f64]) -> f64 {
        linalg::quad_form(&self.p, x)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.value(x) <= self.level
    }

    /// Scales `direction` onto the ellipsoid surface.
    pub fn surface_point(&self, direction: &[f64]) -> Vec<f64> {
        let s = (self.level / self.value(direction)).sqrt();
        direction.iter().map(|v| v * s).collect()
    }
}

/// Quadratic outer certificate: `W = x^T Q x` grows whenever `|x| > R_div`,
/// so once `W > W_max` the state never returns to the ball of radius `R_div`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeCertificate {
    #[serde(serialize_with = "crate::serde_util::dmatrix")]
    pub q: DMatrix<f64>,
    pub r_div: f64,
    pub w_max: f64,
}

impl EscapeCertificate {
    pub fn value(&self, x: &[f64]) -> f64 {
        linalg::quad_form(&self.q, x)
    }

    /// True once `x` is certified never to re-enter the `R_div` ball.
    pub fn certifies(&self, x: &[f64]) -> bool {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        norm > self.r_div && self.value(x) >= (1.0 + 1e-6) * self.w_max
    }
}

pub fn convergence_certificate(spec: &SystemSpec) -> Result<LyapunovCertificate> {
    let f = spec.closed_loop_matrix();
    if eigenvalues(&f)?.iter().any(|l| l.re >= 0.0) {
        return Err(Error::Unsupported(
            "closed loop A + BK is not Hurwitz, no inner certificate exists".into(),
        ));
    }
    let eye = DMatrix::identity(spec.n(), spec.n());
    let p = solve_lyapunov(&f, &eye)?;
    let p_inv = p
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularEquation("Lyapunov solution is not positive definite".into()))?
        .inverse();
    let bound_sq = spec.sat_bound().powi(2);
    let level = spec
        .k()
        .row_iter()
        .map(|k| {
            let kt = k.transpose();
            bound_sq / (k * &p_inv * kt)[(0, 0)]
        })
        .fold(f64::INFINITY, f64::min);
    let residual = lyapunov_residual(&f, &p, &eye);
    let bounding_radius = (level / linalg::sym_min_eigenvalue(&p)).sqrt();
    Ok(LyapunovCertificate {
        p,
        level,
        residual,
        bounding_radius,
    })
}

pub fn escape_certificate(spec: &SystemSpec) -> Result<EscapeCertificate> {
    let a = spec.a();
    if eigenvalues(a)?.iter().any(|l| l.re <= 0.0) {
        return Err(Error::Unsupported(
            "A is not anti-stable, no escape certificate exists".into(),
        ));
    }
    let n = spec.n();
    // A^T Q + Q A = I is the Lyapunov equation for -A with R = I
    let q = solve_lyapunov(&(-a), &DMatrix::identity(n, n))?;
    let qb_norm = linalg::spectral_norm(&(&q * spec.b()));
    let input_bound = spec.sat_bound() * (spec.m() as f64).sqrt();
    let r_div = 2.0 * qb_norm * input_bound;
    let w_max = linalg::sym_max_eigenvalue(&q) * r_div * r_div;
    let cert = EscapeCertificate { q, r_div, w_max };

    if r_div > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut f = vec![0.0; n];
        for _ in 0..ESCAPE_SPOT_CHECKS {
            let dir = DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let x = dir.normalize() * (1.1 * r_div);
            spec.field_into(x.as_slice(), &mut f);
            let w_dot = 2.0 * x.dot(&(&cert.q * DVector::from_column_slice(&f)));
            let floor = x.norm_squared() - 2.0 * qb_norm * input_bound * x.norm();
            if !(w_dot > 0.0 && w_dot >= floor - 1e-9 * x.norm_squared()) {
                return Err(Error::SingularEquation(format!(
                    "escape inequality fails at |x| = {:.6}: dW/dt = {w_dot:e}",
                    x.norm()
                )));
            }
        }
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;

    #[test]
    fn reference_inner_certificate() {
        let spec = reference::system();
        let cert = convergence_certificate(&spec).unwrap();
        assert!(cert.level > 0.0);
        assert!(cert.residual <= 1e-10);
        let f = spec.closed_loop_matrix();
        let resid = f.transpose() * &cert.p + &cert.p * &f + DMatrix::identity(3, 3);
        assert!(resid.norm() <= 1e-8);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = spec.k().row(0).transpose();
        for _ in 0..50 {
            let dir: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
            let x = DVector::from_vec(cert.surface_point(&dir));
            assert!((cert.value(x.as_slice()) - cert.level).abs() <= 1e-12 * cert.level);
            assert!(k.dot(&x).abs() <= spec.sat_bound() + 1e-9);
            // inside the slab the field is linear and V' = -|x|^2
            let fx = &f * &x;
            let v_dot = 2.0 * x.dot(&(&cert.p * fx));
            assert!((v_dot + x.norm_squared()).abs() <= 1e-9 * x.norm_squared().max(1.0));
            assert!(x.norm() <= cert.bounding_radius * (1.0 + 1e-12));
        }
    }

    #[test]
    fn inner_level_touches_the_slab() {
        // max of k x over the ellipsoid is sqrt(c k P^-1 k^T) = M for the binding channel
        let spec = reference::system();
        let cert = convergence_certificate(&spec).unwrap();
        let p_inv = cert.p.clone().try_inverse().unwrap();
        let k = spec.k().row(0).transpose();
        let x_star = &p_inv * &k * (cert.level / k.dot(&(&p_inv * &k))).sqrt();
        assert!((cert.value(x_star.as_slice()) - cert.level).abs() < 1e-10 * cert.level);
        assert!((k.dot(&x_star) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn inner_level_scales_with_bound() {
        let spec = reference::system();
        let a = convergence_certificate(&spec).unwrap();
        let b = convergence_certificate(&spec.with_sat_bound(2.0).unwrap()).unwrap();
        assert_eq!(a.p, b.p);
        assert!((b.level / a.level - 4.0).abs() < 1e-12);
    }

    #[test]
    fn reference_escape_certificate() {
        let spec = reference::system();
        let cert = escape_certificate(&spec).unwrap();
        assert!(cert.r_div.is_finite() && cert.r_div > 0.0);
        let a = spec.a();
        let resid = a.transpose() * &cert.q + &cert.q * a - DMatrix::identity(3, 3);
        assert!(resid.amax() < 1e-12);

        let doubled = escape_certificate(&spec.with_sat_bound(2.0).unwrap()).unwrap();
        assert!((doubled.r_div / cert.r_div - 2.0).abs() < 1e-12);
        assert!((doubled.w_max / cert.w_max - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_input_has_zero_escape_radius() {
        let spec = reference::system().with_input(DMatrix::zeros(3, 1)).unwrap();
        let cert = escape_certificate(&spec).unwrap();
        assert_eq!(cert.r_div, 0.0);
        assert_eq!(cert.w_max, 0.0);
        assert!(cert.certifies(&[1e-3, 0.0, 0.0]));
        assert!(!cert.certifies(&[0.0, 0.0, 0.0]));
    }

    #[test]
    fn unsupported_spectra() {
        let spec = reference::system();
        let stable = spec.with_gain(DMatrix::zeros(1, 3)).unwrap();
        assert!(matches!(convergence_certificate(&stable), Err(Error::Unsupported(_))));
        let mixed = SystemSpec::single_input(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            &DVector::from_vec(vec![1.0, 1.0]),
            &[-2.0, 0.0],
            1.0,
        )
        .unwrap();
        assert!(matches!(escape_certificate(&mixed), Err(Error::Unsupported(_))));
    }
}
