use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::model::eigenvalues;

/// Relative residual accepted from [`solve_lyapunov`].
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-10;

/// Solves `F^T P + P F = -R` for symmetric `P` by a direct solve over the
/// `n^2` unknowns, followed by one step of iterative refinement.
///
/// Requires `lambda_i + lambda_j != 0` for all eigenvalue pairs of `F`.
pub fn solve_lyapunov(f: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = f.nrows();
    if f.ncols() != n || r.nrows() != n || r.ncols() != n {
        return Err(invalid(format!(
            "Lyapunov equation needs square F and R of equal size (F {}x{}, R {}x{})",
            f.nrows(),
            f.ncols(),
            r.nrows(),
            r.ncols()
        )));
    }
    if (r - r.transpose()).amax() > 1e-12 * r.amax().max(1.0) {
        return Err(invalid("R must be symmetric"));
    }

    let eigs = eigenvalues(f)?;
    let scale = linalg::spectral_norm(f).max(1.0);
    for (i, a) in eigs.iter().enumerate() {
        for b in &eigs[i..] {
            if (a + b).norm() <= 1e-10 * scale {
                return Err(Error::SingularEquation(format!(
                    "eigenvalues {a} and {b} of F sum to zero"
                )));
            }
        }
    }

    let eye = DMatrix::<f64>::identity(n, n);
    let ft = f.transpose();
    // column-major vec: vec(F^T P) = (I kron F^T) vec(P), vec(P F) = (F^T kron I) vec(P)
    let op = eye.kronecker(&ft) + ft.kronecker(&eye);
    let lu = op.lu();
    let solve = |rhs: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let v = nalgebra::DVector::from_column_slice(rhs.as_slice());
        let sol = lu
            .solve(&(-v))
            .ok_or_else(|| Error::SingularEquation("Kronecker operator is singular".into()))?;
        Ok(DMatrix::from_column_slice(n, n, sol.as_slice()))
    };

    let mut p = solve(r)?;
    let resid = lyapunov_residual_matrix(f, &p, r);
    p += solve(&resid)?;
    let p = (&p + p.transpose()) * 0.5;

    let rel = lyapunov_residual(f, &p, r);
    if rel.is_nan() || rel > LYAPUNOV_RESIDUAL_TOL {
        return Err(Error::SingularEquation(format!(
            "Lyapunov solve is ill-conditioned (relative residual {rel:e})"
        )));
    }
    Ok(p)
}

fn lyapunov_residual_matrix(f: &DMatrix<f64>, p: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    f.transpose() * p + p * f + r
}

/// `|F^T P + P F + R|_F / |R|_F`.
pub fn lyapunov_residual(f: &DMatrix<f64>, p: &DMatrix<f64>, r: &DMatrix<f64>) -> f64 {
    lyapunov_residual_matrix(f, p, r).norm() / r.norm().max(f64::MIN_POSITIVE)
}
