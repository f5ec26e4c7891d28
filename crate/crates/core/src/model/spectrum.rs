use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::SystemSpec;
use crate::error::{invalid, Result};
use crate::linalg;

/// Relative singular-value cutoff for the Kalman rank test.
pub const CONTROLLABILITY_RANK_TOL: f64 = 1e-9;

/// Spectrum of a square matrix (with multiplicity), sorted by real part and
/// then imaginary part.
pub fn eigenvalues(f: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if f.nrows() != f.ncols() {
        return Err(invalid(format!(
            "eigenvalues need a square matrix, got {}x{}",
            f.nrows(),
            f.ncols()
        )));
    }
    if f.is_empty() {
        return Ok(Vec::new());
    }
    let mut eigs: Vec<Complex64> = f.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(eigs)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ValidationReport {
    pub anti_stable: bool,
    pub controllable: bool,
    pub closed_loop_hurwitz: bool,
    #[serde(serialize_with = "crate::serde_util::complex_list")]
    pub eig_a: Vec<Complex64>,
    #[serde(serialize_with = "crate::serde_util::complex_list")]
    pub eig_closed_loop: Vec<Complex64>,
    pub controllability_rank: usize,
}

impl ValidationReport {
    pub fn all_ok(&self) -> bool {
        self.anti_stable && self.controllable && self.closed_loop_hurwitz
    }
}

/// Kalman matrix `[B, AB, ..., A^{n-1} B]`.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for j in 0..n {
        out.columns_mut(j * m, m).copy_from(&block);
        block = a * block;
    }
    out
}

/// Checks the standing assumptions: `A` anti-stable, `(A, B)` controllable,
/// `A + BK` Hurwitz. Failures are carried in the report.
pub fn validate_spec(spec: &SystemSpec) -> ValidationReport {
    let eig_a = eigenvalues(spec.a()).expect("A is square");
    let eig_closed_loop = eigenvalues(&spec.closed_loop_matrix()).expect("A + BK is square");
    let controllability_rank = linalg::rank(&controllability_matrix(spec.a(), spec.b()), CONTROLLABILITY_RANK_TOL);
    ValidationReport {
        anti_stable: eig_a.iter().all(|l| l.re > 0.0),
        controllable: controllability_rank == spec.n(),
        closed_loop_hurwitz: eig_closed_loop.iter().all(|l| l.re < 0.0),
        eig_a,
        eig_closed_loop,
        controllability_rank,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;
    use nalgebra::DVector;

    /// Smallest singular value of `F - lambda I`, an eigenvector-free residual.
    fn eig_residual(f: &DMatrix<f64>, lambda: Complex64) -> f64 {
        let n = f.nrows();
        let shifted = DMatrix::from_fn(n, n, |r, c| {
            Complex64::new(f[(r, c)], 0.0) - if r == c { lambda } else { Complex64::new(0.0, 0.0) }
        });
        shifted
            .svd(false, false)
            .singular_values
            .iter()
            .fold(f64::INFINITY, |acc, &s| acc.min(s))
    }

    fn assert_spectrum(got: &[Complex64], want: &[Complex64], tol: f64) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).norm() < tol, "got {g}, want {w}");
        }
    }

    #[test]
    fn reference_closed_loop_spectrum() {
        let spec = reference::system();
        let eigs = eigenvalues(&spec.closed_loop_matrix()).unwrap();
        let want = [-3.0, -2.0, -1.0].map(|r| Complex64::new(r, 0.0));
        assert_spectrum(&eigs, &want, 1e-9);
    }

    #[test]
    fn reference_open_loop_spectrum() {
        // char poly of [[1,-3],[3,1]] is (s-1)^2 + 9, plus the diagonal 4.
        let spec = reference::system();
        let eigs = eigenvalues(spec.a()).unwrap();
        let want = [
            Complex64::new(1.0, -3.0),
            Complex64::new(1.0, 3.0),
            Complex64::new(4.0, 0.0),
        ];
        assert_spectrum(&eigs, &want, 1e-12);
    }

    #[test]
    fn identity_and_non_square() {
        let eigs = eigenvalues(&DMatrix::identity(2, 2)).unwrap();
        assert_spectrum(&eigs, &[Complex64::new(1.0, 0.0); 2], 1e-15);
        assert!(eigenvalues(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn residuals_and_conjugate_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in 1..=12 {
            let f = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let scale = linalg::spectral_norm(&f);
            let eigs = eigenvalues(&f).unwrap();
            assert_eq!(eigs.len(), n);
            for &l in &eigs {
                assert!(eig_residual(&f, l) <= 1e-8 * scale, "n={n} lambda={l}");
                if l.im != 0.0 {
                    assert!(eigs.iter().any(|o| (o - l.conj()).norm() < 1e-10));
                }
            }
        }
    }

    #[test]
    fn validation_examples() {
        let report = validate_spec(&reference::system());
        assert!(report.anti_stable && report.controllable && report.closed_loop_hurwitz);
        assert_eq!(report.controllability_rank, 3);

        let stable = SystemSpec::single_input(
            -DMatrix::identity(2, 2),
            &DVector::from_vec(vec![1.0, 1.0]),
            &[0.0, 0.0],
            1.0,
        )
        .unwrap();
        assert!(!validate_spec(&stable).anti_stable);

        let uncontrollable = SystemSpec::single_input(
            DMatrix::identity(2, 2),
            &DVector::from_vec(vec![1.0, 0.0]),
            &[-2.0, 0.0],
            1.0,
        )
        .unwrap();
        let report = validate_spec(&uncontrollable);
        assert!(!report.controllable);
        assert_eq!(report.controllability_rank, 1);
    }
}
