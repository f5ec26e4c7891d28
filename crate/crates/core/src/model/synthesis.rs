//! Feedback synthesis and seeded test-system generation.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spectrum::{controllability_matrix, eigenvalues, validate_spec, CONTROLLABILITY_RANK_TOL};
use super::SystemSpec;
use crate::error::{invalid, Error, Result};
use crate::linalg;

/// Largest accepted distance between a requested pole and the realised one.
pub const PLACEMENT_TOL: f64 = 1e-6;

const MAX_GENERATOR_DRAWS: usize = 100;

/// Ackermann's formula for `u = k x`: returns `k` such that
/// `spectrum(A + b k)` equals `poles`.
pub fn place_poles_single_input(a: &DMatrix<f64>, b: &DVector<f64>, poles: &[Complex64]) -> Result<RowDVector<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(invalid(format!(
            "A must be square and b of matching length (A {}x{}, b {})",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if poles.len() != n {
        return Err(invalid(format!("expected {n} poles, got {}", poles.len())));
    }
    if poles.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
        return Err(invalid("poles must be finite"));
    }
    check_conjugate_closed(poles)?;

    let bm = DMatrix::from_column_slice(n, 1, b.as_slice());
    let kalman = controllability_matrix(a, &bm);
    let rank = linalg::rank(&kalman, CONTROLLABILITY_RANK_TOL);
    if rank < n {
        return Err(Error::SingularControllability { rank, n });
    }

    // Desired characteristic polynomial, highest degree first.
    let coeffs = char_poly(poles);
    // phi(A) by Horner.
    let mut phi = DMatrix::identity(n, n) * coeffs[0];
    for &c in &coeffs[1..] {
        phi = a * phi + DMatrix::identity(n, n) * c;
    }
    // last row of C^{-1}: solve C^T w = e_n.
    let mut e_n = DVector::zeros(n);
    e_n[n - 1] = 1.0;
    let w = kalman
        .transpose()
        .lu()
        .solve(&e_n)
        .ok_or(Error::SingularControllability { rank, n })?;
    let k = -(w.transpose() * phi);

    let realised = eigenvalues(&(a + b * &k))?;
    let mismatch = spectrum_mismatch(&realised, poles);
    if mismatch.is_nan() || mismatch > PLACEMENT_TOL {
        return Err(Error::SingularEquation(format!(
            "pole placement is ill-conditioned: realised poles differ by {mismatch:e}"
        )));
    }
    Ok(k)
}

/// Real coefficients of `prod (s - p_i)`, leading coefficient first.
fn char_poly(poles: &[Complex64]) -> Vec<f64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &p in poles {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * p;
        }
        coeffs = next;
    }
    coeffs.into_iter().map(|c| c.re).collect()
}

fn check_conjugate_closed(poles: &[Complex64]) -> Result<()> {
    let mut used = vec![false; poles.len()];
    for i in 0..poles.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let p = poles[i];
        if p.im == 0.0 {
            continue;
        }
        let tol = 1e-12 * (1.0 + p.norm());
        let partner = (0..poles.len()).find(|&j| !used[j] && (poles[j] - p.conj()).norm() <= tol);
        match partner {
            Some(j) => used[j] = true,
            None => return Err(invalid(format!("pole {p} has no conjugate partner"))),
        }
    }
    Ok(())
}

/// Greedy nearest matching distance between two spectra of equal length.
pub(crate) fn spectrum_mismatch(got: &[Complex64], want: &[Complex64]) -> f64 {
    let mut used = vec![false; got.len()];
    let mut worst: f64 = 0.0;
    for w in want {
        let best = (0..got.len())
            .filter(|&j| !used[j])
            .min_by(|&i, &j| (got[i] - w).norm().total_cmp(&(got[j] - w).norm()));
        match best {
            Some(j) => {
                used[j] = true;
                worst = worst.max((got[j] - w).norm());
            }
            None => return f64::INFINITY,
        }
    }
    worst
}

/// Draws a conjugate-closed Hurwitz pole set with real parts in `[-3, -0.5]`.
pub(crate) fn random_hurwitz_poles(rng: &mut impl Rng, n: usize) -> Vec<Complex64> {
    let mut poles = Vec::with_capacity(n);
    while poles.len() < n {
        let re = rng.random_range(-3.0..=-0.5);
        if n - poles.len() >= 2 && rng.random_bool(0.5) {
            let im = rng.random_range(0.2..=2.0);
            poles.push(Complex64::new(re, im));
            poles.push(Complex64::new(re, -im));
        } else {
            poles.push(Complex64::new(re, 0.0));
        }
    }
    poles
}

/// Seeded single-input test system: `A` has entries uniform on `[-1, 1]`,
/// shifted so that its smallest real eigenvalue part is exactly `0.1`;
/// `k` places random Hurwitz poles; `M = 1`.
pub fn random_antistable_system(n: usize, seed: u64) -> Result<SystemSpec> {
    if !(2..=8).contains(&n) {
        return Err(invalid(format!("random systems support 2 <= n <= 8, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_failure = String::new();
    for _ in 0..MAX_GENERATOR_DRAWS {
        let raw = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0));
        let min_re = eigenvalues(&raw)?.iter().fold(f64::INFINITY, |acc, l| acc.min(l.re));
        let a = raw + DMatrix::identity(n, n) * (0.1 - min_re);
        let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
        let poles = random_hurwitz_poles(&mut rng, n);
        let k = match place_poles_single_input(&a, &b, &poles) {
            Ok(k) => k,
            Err(e) => {
                last_failure = e.to_string();
                continue;
            }
        };
        let spec = SystemSpec::single_input(a, &b, k.as_slice(), 1.0)?;
        let report = validate_spec(&spec);
        let min_re_a = report.eig_a.iter().fold(f64::INFINITY, |acc, l| acc.min(l.re));
        if report.all_ok() && min_re_a >= 0.1 - 1e-9 {
            return Ok(spec);
        }
        last_failure = format!("validation failed: {report:?}");
    }
    Err(Error::Generator {
        seed,
        reason: format!("no valid draw in {MAX_GENERATOR_DRAWS} attempts; last: {last_failure}"),
    })
}
