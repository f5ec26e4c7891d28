//! Small dense linear-algebra helpers shared across modules.

use nalgebra::DMatrix;

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |acc: f64, &s| acc.max(s))
}

/// Singular values sorted in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Smallest singular value of a square matrix.
pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Numerical rank with singular values below `rel_tol * sigma_max` counted as zero.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let Some(&top) = s.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * top).count()
}

/// True when `sigma_min / sigma_max` is below `rel_tol`.
pub fn is_singular(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&top), Some(&bottom)) => top == 0.0 || bottom <= rel_tol * top,
        _ => true,
    }
}

/// Sign of the determinant via LU, `0` for an exactly singular factorisation.
pub fn det_sign(m: &DMatrix<f64>) -> i32 {
    let d = m.clone().lu().determinant();
    if d > 0.0 {
        1
    } else if d < 0.0 {
        -1
    } else {
        0
    }
}

/// Largest eigenvalue of a symmetric matrix.
pub fn sym_max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |acc, &v| acc.max(v))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn sym_min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v))
}

/// Quadratic form `x^T P x` over slices.
pub fn quad_form(p: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for r in 0..n {
        let mut row = 0.0;
        for c in 0..n {
            row += p[(r, c)] * x[c];
        }
        acc += x[r] * row;
    }
    acc
}
