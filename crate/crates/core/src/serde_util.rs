//! Serialization helpers for nalgebra vectors, matrices and complex numbers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::ser::SerializeSeq;
use serde::Serializer;

pub fn dvector<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

/// Matrices as a list of rows.
pub fn dmatrix<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for row in m.row_iter() {
        let r: Vec<f64> = row.iter().copied().collect();
        seq.serialize_element(&r)?;
    }
    seq.end()
}

/// Complex numbers as `[re, im]` pairs.
pub fn complex_list<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for c in v {
        seq.serialize_element(&[c.re, c.im])?;
    }
    seq.end()
}
