//! Plant/feedback data model and the saturated closed-loop vector field
//! `x' = A x + B sat(K x)`.
//!
//! The field is piecewise affine: each input channel is either clamped at
//! `-M`, linear, or clamped at `+M`, and the resulting `3^m` region
//! signatures partition the state space into polyhedra on which the field
//! is `F_sigma x + offset(sigma)`.

mod spectrum;
mod synthesis;

pub use spectrum::{eigenvalues, validate_spec, ValidationReport};
pub use synthesis::{place_poles_single_input, random_antistable_system};

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, positive_finite, Error, Result};

/// Saturation `sign(s) * min(M, |s|)`.
pub fn saturate(s: f64, bound: f64) -> Result<f64> {
    if !positive_finite(bound) {
        return Err(invalid(format!("saturation bound must be positive, got {bound}")));
    }
    Ok(clamp(s, bound))
}

#[inline]
fn clamp(s: f64, bound: f64) -> f64 {
    s.clamp(-bound, bound)
}

/// Plant `(A, B)`, feedback gain `K` (with `u = K x`) and saturation bound `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    k: DMatrix<f64>,
    bound: f64,
}

impl SystemSpec {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, k: DMatrix<f64>, bound: f64) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(invalid(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let m = b.ncols();
        if m == 0 || b.nrows() != n {
            return Err(invalid(format!(
                "B must be {n}xm with m >= 1, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if k.nrows() != m || k.ncols() != n {
            return Err(invalid(format!("K must be {m}x{n}, got {}x{}", k.nrows(), k.ncols())));
        }
        if !positive_finite(bound) {
            return Err(invalid(format!(
                "saturation bound M must be finite and positive, got {bound}"
            )));
        }
        let finite = |mat: &DMatrix<f64>| mat.iter().all(|v| v.is_finite());
        if !finite(&a) || !finite(&b) || !finite(&k) {
            return Err(invalid("matrix entries must be finite"));
        }
        Ok(Self { a, b, k, bound })
    }

    /// Single-input convenience constructor.
    pub fn single_input(a: DMatrix<f64>, b: &DVector<f64>, k: &[f64], bound: f64) -> Result<Self> {
        let n = b.len();
        let bm = DMatrix::from_column_slice(n, 1, b.as_slice());
        let km = DMatrix::from_row_slice(1, k.len(), k);
        Self::new(a, bm, km, bound)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn sat_bound(&self) -> f64 {
        self.bound
    }

    pub fn with_sat_bound(&self, bound: f64) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.k.clone(), bound)
    }

    pub fn with_gain(&self, k: DMatrix<f64>) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), k, self.bound)
    }

    pub fn with_input(&self, b: DMatrix<f64>) -> Result<Self> {
        Self::new(self.a.clone(), b, self.k.clone(), self.bound)
    }

    /// Closed-loop matrix `A + B K` (the Jacobian of the all-linear region).
    pub fn closed_loop_matrix(&self) -> DMatrix<f64> {
        &self.a + &self.b * &self.k
    }

    /// `k_i x` for channel `i`.
    #[inline]
    pub fn channel_input(&self, i: usize, x: &[f64]) -> f64 {
        (0..self.n()).map(|j| self.k[(i, j)] * x[j]).sum()
    }

    /// Allocation-free field evaluation, used by the integrator and samplers.
    /// Slices must have length `n`.
    pub fn field_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n();
        for (r, o) in out.iter_mut().enumerate().take(n) {
            *o = (0..n).map(|c| self.a[(r, c)] * x[c]).sum();
        }
        for i in 0..self.m() {
            let u = clamp(self.channel_input(i, x), self.bound);
            if u != 0.0 {
                for (r, o) in out.iter_mut().enumerate().take(n) {
                    *o += self.b[(r, i)] * u;
                }
            }
        }
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n() {
            return Err(invalid(format!("state has length {}, expected {}", x.len(), self.n())));
        }
        Ok(())
    }

    pub fn to_file(&self) -> SystemFile {
        let rows = |mat: &DMatrix<f64>| (0..mat.nrows()).map(|r| mat.row(r).iter().copied().collect()).collect();
        SystemFile {
            n: self.n(),
            m: self.m(),
            a: rows(&self.a),
            b: rows(&self.b),
            k: rows(&self.k),
            sat_bound: self.bound,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("system file serializes")
    }

    /// Parses the JSON system file format. Error messages carry the
    /// line/column reported by the JSON parser.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: SystemFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_spec()
    }
}

/// On-disk representation: row-major nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    #[serde(rename = "M")]
    pub sat_bound: f64,
}

impl SystemFile {
    pub fn into_spec(self) -> Result<SystemSpec> {
        let to_matrix = |name: &str, rows: &[Vec<f64>], nr: usize, nc: usize| {
            if rows.len() != nr || rows.iter().any(|r| r.len() != nc) {
                return Err(Error::Parse(format!("{name} must be {nr}x{nc} (row-major)")));
            }
            Ok(DMatrix::from_fn(nr, nc, |r, c| rows[r][c]))
        };
        let a = to_matrix("A", &self.a, self.n, self.n)?;
        let b = to_matrix("B", &self.b, self.n, self.m)?;
        let k = to_matrix("K", &self.k, self.m, self.n)?;
        SystemSpec::new(a, b, k, self.sat_bound).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Per-channel saturation state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    NegSat,
    Linear,
    PosSat,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::NegSat, Channel::Linear, Channel::PosSat];

    pub fn code(self) -> char {
        match self {
            Channel::NegSat => 'N',
            Channel::Linear => 'L',
            Channel::PosSat => 'P',
        }
    }

    /// Value of `sat(k_i x)` on a clamped channel, `None` when linear.
    pub fn clamped_value(self, bound: f64) -> Option<f64> {
        match self {
            Channel::NegSat => Some(-bound),
            Channel::Linear => None,
            Channel::PosSat => Some(bound),
        }
    }
}

/// One channel state per input.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegionSignature(pub Vec<Channel>);

impl RegionSignature {
    pub fn channels(&self) -> &[Channel] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn all_linear(m: usize) -> Self {
        Self(vec![Channel::Linear; m])
    }

    /// All `3^m` signatures in lexicographic order (`N < L < P`, first
    /// channel most significant).
    pub fn enumerate(m: usize) -> Vec<RegionSignature> {
        let total = 3usize.pow(m as u32);
        (0..total)
            .map(|mut code| {
                let mut channels = vec![Channel::Linear; m];
                for slot in channels.iter_mut().rev() {
                    *slot = Channel::ALL[code % 3];
                    code /= 3;
                }
                RegionSignature(channels)
            })
            .collect()
    }

    pub fn negated(&self) -> Self {
        Self(
            self.0
                .iter()
                .map(|c| match c {
                    Channel::NegSat => Channel::PosSat,
                    Channel::Linear => Channel::Linear,
                    Channel::PosSat => Channel::NegSat,
                })
                .collect(),
        )
    }
}

impl fmt::Display for RegionSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.0 {
            write!(f, "{}", c.code())?;
        }
        Ok(())
    }
}

impl FromStr for RegionSignature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                'N' => Ok(Channel::NegSat),
                'L' => Ok(Channel::Linear),
                'P' => Ok(Channel::PosSat),
                other => Err(invalid(format!("bad signature character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(RegionSignature)
    }
}

impl Serialize for RegionSignature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for RegionSignature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Signature of a state together with per-channel inputs and margins.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionInfo {
    pub signature: RegionSignature,
    /// `k_i x` per channel.
    pub inputs: Vec<f64>,
    /// `M - |k_i x|` per channel: positive inside the linear band.
    pub margins: Vec<f64>,
}

impl RegionInfo {
    /// Smallest distance (in input units) to a switching plane.
    pub fn min_abs_margin(&self) -> f64 {
        self.margins.iter().fold(f64::INFINITY, |acc, m| acc.min(m.abs()))
    }
}

/// `A x + B sat(K x)`.
pub fn closed_loop_field(spec: &SystemSpec, x: &DVector<f64>) -> Result<DVector<f64>> {
    spec.check_dim(x)?;
    let mut out = DVector::zeros(spec.n());
    spec.field_into(x.as_slice(), out.as_mut_slice());
    Ok(out)
}

/// Region of `x`. States exactly on `k_i x = +-M` are assigned the
/// saturated channel state.
pub fn region_signature(spec: &SystemSpec, x: &DVector<f64>) -> Result<RegionInfo> {
    spec.check_dim(x)?;
    Ok(region_of_slice(spec, x.as_slice()))
}

pub(crate) fn region_of_slice(spec: &SystemSpec, x: &[f64]) -> RegionInfo {
    let bound = spec.sat_bound();
    let inputs: Vec<f64> = (0..spec.m()).map(|i| spec.channel_input(i, x)).collect();
    let channels = inputs
        .iter()
        .map(|&u| {
            if u >= bound {
                Channel::PosSat
            } else if u <= -bound {
                Channel::NegSat
            } else {
                Channel::Linear
            }
        })
        .collect();
    let margins = inputs.iter().map(|u| bound - u.abs()).collect();
    RegionInfo {
        signature: RegionSignature(channels),
        inputs,
        margins,
    }
}

/// Jacobian of the field inside region `sig`: `A + sum over linear channels of b_i k_i`.
pub fn region_jacobian(spec: &SystemSpec, sig: &RegionSignature) -> Result<DMatrix<f64>> {
    check_signature(spec, sig)?;
    let mut jac = spec.a().clone();
    for (i, ch) in sig.channels().iter().enumerate() {
        if *ch == Channel::Linear {
            jac += spec.b().column(i) * spec.k().row(i);
        }
    }
    Ok(jac)
}

/// Constant term of the field inside region `sig`.
pub fn region_offset(spec: &SystemSpec, sig: &RegionSignature) -> Result<DVector<f64>> {
    check_signature(spec, sig)?;
    let mut offset = DVector::zeros(spec.n());
    for (i, ch) in sig.channels().iter().enumerate() {
        if let Some(u) = ch.clamped_value(spec.sat_bound()) {
            offset += spec.b().column(i) * u;
        }
    }
    Ok(offset)
}

fn check_signature(spec: &SystemSpec, sig: &RegionSignature) -> Result<()> {
    if sig.len() != spec.m() {
        return Err(invalid(format!(
            "signature has {} channels, expected {}",
            sig.len(),
            spec.m()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;
    use approx::assert_abs_diff_eq;

    fn two_d() -> SystemSpec {
        SystemSpec::single_input(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]),
            &DVector::from_vec(vec![1.0, 1.0]),
            &[6.0, -12.0],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn saturate_examples() {
        assert_eq!(saturate(0.5, 1.0).unwrap(), 0.5);
        assert_eq!(saturate(2.3, 1.0).unwrap(), 1.0);
        assert_eq!(saturate(-7.0, 2.0).unwrap(), -2.0);
        assert!(matches!(saturate(1.0, 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(saturate(1.0, -1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn field_at_reference_points() {
        let spec = reference::system();
        let zero = closed_loop_field(&spec, &DVector::zeros(3)).unwrap();
        assert_eq!(zero.norm(), 0.0);

        let xp = DVector::from_vec(vec![-0.7, 0.1, -1.0]);
        let f = closed_loop_field(&spec, &xp).unwrap();
        assert_abs_diff_eq!(f.norm(), 0.0, epsilon = 1e-14);

        let p1 = reference::p1();
        let f1 = closed_loop_field(&spec, &p1).unwrap();
        let f1n = closed_loop_field(&spec, &(-&p1)).unwrap();
        assert_abs_diff_eq!((f1 + f1n).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn field_rejects_wrong_dimension() {
        let spec = reference::system();
        assert!(closed_loop_field(&spec, &DVector::zeros(2)).is_err());
        assert!(region_signature(&spec, &DVector::zeros(4)).is_err());
    }

    #[test]
    fn signature_examples() {
        let spec = reference::system();
        let info = region_signature(&spec, &DVector::zeros(3)).unwrap();
        assert_eq!(info.signature.to_string(), "L");
        assert_eq!(info.margins, vec![1.0]);

        let info = region_signature(&spec, &DVector::from_vec(vec![-0.7, 0.1, -1.0])).unwrap();
        assert_eq!(info.signature.to_string(), "P");
        assert_abs_diff_eq!(info.inputs[0], 1.15, epsilon = 1e-12);

        let info = region_signature(&two_d(), &DVector::from_vec(vec![1.0, 0.5])).unwrap();
        assert_eq!(info.signature.to_string(), "L");
        assert_abs_diff_eq!(info.inputs[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn boundary_is_saturated() {
        // k = (1, 0): x = (1, 0) sits exactly on k x = M.
        let spec = SystemSpec::single_input(
            DMatrix::identity(2, 2),
            &DVector::from_vec(vec![1.0, 1.0]),
            &[1.0, 0.0],
            1.0,
        )
        .unwrap();
        let on_plane = region_signature(&spec, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_eq!(on_plane.signature.to_string(), "P");
        assert_eq!(on_plane.min_abs_margin(), 0.0);
        let neg = region_signature(&spec, &DVector::from_vec(vec![-1.0, 0.0])).unwrap();
        assert_eq!(neg.signature.to_string(), "N");
    }

    #[test]
    fn jacobian_examples() {
        let spec = reference::system();
        let lin = region_jacobian(&spec, &RegionSignature::all_linear(1)).unwrap();
        assert_eq!(lin, spec.closed_loop_matrix());
        let sat = region_jacobian(&spec, &"P".parse().unwrap()).unwrap();
        assert_eq!(&sat, spec.a());

        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let k = DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 0.5, -3.0]);
        let two = SystemSpec::new(DMatrix::identity(2, 2), b.clone(), k.clone(), 1.0).unwrap();
        let jac = region_jacobian(&two, &"LN".parse().unwrap()).unwrap();
        let expected = DMatrix::identity(2, 2) + b.column(0) * k.row(0);
        assert_eq!(jac, expected);
        assert!(region_jacobian(&two, &"L".parse().unwrap()).is_err());
    }

    #[test]
    fn signature_enumeration_is_lexicographic() {
        let sigs = RegionSignature::enumerate(2);
        let text: Vec<String> = sigs.iter().map(|s| s.to_string()).collect();
        assert_eq!(text, ["NN", "NL", "NP", "LN", "LL", "LP", "PN", "PL", "PP"]);
        assert_eq!(RegionSignature::enumerate(4).len(), 81);
        assert!("LXP".parse::<RegionSignature>().is_err());
    }

    #[test]
    fn constructor_validates() {
        let a = DMatrix::identity(2, 2);
        let b = DMatrix::from_element(2, 1, 1.0);
        let k = DMatrix::from_element(1, 2, 1.0);
        assert!(SystemSpec::new(a.clone(), b.clone(), k.clone(), 0.0).is_err());
        assert!(SystemSpec::new(a.clone(), b.clone(), DMatrix::zeros(2, 2), 1.0).is_err());
        assert!(SystemSpec::new(a.clone(), DMatrix::zeros(3, 1), k.clone(), 1.0).is_err());
        let mut bad = a.clone();
        bad[(0, 1)] = f64::NAN;
        assert!(SystemSpec::new(bad, b, k, 1.0).is_err());
    }

    #[test]
    fn json_round_trip_and_errors() {
        let spec = reference::system();
        let back = SystemSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(back, spec);

        let err = SystemSpec::from_json("{\"n\": 3,\n \"m\": }").unwrap_err();
        let Error::Parse(msg) = err else {
            panic!("expected parse error")
        };
        assert!(msg.contains("line 2"), "{msg}");

        let wrong_shape = r#"{"n":2,"m":1,"A":[[1,0],[0,1]],"B":[[1],[1]],"K":[[1,2,3]],"M":1}"#;
        assert!(matches!(SystemSpec::from_json(wrong_shape), Err(Error::Parse(_))));
    }

    #[test]
    fn saturation_bound_on_samples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for seed in 0..20 {
            let spec = random_antistable_system(2 + seed % 5, seed as u64).unwrap();
            let bound = crate::linalg::spectral_norm(spec.b()) * spec.sat_bound() * (spec.m() as f64).sqrt();
            for _ in 0..50 {
                let x = DVector::from_fn(spec.n(), |_, _| rng.random_range(-10.0..10.0));
                let ax = spec.a() * &x;
                let pert = closed_loop_field(&spec, &x).unwrap() - ax;
                assert!(pert.norm() <= bound * (1.0 + 1e-12));
            }
        }
    }
}
