//! Deterministic point sets on spheres.

use std::f64::consts::{PI, TAU};

/// Sample count for `n <= 3`.
pub const LOW_DIM_SAMPLES: usize = 10_000;
/// Sample count for `n > 3`.
pub const HIGH_DIM_SAMPLES: usize = 100_000;

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Unit directions covering `S^{n-1}`: uniform angles for `n = 2`, a
/// Fibonacci lattice for `n = 3`, and Halton points pushed through
/// Box-Muller for higher dimensions.
pub fn unit_directions(n: usize) -> Vec<Vec<f64>> {
    match n {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..LOW_DIM_SAMPLES)
            .map(|i| {
                let t = TAU * i as f64 / LOW_DIM_SAMPLES as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => fibonacci_sphere(LOW_DIM_SAMPLES),
        _ => halton_directions(n, HIGH_DIM_SAMPLES),
    }
}

pub fn fibonacci_sphere(count: usize) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            vec![rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let base = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

fn halton_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    let pairs = n.div_ceil(2);
    assert!(2 * pairs <= PRIMES.len(), "dimension {n} too large for Halton bases");
    (1..=count as u64)
        .filter_map(|i| {
            let mut g = Vec::with_capacity(2 * pairs);
            for p in 0..pairs {
                let u1 = radical_inverse(i, PRIMES[2 * p]).max(f64::MIN_POSITIVE);
                let u2 = radical_inverse(i, PRIMES[2 * p + 1]);
                let rad = (-2.0 * u1.ln()).sqrt();
                g.push(rad * (TAU * u2).cos());
                g.push(rad * (TAU * u2).sin());
            }
            g.truncate(n);
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            (norm > 1e-12).then(|| g.into_iter().map(|v| v / norm).collect())
        })
        .collect()
}
