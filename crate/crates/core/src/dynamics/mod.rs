//! Closed-loop simulation and certified trajectory fates.

mod certificates;
mod fate;
mod integrator;
mod lyapunov;

pub use certificates::{convergence_certificate, escape_certificate, EscapeCertificate, LyapunovCertificate};
pub use fate::{classify_fate, CertificateKind, FateClassifier, FateReport, FateVerdict, DEFAULT_T_MAX};
pub use integrator::{
    integrate_adaptive, integrate_observed, integrate_to, Control, IntegratorOptions, RunStats, Sample, Trajectory,
    DEFAULT_ABS_TOL, DEFAULT_REL_TOL, ESCAPE_NORM, MAX_STEP, MIN_STEP,
};
pub use lyapunov::{lyapunov_residual, solve_lyapunov, LYAPUNOV_RESIDUAL_TOL};
