use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::certificates::{convergence_certificate, escape_certificate, EscapeCertificate, LyapunovCertificate};
use super::integrator::{integrate_observed, Control, IntegratorOptions};
use crate::error::{invalid, positive_finite, Error, Result};
use crate::model::SystemSpec;

pub const DEFAULT_T_MAX: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FateVerdict {
    ConvergedToOrigin,
    NotConverged,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CertificateKind {
    Lyapunov,
    Escape,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FateReport {
    pub verdict: FateVerdict,
    pub t_decided: f64,
    pub certificate: CertificateKind,
    pub final_state: Vec<f64>,
    pub accepted_steps: usize,
    /// Why the verdict is undecided, when it is.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Certificates computed once and reused across many initial states.
#[derive(Debug, Clone)]
pub struct FateClassifier {
    spec: SystemSpec,
    inner: LyapunovCertificate,
    outer: Option<EscapeCertificate>,
    options: IntegratorOptions,
    t_max: f64,
}

impl FateClassifier {
    /// Builds both certificates. Without an anti-stable `A` there is no
    /// escape certificate and `NotConverged` can never be issued.
    pub fn new(spec: &SystemSpec, t_max: f64, options: IntegratorOptions) -> Result<Self> {
        if !positive_finite(t_max) {
            return Err(invalid(format!("t_max must be positive, got {t_max}")));
        }
        let inner = convergence_certificate(spec)?;
        let outer = match escape_certificate(spec) {
            Ok(c) => Some(c),
            Err(Error::Unsupported(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            spec: spec.clone(),
            inner,
            outer,
            options,
            t_max,
        })
    }

    pub fn with_defaults(spec: &SystemSpec) -> Result<Self> {
        Self::new(spec, DEFAULT_T_MAX, IntegratorOptions::default())
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn inner(&self) -> &LyapunovCertificate {
        &self.inner
    }

    pub fn outer(&self) -> Option<&EscapeCertificate> {
        self.outer.as_ref()
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn options(&self) -> &IntegratorOptions {
        &self.options
    }

    pub fn classify(&self, x0: &[f64]) -> Result<FateReport> {
        let n = self.spec.n();
        if x0.len() != n {
            return Err(invalid(format!("initial state has length {}, expected {n}", x0.len())));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(invalid("initial state must be finite"));
        }

        let mut verdict = FateVerdict::Undecided;
        let mut certificate = CertificateKind::None;
        let mut t_last = 0.0;
        let mut state = x0.to_vec();
        let run = integrate_observed(&self.spec, x0, self.t_max, &self.options, |t, x| {
            t_last = t;
            state.copy_from_slice(x);
            if self.inner.contains(x) {
                verdict = FateVerdict::ConvergedToOrigin;
                certificate = CertificateKind::Lyapunov;
                return Control::Stop;
            }
            if self.outer.as_ref().is_some_and(|c| c.certifies(x)) {
                verdict = FateVerdict::NotConverged;
                certificate = CertificateKind::Escape;
                return Control::Stop;
            }
            Control::Continue
        });

        let (accepted_steps, diagnostic) = match run {
            Ok(stats) if stats.stopped => (stats.accepted, None),
            Ok(stats) if stats.escaped => (
                stats.accepted,
                Some(format!("state norm passed the overflow guard at t = {t_last}")),
            ),
            Ok(stats) => (
                stats.accepted,
                Some(format!("no certificate fired by t_max = {}", self.t_max)),
            ),
            Err(e) => (0, Some(format!("integration failed: {e}"))),
        };
        Ok(FateReport {
            verdict,
            t_decided: t_last,
            certificate,
            final_state: state,
            accepted_steps,
            diagnostic,
        })
    }

    /// Classifies many states in parallel; results keep the input order.
    pub fn classify_many(&self, states: &[Vec<f64>]) -> Vec<Result<FateReport>> {
        states.par_iter().map(|x| self.classify(x)).collect()
    }
}

pub fn classify_fate(spec: &SystemSpec, x0: &DVector<f64>, t_max: f64) -> Result<FateReport> {
    FateClassifier::new(spec, t_max, IntegratorOptions::default())?.classify(x0.as_slice())
}
