//! Two-timescale oscillatory flows `f_ε = ε⁻¹φ₁ + φ₂` driven by the fast
//! timers `τ̇₁ = ε⁻¹`, `τ̇₂ = ε⁻²`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hybrid::{HybridSystem, ThetaData, TimedField};
use crate::quadrature::periodic_integral;

/// `(x, z, τ₁, τ₂, out)` writing a vector of length `n1`.
pub type OscField = TimedField;
/// `(x, z, τ₁, τ₂)` to the `n1 × n1` Jacobian in `x`.
pub type OscJacobian = Arc<dyn Fn(&[f64], &[f64], f64, f64) -> DMatrix<f64> + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OscError {
    #[error("epsilon must be positive, got {0}")]
    NonpositiveEpsilon(f64),
    #[error("at least 16 quadrature nodes are required, got {0}")]
    TooFewNodes(usize),
    #[error("periods must be positive, got T1 = {0}, T2 = {1}")]
    NonpositivePeriod(f64, f64),
}

#[derive(Clone)]
pub struct OscillatoryFlowSpec {
    pub n1: usize,
    pub phi1: OscField,
    /// `None` means `φ₂ ≡ 0`.
    pub phi2: Option<OscField>,
    pub t1: f64,
    pub t2: f64,
    pub jac_phi1_x: Option<OscJacobian>,
}

impl fmt::Debug for OscillatoryFlowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OscillatoryFlowSpec")
            .field("n1", &self.n1)
            .field("t1", &self.t1)
            .field("t2", &self.t2)
            .field("phi2", &self.phi2.is_some())
            .field("jac_phi1_x", &self.jac_phi1_x.is_some())
            .finish_non_exhaustive()
    }
}

impl OscillatoryFlowSpec {
    pub fn new(
        n1: usize,
        t1: f64,
        t2: f64,
        phi1: impl Fn(&[f64], &[f64], f64, f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Result<Self, OscError> {
        if !(t1 > 0.0 && t2 > 0.0) {
            return Err(OscError::NonpositivePeriod(t1, t2));
        }
        Ok(Self {
            n1,
            phi1: Arc::new(phi1),
            phi2: None,
            t1,
            t2,
            jac_phi1_x: None,
        })
    }

    pub fn with_phi2(
        mut self,
        phi2: impl Fn(&[f64], &[f64], f64, f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.phi2 = Some(Arc::new(phi2));
        self
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(&[f64], &[f64], f64, f64) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jac_phi1_x = Some(Arc::new(jac));
        self
    }

    pub fn phi1(&self, x: &[f64], z: &[f64], t1: f64, t2: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n1];
        (self.phi1)(x, z, t1, t2, &mut out);
        out
    }

    pub fn phi2(&self, x: &[f64], z: &[f64], t1: f64, t2: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n1];
        if let Some(p) = &self.phi2 {
            p(x, z, t1, t2, &mut out);
        }
        out
    }
}

/// `f_ε` bound to a fixed `ε`.
#[derive(Clone, Debug)]
pub struct AssembledField {
    pub spec: OscillatoryFlowSpec,
    pub eps: f64,
}

impl AssembledField {
    /// Writes `ε⁻¹φ₁ + φ₂` into `out` (length `n1`).
    pub fn eval(&self, x: &[f64], z: &[f64], t1: f64, t2: f64, out: &mut [f64]) {
        (self.spec.phi1)(x, z, t1, t2, out);
        let inv = 1.0 / self.eps;
        out.iter_mut().for_each(|v| *v *= inv);
        if let Some(p) = &self.spec.phi2 {
            let mut buf = vec![0.0; out.len()];
            p(x, z, t1, t2, &mut buf);
            out.iter_mut().zip(&buf).for_each(|(o, b)| *o += b);
        }
    }

    /// The field on `(x, τ₁, τ₂)`: `n1 + 2` entries ending in `ε⁻¹, ε⁻²`.
    pub fn eval_extended(&self, x: &[f64], z: &[f64], t1: f64, t2: f64, out: &mut [f64]) {
        let n1 = self.spec.n1;
        self.eval(x, z, t1, t2, &mut out[..n1]);
        out[n1] = 1.0 / self.eps;
        out[n1 + 1] = 1.0 / (self.eps * self.eps);
    }

    pub fn as_timed_field(&self) -> TimedField {
        let me = self.clone();
        Arc::new(move |x: &[f64], z: &[f64], t1, t2, out: &mut [f64]| me.eval(x, z, t1, t2, out))
    }
}

pub fn assemble_f_eps(spec: &OscillatoryFlowSpec, eps: f64) -> Result<AssembledField, OscError> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(OscError::NonpositiveEpsilon(eps));
    }
    Ok(AssembledField {
        spec: spec.clone(),
        eps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscSample {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub tau1: f64,
    pub tau2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegularityReport {
    pub periodicity_residual_1: f64,
    pub periodicity_residual_2: f64,
    /// Largest `|∫₀^{T₂} φ₁ dτ₂|` over the samples.
    pub zero_mean_residual: f64,
}

impl RegularityReport {
    pub fn max_residual(&self) -> f64 {
        self.periodicity_residual_1
            .max(self.periodicity_residual_2)
            .max(self.zero_mean_residual)
    }
}

/// Samples the periodicity and zero-mean hypotheses on `φ₁, φ₂`.
pub fn verify_regularity(
    spec: &OscillatoryFlowSpec,
    samples: &[OscSample],
    quad_nodes: usize,
) -> Result<RegularityReport, OscError> {
    if quad_nodes < 16 {
        return Err(OscError::TooFewNodes(quad_nodes));
    }
    let diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    };
    let mut rep = RegularityReport::default();
    for s in samples {
        let (x, z, a, b) = (&s.x, &s.z, s.tau1, s.tau2);
        let base = [spec.phi1(x, z, a, b), spec.phi2(x, z, a, b)];
        let shift1 = [
            spec.phi1(x, z, a + spec.t1, b),
            spec.phi2(x, z, a + spec.t1, b),
        ];
        let shift2 = [
            spec.phi1(x, z, a, b + spec.t2),
            spec.phi2(x, z, a, b + spec.t2),
        ];
        for k in 0..2 {
            rep.periodicity_residual_1 = rep.periodicity_residual_1.max(diff(&base[k], &shift1[k]));
            rep.periodicity_residual_2 = rep.periodicity_residual_2.max(diff(&base[k], &shift2[k]));
        }
        for i in 0..spec.n1 {
            let integral = periodic_integral(|t2| spec.phi1(x, z, a, t2)[i], spec.t2, quad_nodes);
            rep.zero_mean_residual = rep.zero_mean_residual.max(integral.abs());
        }
    }
    Ok(rep)
}

/// Hybrid data on `θ = (x, z)` paired with an oscillatory flow for `x`.
///
/// The executable system has state `(x, z, τ₁, τ₂)`.
#[derive(Clone, Debug)]
pub struct OscillatoryHybrid {
    pub data: ThetaData,
    pub osc: OscillatoryFlowSpec,
    pub eps: f64,
}

impl OscillatoryHybrid {
    pub fn new(data: ThetaData, osc: OscillatoryFlowSpec, eps: f64) -> Result<Self, OscError> {
        assemble_f_eps(&osc, eps)?;
        Ok(Self { data, osc, eps })
    }

    /// The timer-augmented original system with this structure attached.
    pub fn system(&self) -> HybridSystem {
        let field = assemble_f_eps(&self.osc, self.eps)
            .expect("epsilon validated on construction")
            .as_timed_field();
        let mut sys = self.data.with_timers(field, self.eps);
        sys.oscillatory = Some(Arc::new(self.clone()));
        sys
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self, OscError> {
        Self::new(self.data.clone(), self.osc.clone(), eps)
    }

    /// Initial state `(x, z, τ₁ = 0, τ₂ = 0)`.
    pub fn initial_state(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        let mut s = Vec::with_capacity(x.len() + z.len() + 2);
        s.extend_from_slice(x);
        s.extend_from_slice(z);
        s.extend_from_slice(&[0.0, 0.0]);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cos_spec(offset: f64) -> OscillatoryFlowSpec {
        OscillatoryFlowSpec::new(1, 2.0 * PI, 2.0 * PI, move |_, _, _, t2, out| {
            out[0] = t2.cos() + offset
        })
        .unwrap()
    }

    #[test]
    fn zero_phi1_gives_phi2() {
        let spec = OscillatoryFlowSpec::new(2, 1.0, 1.0, |_, _, _, _, out| out.fill(0.0))
            .unwrap()
            .with_phi2(|x, _, _, _, out| {
                out[0] = x[1];
                out[1] = -x[0];
            });
        for eps in [1.0, 0.1, 1e-3] {
            let f = assemble_f_eps(&spec, eps).unwrap();
            let mut out = [0.0; 2];
            f.eval(&[1.0, 2.0], &[], 0.3, 0.7, &mut out);
            assert_eq!(out, [2.0, -1.0]);
        }
    }

    #[test]
    fn constant_phi1_scales_with_inverse_eps() {
        let spec = OscillatoryFlowSpec::new(1, 1.0, 1.0, |_, _, _, _, out| out[0] = 3.0)
            .unwrap()
            .with_phi2(|_, _, _, _, out| out[0] = 1.0);
        let f = assemble_f_eps(&spec, 0.5).unwrap();
        let mut out = [0.0; 3];
        f.eval_extended(&[0.0], &[], 0.0, 0.0, &mut out);
        assert_eq!(out, [7.0, 2.0, 4.0]);
    }

    #[test]
    fn nonpositive_eps_rejected() {
        assert_eq!(
            assemble_f_eps(&cos_spec(0.0), 0.0).unwrap_err(),
            OscError::NonpositiveEpsilon(0.0)
        );
        assert!(assemble_f_eps(&cos_spec(0.0), -1.0).is_err());
    }

    #[test]
    fn offset_shows_up_in_zero_mean_residual() {
        let samples = vec![OscSample {
            x: vec![0.0],
            z: vec![],
            tau1: 0.0,
            tau2: 0.0,
        }];
        let rep = verify_regularity(&cos_spec(0.1), &samples, 64).unwrap();
        assert!((rep.zero_mean_residual - 0.1 * 2.0 * PI).abs() < 1e-12);
        assert_eq!(rep.periodicity_residual_1, 0.0);
        assert!(rep.periodicity_residual_2 < 1e-12);
        let clean = verify_regularity(&cos_spec(0.0), &samples, 64).unwrap();
        assert!(clean.zero_mean_residual < 1e-12);
        assert!(verify_regularity(&cos_spec(0.0), &samples, 8).is_err());
    }
}
