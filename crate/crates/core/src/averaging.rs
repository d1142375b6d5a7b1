//! Numerical second-order averaging.
//!
//! With `u₁ = ∫₀^{τ₂} φ₁ ds` and `[a, b]_x = ∂ₓb·a − ∂ₓa·b`, the averaged
//! field is the mean of `φ₂ + ½[u₁, φ₁]_x` over both fast periods. On the
//! `τ₂` grid the antiderivatives of `φ₁` and of its Jacobian come from a
//! spectral integrator, and the means from the periodic trapezoid rule.

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hybrid::{HybridSystem, PlainField};
use crate::linalg::norm;
use crate::oscillatory::{OscillatoryFlowSpec, OscillatoryHybrid};
use crate::quadrature::{uniform_nodes, GaussLegendre, SpectralAntiderivative};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AveragingError {
    #[error("quadrature needs at least 16 nodes per period and a positive step, got {0:?}")]
    InvalidQuadrature(QuadratureConfig),
    #[error("{bs} vector fields but {vs} scalar signals")]
    LengthMismatch { bs: usize, vs: usize },
    #[error("system carries no oscillatory flow structure")]
    NotOscillatory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub nodes_tau1: usize,
    pub nodes_tau2: usize,
    /// Relative finite-difference step; the step used at `x` is
    /// `fd_step·(1 + ‖x‖)`.
    pub fd_step: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self::uniform(256)
    }
}

impl QuadratureConfig {
    pub fn uniform(nodes: usize) -> Self {
        Self {
            nodes_tau1: nodes,
            nodes_tau2: nodes,
            fd_step: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<(), AveragingError> {
        if self.nodes_tau1 < 16 || self.nodes_tau2 < 16 || !(self.fd_step > 0.0) {
            return Err(AveragingError::InvalidQuadrature(*self));
        }
        Ok(())
    }

    pub fn step_at(&self, x: &[f64]) -> f64 {
        self.fd_step * (1.0 + norm(x))
    }
}

fn gauss() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(12))
}

/// Central-difference Jacobian of `f: ℝⁿ → ℝᵐ`.
pub fn fd_jacobian(f: impl Fn(&[f64], &mut [f64]), x: &[f64], m: usize, h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    let (mut fp, mut fm) = (vec![0.0; m], vec![0.0; m]);
    for c in 0..n {
        xp[c] = x[c] + h;
        f(&xp, &mut fp);
        xp[c] = x[c] - h;
        f(&xp, &mut fm);
        xp[c] = x[c];
        for r in 0..m {
            jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    jac
}

/// `[a, b](x) = ∂b(x)·a(x) − ∂a(x)·b(x)` with finite-difference Jacobians.
pub fn lie_bracket(
    a: impl Fn(&[f64], &mut [f64]),
    b: impl Fn(&[f64], &mut [f64]),
    x: &[f64],
    h: f64,
) -> Vec<f64> {
    let n = x.len();
    let (mut av, mut bv) = (vec![0.0; n], vec![0.0; n]);
    a(x, &mut av);
    b(x, &mut bv);
    let ja = fd_jacobian(&a, x, n, h);
    let jb = fd_jacobian(&b, x, n, h);
    let out = jb * DVector::from_vec(av) - ja * DVector::from_vec(bv);
    out.as_slice().to_vec()
}

/// Finite-difference `∂ₓφ₁`, regardless of any analytic Jacobian.
pub fn jacobian_fd_x(
    spec: &OscillatoryFlowSpec,
    x: &[f64],
    z: &[f64],
    t1: f64,
    t2: f64,
    h: f64,
) -> DMatrix<f64> {
    fd_jacobian(|xx, out| (spec.phi1)(xx, z, t1, t2, out), x, spec.n1, h)
}

/// `∂ₓφ₁`: analytic when the spec provides it, central differences otherwise.
pub fn jacobian_x(
    spec: &OscillatoryFlowSpec,
    x: &[f64],
    z: &[f64],
    t1: f64,
    t2: f64,
    quad: &QuadratureConfig,
) -> DMatrix<f64> {
    match &spec.jac_phi1_x {
        Some(j) => j(x, z, t1, t2),
        None => jacobian_fd_x(spec, x, z, t1, t2, quad.step_at(x)),
    }
}

fn panels_for(tau: f64, period: f64) -> usize {
    ((tau / period) * 32.0).ceil().max(1.0) as usize
}

/// `u₁ = ∫₀^{τ₂} φ₁(x, z, τ₁, s) ds` with `τ₂` reduced modulo `T₂`.
pub fn u1_eval(spec: &OscillatoryFlowSpec, x: &[f64], z: &[f64], t1: f64, t2: f64) -> Vec<f64> {
    let tau = t2.rem_euclid(spec.t2);
    let mut out = vec![0.0; spec.n1];
    gauss().integrate_vec(
        |s, buf| (spec.phi1)(x, z, t1, s, buf),
        0.0,
        tau,
        panels_for(tau, spec.t2),
        &mut out,
    );
    out
}

/// `∂ₓu₁ = ∫₀^{τ₂} ∂ₓφ₁ ds`.
pub fn u1_jacobian(
    spec: &OscillatoryFlowSpec,
    x: &[f64],
    z: &[f64],
    t1: f64,
    t2: f64,
    quad: &QuadratureConfig,
) -> DMatrix<f64> {
    let tau = t2.rem_euclid(spec.t2);
    let n = spec.n1;
    let mut out = vec![0.0; n * n];
    gauss().integrate_vec(
        |s, buf| buf.copy_from_slice(jacobian_x(spec, x, z, t1, s, quad).as_slice()),
        0.0,
        tau,
        panels_for(tau, spec.t2),
        &mut out,
    );
    DMatrix::from_vec(n, n, out)
}

fn bracket_parts(
    spec: &OscillatoryFlowSpec,
    x: &[f64],
    z: &[f64],
    t1: f64,
    t2: f64,
    quad: &QuadratureConfig,
) -> (DVector<f64>, DVector<f64>) {
    let phi = DVector::from_vec(spec.phi1(x, z, t1, t2));
    let u = DVector::from_vec(u1_eval(spec, x, z, t1, t2));
    let jphi = jacobian_x(spec, x, z, t1, t2, quad);
    let ju = u1_jacobian(spec, x, z, t1, t2, quad);
    (jphi * u, ju * phi)
}

/// `[u₁, φ₁]_x = ∂ₓφ₁·u₁ − ∂ₓu₁·φ₁` at a single point.
pub fn lie_bracket_x(
    spec: &OscillatoryFlowSpec,
    x: &[f64],
    z: &[f64],
    t1: f64,
    t2: f64,
    quad: &QuadratureConfig,
) -> Vec<f64> {
    let (a, b) = bracket_parts(spec, x, z, t1, t2, quad);
    (a - b).as_slice().to_vec()
}

/// `(ψ_m, ψ_p) = ½(∂ₓφ₁·u₁ ∓ ∂ₓu₁·φ₁)`.
pub fn psi_eval(
    spec: &OscillatoryFlowSpec,
    x: &[f64],
    z: &[f64],
    t1: f64,
    t2: f64,
    quad: &QuadratureConfig,
) -> (Vec<f64>, Vec<f64>) {
    let (a, b) = bracket_parts(spec, x, z, t1, t2, quad);
    let m = (&a - &b) * 0.5;
    let p = (a + b) * 0.5;
    (m.as_slice().to_vec(), p.as_slice().to_vec())
}

/// Samples of `φ₁, u₁, ∂ₓφ₁, ∂ₓu₁` on the uniform `τ₂` grid at fixed `τ₁`.
/// Jacobians are stored column-major, one `n × n` block per node.
struct Slice {
    n: usize,
    phi: Vec<f64>,
    u: Vec<f64>,
    jphi: Vec<f64>,
    ju: Vec<f64>,
}

impl Slice {
    fn build(
        spec: &OscillatoryFlowSpec,
        x: &[f64],
        z: &[f64],
        t1: f64,
        quad: &QuadratureConfig,
        anti: &SpectralAntiderivative,
    ) -> Self {
        let n = spec.n1;
        let nodes = anti.nodes();
        let m = nodes.len();
        let mut phi = vec![0.0; m * n];
        let mut jphi = vec![0.0; m * n * n];
        for (k, &t2) in nodes.iter().enumerate() {
            (spec.phi1)(x, z, t1, t2, &mut phi[k * n..(k + 1) * n]);
            let jac = jacobian_x(spec, x, z, t1, t2, quad);
            jphi[k * n * n..(k + 1) * n * n].copy_from_slice(jac.as_slice());
        }
        let u = integrate_columns(anti, &phi, n);
        let ju = integrate_columns(anti, &jphi, n * n);
        Self {
            n,
            phi,
            u,
            jphi,
            ju,
        }
    }

    fn nodes(&self) -> usize {
        self.phi.len() / self.n
    }

    /// Mean over the grid of `½(∂φ₁·u₁ + sign·∂u₁·φ₁)`.
    fn mean_psi(&self, sign: f64) -> Vec<f64> {
        let n = self.n;
        let mut acc = vec![0.0; n];
        for k in 0..self.nodes() {
            let jp = &self.jphi[k * n * n..(k + 1) * n * n];
            let ju = &self.ju[k * n * n..(k + 1) * n * n];
            let ph = &self.phi[k * n..(k + 1) * n];
            let u = &self.u[k * n..(k + 1) * n];
            for r in 0..n {
                let mut s = 0.0;
                for c in 0..n {
                    s += jp[c * n + r] * u[c] + sign * ju[c * n + r] * ph[c];
                }
                acc[r] += 0.5 * s;
            }
        }
        let inv = 1.0 / self.nodes() as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
        acc
    }
}

/// Antiderivative of each of `width` interleaved series.
fn integrate_columns(anti: &SpectralAntiderivative, data: &[f64], width: usize) -> Vec<f64> {
    let m = anti.len();
    let mut out = vec![0.0; data.len()];
    let mut series = vec![0.0; m];
    let mut prim = vec![0.0; m];
    for c in 0..width {
        for k in 0..m {
            series[k] = data[k * width + c];
        }
        anti.apply(&series, &mut prim);
        for k in 0..m {
            out[k * width + c] = prim[k];
        }
    }
    out
}

fn mean_phi2(spec: &OscillatoryFlowSpec, x: &[f64], z: &[f64], t1: f64, nodes: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; spec.n1];
    if spec.phi2.is_none() {
        return acc;
    }
    for &t2 in nodes {
        for (a, v) in acc.iter_mut().zip(spec.phi2(x, z, t1, t2)) {
            *a += v;
        }
    }
    let inv = 1.0 / nodes.len() as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    acc
}

/// Reusable evaluator; holds the FFT plans for the configured grid.
#[derive(Clone)]
pub struct Averager {
    pub spec: OscillatoryFlowSpec,
    pub quad: QuadratureConfig,
    anti: SpectralAntiderivative,
}

impl fmt::Debug for Averager {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Averager")
            .field("spec", &self.spec)
            .field("quad", &self.quad)
            .finish()
    }
}

impl Averager {
    pub fn new(spec: &OscillatoryFlowSpec, quad: QuadratureConfig) -> Result<Self, AveragingError> {
        quad.validate()?;
        Ok(Self {
            spec: spec.clone(),
            quad,
            anti: SpectralAntiderivative::new(quad.nodes_tau2, spec.t2),
        })
    }

    /// `h̄(τ₁) = (1/T₂)∫₀^{T₂} (φ₂ + ψ_m) dτ₂`.
    pub fn h_bar(&self, x: &[f64], z: &[f64], t1: f64) -> Vec<f64> {
        let slice = Slice::build(&self.spec, x, z, t1, &self.quad, &self.anti);
        let mut out = slice.mean_psi(-1.0);
        let nodes = self.anti.nodes();
        for (o, p) in out.iter_mut().zip(mean_phi2(&self.spec, x, z, t1, &nodes)) {
            *o += p;
        }
        out
    }

    /// `(1/T₂)∫₀^{T₂} ψ_p dτ₂`, which vanishes for zero-mean `φ₁`.
    pub fn psi_p_mean(&self, x: &[f64], z: &[f64], t1: f64) -> Vec<f64> {
        Slice::build(&self.spec, x, z, t1, &self.quad, &self.anti).mean_psi(1.0)
    }

    /// The second-order average `f̄(x, z)`.
    pub fn f_bar(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.spec.n1];
        let t1_nodes = uniform_nodes(self.quad.nodes_tau1, self.spec.t1);
        for &t1 in &t1_nodes {
            for (a, v) in acc.iter_mut().zip(self.h_bar(x, z, t1)) {
                *a += v;
            }
        }
        let inv = 1.0 / t1_nodes.len() as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
        acc
    }

    /// `(1/T₂)∫₀^{T₂} φ₁ dτ₂`.
    pub fn first_order(&self, x: &[f64], z: &[f64], t1: f64) -> Vec<f64> {
        let mut acc = vec![0.0; self.spec.n1];
        let nodes = self.anti.nodes();
        for &t2 in &nodes {
            for (a, v) in acc.iter_mut().zip(self.spec.phi1(x, z, t1, t2)) {
                *a += v;
            }
        }
        let inv = 1.0 / nodes.len() as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
        acc
    }
}

pub fn h_bar_eval(
    spec: &OscillatoryFlowSpec,
    x: &[f64],
    z: &[f64],
    t1: f64,
    quad: &QuadratureConfig,
) -> Result<Vec<f64>, AveragingError> {
    Ok(Averager::new(spec, *quad)?.h_bar(x, z, t1))
}

pub fn f_bar_eval(
    spec: &OscillatoryFlowSpec,
    x: &[f64],
    z: &[f64],
    quad: &QuadratureConfig,
) -> Result<Vec<f64>, AveragingError> {
    Ok(Averager::new(spec, *quad)?.f_bar(x, z))
}

pub fn first_order_average(
    spec: &OscillatoryFlowSpec,
    x: &[f64],
    z: &[f64],
    t1: f64,
    quad: &QuadratureConfig,
) -> Result<Vec<f64>, AveragingError> {
    Ok(Averager::new(spec, *quad)?.first_order(x, z, t1))
}

/// Vector field `b(x, z, τ₁)` of a control-affine decomposition.
pub type InputField = Arc<dyn Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync>;
/// Scalar dither `v(τ₁, τ₂)`.
pub type Dither = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Bracket part of `h̄(τ₁)` for `φ₁ = Σ_ℓ b_ℓ v_ℓ`.
///
/// Returns `½ Σ_{a>b} [b_a, b_b]_x · Λ_ab(τ₁)` with
/// `Λ_ab = (1/T₂)∫₀^{T₂} (V_a v_b − V_b v_a) dτ₂` and `V = ∫₀^{τ₂} v`.
#[allow(clippy::too_many_arguments)]
pub fn control_affine_bracket_average(
    bs: &[InputField],
    vs: &[Dither],
    x: &[f64],
    z: &[f64],
    t1: f64,
    t2_period: f64,
    quad: &QuadratureConfig,
) -> Result<Vec<f64>, AveragingError> {
    quad.validate()?;
    if bs.len() != vs.len() || bs.is_empty() {
        return Err(AveragingError::LengthMismatch {
            bs: bs.len(),
            vs: vs.len(),
        });
    }
    let n = x.len();
    let r = bs.len();
    let anti = SpectralAntiderivative::new(quad.nodes_tau2, t2_period);
    let nodes = anti.nodes();
    let m = nodes.len();
    let mut v = vec![vec![0.0; m]; r];
    let mut vint = vec![vec![0.0; m]; r];
    for l in 0..r {
        for (k, &t2) in nodes.iter().enumerate() {
            v[l][k] = vs[l](t1, t2);
        }
        anti.apply(&v[l], &mut vint[l]);
    }
    let h = quad.step_at(x);
    let mut out = vec![0.0; n];
    for a in 0..r {
        for b in 0..a {
            let lambda = (0..m)
                .map(|k| vint[a][k] * v[b][k] - vint[b][k] * v[a][k])
                .sum::<f64>()
                / m as f64;
            if lambda == 0.0 {
                continue;
            }
            let br = lie_bracket(
                |xx, o| bs[a](xx, z, t1, o),
                |xx, o| bs[b](xx, z, t1, o),
                x,
                h,
            );
            for (o, val) in out.iter_mut().zip(br) {
                *o += 0.5 * lambda * val;
            }
        }
    }
    Ok(out)
}

/// The averaged hybrid system: same sets, jump map and schedule, flow `f̄`
/// for `x` and the original selection for `z`, timers removed.
#[derive(Clone, Debug)]
pub struct AveragedSystem {
    pub system: HybridSystem,
    pub source: Arc<OscillatoryHybrid>,
    pub averager: Averager,
}

impl AveragedSystem {
    pub fn f_bar(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        self.averager.f_bar(x, z)
    }

    /// Drops the timer components of an original-system state.
    pub fn project_state(&self, original: &[f64]) -> Vec<f64> {
        original[..self.source.data.theta_dim()].to_vec()
    }
}

pub fn build_average_system(
    hds: &HybridSystem,
    quad: &QuadratureConfig,
) -> Result<AveragedSystem, AveragingError> {
    let source = hds
        .oscillatory
        .clone()
        .ok_or(AveragingError::NotOscillatory)?;
    let averager = Averager::new(&source.osc, *quad)?;
    let av = averager.clone();
    let field: PlainField = Arc::new(move |x: &[f64], z: &[f64], out: &mut [f64]| {
        out.copy_from_slice(&av.f_bar(x, z));
    });
    let system = source.data.without_timers(field);
    Ok(AveragedSystem {
        system,
        source,
        averager,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const TP: f64 = 2.0 * PI;

    fn spec(
        f: impl Fn(&[f64], &[f64], f64, f64, &mut [f64]) + Send + Sync + 'static,
        n: usize,
    ) -> OscillatoryFlowSpec {
        OscillatoryFlowSpec::new(n, TP, TP, f).unwrap()
    }

    #[test]
    fn u1_of_cosine_is_sine() {
        let s = spec(|_, _, _, t2, out| out[0] = t2.cos(), 1);
        for t in [PI / 4.0, PI, 1.7, TP + 0.5] {
            assert_abs_diff_eq!(
                u1_eval(&s, &[0.0], &[], 0.0, t)[0],
                t.sin(),
                epsilon = 1e-12
            );
        }
        let zero = spec(|_, _, _, _, out| out.fill(0.0), 2);
        assert_eq!(u1_eval(&zero, &[1.0, 1.0], &[], 0.0, 2.0), vec![0.0, 0.0]);
    }

    #[test]
    fn linear_field_jacobian_is_exact() {
        let m = [[1.0, -2.0], [0.5, 3.0]];
        let j = fd_jacobian(
            |x, o| {
                o[0] = m[0][0] * x[0] + m[0][1] * x[1];
                o[1] = m[1][0] * x[0] + m[1][1] * x[1];
            },
            &[0.3, -0.7],
            2,
            1e-5,
        );
        for r in 0..2 {
            for c in 0..2 {
                assert_abs_diff_eq!(j[(r, c)], m[r][c], epsilon = 1e-10);
            }
        }
        let id = fd_jacobian(|x, o| o.copy_from_slice(x), &[1.0, 2.0, 3.0], 3, 1e-5);
        assert_abs_diff_eq!((id - DMatrix::identity(3, 3)).amax(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn bracket_of_shifted_cosine_matches_hand_expansion() {
        // φ₁ = cos τ₂ (x₂, 0): u₁ = sin τ₂ (x₂, 0), ∂φ₁·u₁ = 0, ∂u₁·φ₁ = 0.
        // Add a second component to make it nontrivial: φ₁ = cos τ₂ (x₂, x₁²).
        let s = spec(
            |x, _, _, t2, o| {
                o[0] = t2.cos() * x[1];
                o[1] = t2.cos() * x[0] * x[0];
            },
            2,
        );
        let (x, t2) = ([0.7, -1.3], 1.1);
        let quad = QuadratureConfig::default();
        let got = lie_bracket_x(&s, &x, &[], 0.0, t2, &quad);
        // [u₁, φ₁] = sinτ cosτ ([[0,1],[2x₁,0]]·(x₂,x₁²) − same) = 0
        assert_abs_diff_eq!(got[0], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(got[1], 0.0, epsilon = 1e-6);
        // A genuinely non-commuting pair: φ₁ = cos τ₂ (x₂, 0) + sin τ₂ (0, x₁).
        let s2 = spec(
            |x, _, _, t2, o| {
                o[0] = t2.cos() * x[1];
                o[1] = t2.sin() * x[0];
            },
            2,
        );
        let got = lie_bracket_x(&s2, &x, &[], 0.0, t2, &quad);
        // u₁ = (sinτ x₂, (1−cosτ) x₁)
        let (c, sn) = (t2.cos(), t2.sin());
        let u = [sn * x[1], (1.0 - c) * x[0]];
        let phi = [c * x[1], sn * x[0]];
        let expect = [c * u[1] - sn * phi[1], sn * u[0] - (1.0 - c) * phi[0]];
        assert_abs_diff_eq!(got[0], expect[0], epsilon = 1e-6);
        assert_abs_diff_eq!(got[1], expect[1], epsilon = 1e-6);
    }

    #[test]
    fn bracket_is_antisymmetric() {
        let a = |x: &[f64], o: &mut [f64]| {
            o[0] = x[1].sin();
            o[1] = x[0] * x[1];
        };
        let b = |x: &[f64], o: &mut [f64]| {
            o[0] = x[0].exp();
            o[1] = x[1].cos();
        };
        let x = [0.2, -0.4];
        let ab = lie_bracket(a, b, &x, 1e-5);
        let ba = lie_bracket(b, a, &x, 1e-5);
        for i in 0..2 {
            assert_abs_diff_eq!(ab[i], -ba[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn x_independent_phi1_has_no_bracket_terms() {
        let s = spec(|_, _, _, t2, o| o[0] = t2.cos(), 1);
        let quad = QuadratureConfig::default();
        let (m, p) = psi_eval(&s, &[0.4], &[], 0.0, 1.0, &quad);
        assert_abs_diff_eq!(m[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn phi2_only_average_is_phi2() {
        let s = spec(|_, _, _, _, o| o.fill(0.0), 2).with_phi2(|x, _, _, _, o| {
            o[0] = -x[0];
            o[1] = x[0] * x[1];
        });
        let quad = QuadratureConfig::uniform(32);
        let f = f_bar_eval(&s, &[2.0, 3.0], &[], &quad).unwrap();
        assert_eq!(f, vec![-2.0, 6.0]);
        let h = h_bar_eval(&s, &[2.0, 3.0], &[], 0.4, &quad).unwrap();
        assert_eq!(h, vec![-2.0, 6.0]);
    }

    #[test]
    fn first_order_average_of_offset_cosine() {
        let s = spec(|_, _, _, t2, o| o[0] = t2.cos() + 0.1, 1);
        let v = first_order_average(&s, &[0.0], &[], 0.0, &QuadratureConfig::default()).unwrap();
        assert_abs_diff_eq!(v[0], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn affine_path_vanishes_for_single_or_commuting_fields() {
        let quad = QuadratureConfig::uniform(64);
        let b1: InputField = Arc::new(|_, _, _, o: &mut [f64]| {
            o[0] = 1.0;
            o[1] = 0.0;
        });
        let b2: InputField = Arc::new(|_, _, _, o: &mut [f64]| {
            o[0] = 0.0;
            o[1] = 1.0;
        });
        let v1: Dither = Arc::new(|_, t| t.cos());
        let v2: Dither = Arc::new(|_, t| t.sin());
        let one = control_affine_bracket_average(
            std::slice::from_ref(&b1),
            std::slice::from_ref(&v1),
            &[1.0, 2.0],
            &[],
            0.0,
            TP,
            &quad,
        )
        .unwrap();
        assert_eq!(one, vec![0.0, 0.0]);
        let two = control_affine_bracket_average(
            &[b1, b2],
            &[v1.clone(), v2],
            &[1.0, 2.0],
            &[],
            0.0,
            TP,
            &quad,
        )
        .unwrap();
        assert!(two.iter().all(|v| v.abs() < 1e-12));
        assert!(matches!(
            control_affine_bracket_average(&[], &[v1], &[1.0], &[], 0.0, TP, &quad),
            Err(AveragingError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn quadrature_config_is_validated() {
        let mut q = QuadratureConfig::uniform(8);
        assert!(q.validate().is_err());
        q = QuadratureConfig::default();
        q.fd_step = 0.0;
        assert!(q.validate().is_err());
    }
}
