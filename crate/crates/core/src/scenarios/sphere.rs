//! Global extremum seeking on `S²` with a synergistic pair of warped costs
//! and hysteresis switching between them.
//!
//! `J(x) = 1 − x₃`. On the lower hemisphere the mode-`q` cost precomposes
//! `J` with a rotation about `e₂` by `(k_q/2)(J − 1)²`, which moves the
//! maximiser apart for the two modes. The logic state jumps to the best
//! mode once the current one trails it by `δ`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{cosine_decomposition, Phase, Scenario, ScenarioError, StateSampler};
use crate::averaging::{InputField, QuadratureConfig};
use crate::closeness::IndicatorSpec;
use crate::hybrid::{never, JumpSelector, Priority, SolverConfig, ThetaData};
use crate::linalg::{cross, dot, norm};
use crate::oscillatory::{OscillatoryFlowSpec, OscillatoryHybrid};
use crate::quadrature::{common_period, Rational};

const BASIS: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Debug, Clone)]
pub struct SphereEsParams {
    pub eps: f64,
    pub frequencies: [Rational; 3],
    /// Hysteresis gap `δ ∈ (0, 1/4)`.
    pub delta: f64,
    /// Warp gains `k_q`, one per mode.
    pub warp: Vec<f64>,
    pub x0: [f64; 3],
    pub mode0: u32,
    pub horizon: f64,
    /// `false` freezes the logic state (`D = ∅`).
    pub switching: bool,
    pub step: Option<f64>,
    pub quad: QuadratureConfig,
}

impl Default for SphereEsParams {
    fn default() -> Self {
        let x0 = [5e-4, 5e-4, -1.0];
        let r = norm(&x0);
        Self {
            eps: 1.0 / (10.0 * PI).sqrt(),
            frequencies: [
                Rational::integer(3),
                Rational::integer(2),
                Rational::integer(1),
            ],
            delta: 0.1,
            warp: vec![0.5, -0.5],
            x0: x0.map(|v| v / r),
            mode0: 1,
            horizon: 30.0,
            switching: true,
            step: None,
            quad: QuadratureConfig {
                nodes_tau1: 16,
                nodes_tau2: 64,
                fd_step: 1e-5,
            },
        }
    }
}

/// `J(Φ_k(x))` for any `x ∈ ℝ³` (the sphere is not enforced).
pub fn warped_cost(k: f64, x: &[f64]) -> f64 {
    if x[2] <= 0.0 {
        let (s, c) = (0.5 * k * x[2] * x[2]).sin_cos();
        1.0 + x[0] * s - x[2] * c
    } else {
        1.0 - x[2]
    }
}

/// Ambient gradient of [`warped_cost`].
pub fn warped_gradient(k: f64, x: &[f64]) -> [f64; 3] {
    if x[2] <= 0.0 {
        let (s, c) = (0.5 * k * x[2] * x[2]).sin_cos();
        [s, 0.0, -c + k * x[2] * (x[0] * c + x[2] * s)]
    } else {
        [0.0, 0.0, -1.0]
    }
}

/// `J̃_q(x)` for mode `q` (one-based) on the unit sphere.
pub fn synergistic_eval(q: u32, x: &[f64], p: &SphereEsParams) -> Result<f64, ScenarioError> {
    let r = norm(x);
    if (r - 1.0).abs() > 1e-6 {
        return Err(ScenarioError::OffManifold(r));
    }
    let k = p
        .warp
        .get((q as usize).wrapping_sub(1))
        .ok_or_else(|| ScenarioError::InvalidParameter(format!("mode {q} out of range")))?;
    Ok(warped_cost(*k, x))
}

fn gap(warp: &[f64], x: &[f64], z: f64) -> f64 {
    let own = warped_cost(warp[(z.round() as usize).clamp(1, warp.len()) - 1], x);
    let best = warp
        .iter()
        .map(|&k| warped_cost(k, x))
        .fold(f64::INFINITY, f64::min);
    own - best
}

/// `J̃_z(x) − min_q J̃_q(x)`.
pub fn synergy_gap(p: &SphereEsParams, x: &[f64], z: u32) -> f64 {
    gap(&p.warp, x, z as f64)
}

/// Modes attaining `min_q J̃_q(x)`, ascending.
pub fn argmin_modes(warp: &[f64], x: &[f64]) -> Vec<u32> {
    let vals: Vec<f64> = warp.iter().map(|&k| warped_cost(k, x)).collect();
    let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
    (1..=warp.len() as u32)
        .filter(|&q| vals[q as usize - 1] <= best + 1e-12)
        .collect()
}

/// The maximiser of `J̃_q`: `(sin ψ, 0, cos ψ)` with `ψ + (k/2)cos²ψ = π`.
pub fn warped_critical_point(k: f64) -> [f64; 3] {
    let g = |psi: f64| psi + 0.5 * k * psi.cos().powi(2) - PI;
    let (mut lo, mut hi) = (0.5 * PI, 1.5 * PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let psi = 0.5 * (lo + hi);
    [psi.sin(), 0.0, psi.cos()]
}

/// Estimate of the gap constant: the smallest lead the best mode holds at
/// any mode's spurious critical point. Only values of `δ` below it let the
/// switching escape those points.
pub fn delta_star_probe(p: &SphereEsParams) -> f64 {
    p.warp
        .iter()
        .enumerate()
        .map(|(i, &k)| gap(&p.warp, &warped_critical_point(k), (i + 1) as f64))
        .fold(f64::INFINITY, f64::min)
}

/// Largest gap over a latitude/longitude grid of the lower hemisphere.
pub fn max_synergy_gap(p: &SphereEsParams, resolution: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..=resolution {
        let polar = 0.5 * PI + 0.5 * PI * a as f64 / resolution as f64;
        for b in 0..(2 * resolution) {
            let az = PI * b as f64 / resolution as f64;
            let x = [polar.sin() * az.cos(), polar.sin() * az.sin(), polar.cos()];
            for q in 1..=p.warp.len() {
                worst = worst.max(gap(&p.warp, &x, q as f64));
            }
        }
    }
    worst
}

pub fn geodesic_to_north(x: &[f64]) -> f64 {
    (x[2] / norm(&x[..3])).clamp(-1.0, 1.0).acos()
}

fn projected_gradient(x: &[f64], g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; 3];
    for e in &BASIS {
        let b = cross(e, x);
        let c = dot(&b, g);
        for r in 0..3 {
            out[r] -= c * b[r];
        }
    }
    out
}

pub fn build_sphere_es(p: &SphereEsParams) -> Result<Scenario, ScenarioError> {
    if !(p.delta > 0.0 && p.delta < 0.25) {
        return Err(ScenarioError::DeltaOutOfRange(p.delta));
    }
    if p.warp.len() < 2 && p.switching {
        return Err(ScenarioError::InvalidParameter(
            "switching needs at least two modes".into(),
        ));
    }
    if p.warp.is_empty() || p.mode0 < 1 || p.mode0 as usize > p.warp.len() {
        return Err(ScenarioError::InvalidParameter(format!(
            "initial mode {} out of range",
            p.mode0
        )));
    }
    for (i, a) in p.frequencies.iter().enumerate() {
        if p.frequencies[..i].contains(a) {
            return Err(ScenarioError::FrequencyCollision(a.to_string()));
        }
    }
    let r = norm(&p.x0);
    if (r - 1.0).abs() > 1e-6 {
        return Err(ScenarioError::OffManifold(r));
    }
    let warp = p.warp.clone();
    let delta = p.delta;

    let (w1, w2) = (warp.clone(), warp.clone());
    let flow_set = move |th: &[f64], tol: f64| gap(&w1, th, th[3]) <= delta + tol;
    let jump_set = move |th: &[f64], tol: f64| gap(&w2, th, th[3]) >= delta - tol;
    let w3 = warp.clone();
    let jump_map = move |th: &[f64]| {
        argmin_modes(&w3, th)
            .into_iter()
            .map(|q| vec![th[0], th[1], th[2], q as f64])
            .collect::<Vec<_>>()
    };
    let data = ThetaData {
        n1: 3,
        n2: 1,
        flow_set: if p.switching {
            Arc::new(flow_set)
        } else {
            Arc::new(crate::hybrid::always)
        },
        jump_set: if p.switching {
            Arc::new(jump_set)
        } else {
            Arc::new(never)
        },
        jump_map: Arc::new(jump_map),
        z_flow: Arc::new(|_: &[f64], out: &mut [f64]| out[0] = 0.0),
        selector: JumpSelector::First,
        schedule: Vec::new(),
        projection: Some(Arc::new(|th: &mut [f64]| {
            let r = norm(&th[..3]);
            th[..3].iter_mut().for_each(|v| *v /= r);
        })),
        labels: vec!["x1".into(), "x2".into(), "x3".into(), "z".into()],
    };

    let t2 = common_period(&p.frequencies)?;
    let w: Vec<f64> = p.frequencies.iter().map(Rational::value).collect();
    let amp: Vec<f64> = w.iter().map(|wi| (2.0 * wi).sqrt()).collect();
    let mode_gain =
        |warp: &[f64], z: &[f64]| warp[(z[0].round() as usize).clamp(1, warp.len()) - 1];

    let (wp, ww, aa) = (warp.clone(), w.clone(), amp.clone());
    let phi1 = move |x: &[f64], z: &[f64], _t1: f64, t2: f64, out: &mut [f64]| {
        let jt = warped_cost(mode_gain(&wp, z), x);
        out.fill(0.0);
        for (i, e) in BASIS.iter().enumerate() {
            let b = cross(e, x);
            let c = aa[i] * (jt + ww[i] * t2).cos();
            for r in 0..3 {
                out[r] += c * b[r];
            }
        }
    };
    let osc = OscillatoryFlowSpec::new(3, t2, t2, phi1)?;
    let eps = p.eps;
    let system = OscillatoryHybrid::new(data, osc, eps)?.system();

    let terms = (0..3)
        .map(|i| {
            let a = amp[i];
            let g: InputField = Arc::new(move |x: &[f64], _z: &[f64], _t1, out: &mut [f64]| {
                let b = cross(&BASIS[i], x);
                for r in 0..3 {
                    out[r] = a * b[r];
                }
            });
            let wp = warp.clone();
            let th: Phase = Arc::new(move |x: &[f64], z: &[f64]| warped_cost(mode_gain(&wp, z), x));
            (g, w[i], th)
        })
        .collect();
    let affine = Some(cosine_decomposition(terms, t2));

    let wp = warp.clone();
    let analytic = Arc::new(move |x: &[f64], z: &[f64]| {
        projected_gradient(x, &warped_gradient(mode_gain(&wp, z), x))
    });

    let mut x0 = p.x0.to_vec();
    x0.push(p.mode0 as f64);
    x0.extend([0.0, 0.0]);
    let w_max = w.iter().copied().fold(0.0, f64::max);
    let step = p.step.unwrap_or(eps * eps * t2 / (64.0 * w_max));
    let solver = SolverConfig::new(step, p.horizon).with_priority(Priority::JumpPriority);
    let average_solver =
        SolverConfig::new(step.max(0.01), p.horizon).with_priority(Priority::JumpPriority);
    let nmodes = warp.len() as u32;
    let sampler: StateSampler = Arc::new(move |rng: &mut ChaCha8Rng| {
        let u: f64 = rng.gen_range(-1.0..=1.0);
        let az: f64 = rng.gen_range(0.0..2.0 * PI);
        let s = (1.0 - u * u).sqrt();
        (
            vec![s * az.cos(), s * az.sin(), u],
            vec![rng.gen_range(1..=nmodes) as f64],
        )
    });

    Ok(Scenario {
        name: "sphere".into(),
        eps,
        system,
        x0,
        solver,
        average_solver,
        quad: p.quad,
        analytic_average: analytic,
        indicator: IndicatorSpec::Distance(Arc::new(geodesic_to_north)),
        closeness_components: vec![0, 1, 2, 3],
        verdict: None,
        automaton: None,
        seed: None,
        sampler,
        affine,
    })
}
