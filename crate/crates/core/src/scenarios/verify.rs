//! Numerical identities every oscillatory scenario has to satisfy, plus the
//! quadrature-versus-analytic average oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Scenario, ScenarioError};
use crate::averaging::{
    control_affine_bracket_average, lie_bracket, u1_eval, Averager, AveragingError,
    QuadratureConfig,
};
use crate::linalg::max_abs_diff;
use crate::oscillatory::{verify_regularity, OscSample, OscillatoryFlowSpec};
use crate::quadrature::{uniform_nodes, GaussLegendre};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub passed: bool,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tol,
            passed: value.is_finite() && value <= tol,
        }
    }
}

fn spec_of(sc: &Scenario) -> Result<&OscillatoryFlowSpec, ScenarioError> {
    sc.oscillatory()
        .map(|o| &o.osc)
        .ok_or(ScenarioError::Averaging(AveragingError::NotOscillatory))
}

/// Random `(x, z, τ₁, τ₂)` probes from the scenario's sampler.
pub fn probes(
    sc: &Scenario,
    spec: &OscillatoryFlowSpec,
    count: usize,
    seed: u64,
) -> Vec<OscSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let (x, z) = (sc.sampler)(&mut rng);
            OscSample {
                x,
                z,
                tau1: rng.gen_range(0.0..spec.t1),
                tau2: rng.gen_range(0.0..spec.t2),
            }
        })
        .collect()
}

/// Largest `|f̄ − f̄_analytic|` over `count` seeded states.
pub fn average_oracle(
    sc: &Scenario,
    quad: &QuadratureConfig,
    count: usize,
    seed: u64,
) -> Result<CheckResult, ScenarioError> {
    let spec = spec_of(sc)?;
    let avg = Averager::new(spec, *quad)?;
    let worst = probes(sc, spec, count, seed)
        .iter()
        .map(|s| max_abs_diff(&avg.f_bar(&s.x, &s.z), &(sc.analytic_average)(&s.x, &s.z)))
        .fold(0.0, f64::max);
    Ok(CheckResult::new("average_vs_analytic", worst, 1e-6))
}

fn mean_phi2(spec: &OscillatoryFlowSpec, x: &[f64], z: &[f64], t1: f64, nodes: usize) -> Vec<f64> {
    let ts = uniform_nodes(nodes, spec.t2);
    let mut acc = vec![0.0; spec.n1];
    for &t2 in &ts {
        acc.iter_mut()
            .zip(spec.phi2(x, z, t1, t2))
            .for_each(|(a, v)| *a += v);
    }
    acc.iter_mut().for_each(|a| *a /= ts.len() as f64);
    acc
}

/// Zero fast mean, `ψ_p` mean, fundamental theorem of calculus for `u₁`,
/// `h̄`/`f̄` consistency, control-affine versus generic bracket, bracket
/// antisymmetry, and the analytic oracle.
pub fn identity_suite(
    sc: &Scenario,
    quad: &QuadratureConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<CheckResult>, ScenarioError> {
    let spec = spec_of(sc)?;
    let avg = Averager::new(spec, *quad)?;
    let samples = probes(sc, spec, count, seed);
    let mut out = Vec::new();

    let reg = verify_regularity(spec, &samples, quad.nodes_tau2)?;
    out.push(CheckResult::new(
        "zero_mean_phi1",
        reg.zero_mean_residual,
        1e-8,
    ));
    out.push(CheckResult::new(
        "periodicity",
        reg.periodicity_residual_1.max(reg.periodicity_residual_2),
        1e-8,
    ));

    let psi = samples
        .iter()
        .map(|s| {
            avg.psi_p_mean(&s.x, &s.z, s.tau1)
                .iter()
                .map(|v| v.abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    out.push(CheckResult::new("psi_p_mean", psi, 1e-8));

    let h = 1e-5 * spec.t2 / (2.0 * std::f64::consts::PI);
    let ftc = samples
        .iter()
        .map(|s| {
            let up = u1_eval(spec, &s.x, &s.z, s.tau1, s.tau2 + h);
            let um = u1_eval(spec, &s.x, &s.z, s.tau1, s.tau2 - h);
            let d: Vec<f64> = up
                .iter()
                .zip(&um)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect();
            let phi = spec.phi1(&s.x, &s.z, s.tau1, s.tau2);
            let scale = phi.iter().map(|v| v.abs()).fold(1.0, f64::max);
            max_abs_diff(&d, &phi) / scale
        })
        .fold(0.0, f64::max);
    out.push(CheckResult::new("ftc_u1", ftc, 1e-4));

    let gl = GaussLegendre::new(12);
    let n = spec.n1;
    let consistency = samples
        .iter()
        .take(count.min(5))
        .map(|s| {
            let mut integral = vec![0.0; n];
            gl.integrate_vec(
                |t1, buf| buf.copy_from_slice(&avg.h_bar(&s.x, &s.z, t1)),
                0.0,
                spec.t1,
                4,
                &mut integral,
            );
            integral.iter_mut().for_each(|v| *v /= spec.t1);
            max_abs_diff(&integral, &avg.f_bar(&s.x, &s.z))
        })
        .fold(0.0, f64::max);
    out.push(CheckResult::new("h_bar_consistency", consistency, 1e-8));

    if let Some(dec) = &sc.affine {
        let mut affine_err: f64 = 0.0;
        let mut antisym: f64 = 0.0;
        for s in &samples {
            let ca = control_affine_bracket_average(
                &dec.fields,
                &dec.dithers,
                &s.x,
                &s.z,
                s.tau1,
                dec.t2,
                quad,
            )?;
            let mut generic = avg.h_bar(&s.x, &s.z, s.tau1);
            let p2 = mean_phi2(spec, &s.x, &s.z, s.tau1, quad.nodes_tau2);
            generic.iter_mut().zip(p2).for_each(|(g, p)| *g -= p);
            affine_err = affine_err.max(max_abs_diff(&ca, &generic));
            let hh = quad.step_at(&s.x);
            let (a, b) = (&dec.fields[0], &dec.fields[dec.fields.len() - 1]);
            let ab = lie_bracket(
                |x, o| a(x, &s.z, s.tau1, o),
                |x, o| b(x, &s.z, s.tau1, o),
                &s.x,
                hh,
            );
            let ba = lie_bracket(
                |x, o| b(x, &s.z, s.tau1, o),
                |x, o| a(x, &s.z, s.tau1, o),
                &s.x,
                hh,
            );
            antisym = antisym.max(
                ab.iter()
                    .zip(&ba)
                    .map(|(p, q)| (p + q).abs())
                    .fold(0.0, f64::max),
            );
        }
        out.push(CheckResult::new(
            "control_affine_vs_generic",
            affine_err,
            1e-6,
        ));
        out.push(CheckResult::new("bracket_antisymmetry", antisym, 1e-8));
    }

    out.push(average_oracle(sc, quad, count, seed ^ 0x5eed)?);
    Ok(out)
}
