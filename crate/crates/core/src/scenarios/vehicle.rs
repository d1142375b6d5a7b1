//! Source-seeking unicycle under intermittent sensing and spoofing.
//!
//! Modes: `z₁ = 3` nominal, `z₁ = 2` no measurement, `z₁ = 1` spoofed. The
//! probing phase is `τ₂ + (z₁ − 2)·J(x_p)`, so the averaged position flow is
//! `(a²|x̃|²/4)(2 − z₁)∇J`: descent, rest and ascent respectively.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    cosine_decomposition, full_logic, CostFunction, Phase, Scenario, ScenarioError, StateSampler,
};
use crate::automaton::{automaton_theta_data, check_schedule, AutomatonConfig, SwitchSchedule};
use crate::averaging::{InputField, QuadratureConfig};
use crate::closeness::IndicatorSpec;
use crate::hybrid::{Priority, SolverConfig};
use crate::oscillatory::{OscillatoryFlowSpec, OscillatoryHybrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinates {
    /// Heading `(x₃, x₄)` rotates at rate `ε⁻¹`.
    Raw,
    /// Heading expressed through `A(τ₁)x̃` with `x̃` constant.
    #[default]
    Rotated,
}

#[derive(Debug, Clone)]
pub struct VehicleParams {
    pub eps: f64,
    pub cost: CostFunction,
    pub schedule: SwitchSchedule,
    pub mode0: u32,
    pub automaton: AutomatonConfig,
    pub coordinates: Coordinates,
    /// Probing amplitude `a`.
    pub amplitude: f64,
    pub position: [f64; 2],
    pub heading: [f64; 2],
    pub horizon: f64,
    /// Overrides the default step `ε²T₂/64`.
    pub step: Option<f64>,
    pub quad: QuadratureConfig,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            eps: 1.0 / (10.0 * PI).sqrt(),
            cost: CostFunction::default(),
            schedule: nominal_schedule(),
            mode0: 3,
            automaton: AutomatonConfig::three_mode(),
            coordinates: Coordinates::Rotated,
            amplitude: SQRT_2,
            position: [-4.0, 4.0],
            heading: [1.0, 0.0],
            horizon: 30.0,
            step: None,
            quad: QuadratureConfig {
                nodes_tau1: 16,
                nodes_tau2: 32,
                fd_step: 1e-5,
            },
        }
    }
}

/// Mostly nominal operation with short blackouts and two spoofing bursts.
pub fn nominal_schedule() -> SwitchSchedule {
    SwitchSchedule::new([
        (3.0, 2),
        (4.0, 3),
        (8.0, 1),
        (9.0, 3),
        (14.0, 2),
        (15.5, 3),
        (20.0, 1),
        (20.8, 3),
        (25.0, 2),
        (26.0, 3),
    ])
}

/// Spoofed for 0.8 s out of every second, starting in mode 1.
pub fn aggressive_schedule(horizon: f64) -> SwitchSchedule {
    let mut entries = Vec::new();
    let mut k = 0.0;
    while k + 1.0 < horizon {
        entries.push((k + 0.8, 3));
        entries.push((k + 1.0, 1));
        k += 1.0;
    }
    if k + 0.8 < horizon {
        entries.push((k + 0.8, 3));
    }
    SwitchSchedule::new(entries)
}

/// Budget loose enough to admit [`aggressive_schedule`].
pub fn relaxed_automaton() -> AutomatonConfig {
    AutomatonConfig {
        eta1: 2.0,
        eta2: 0.9,
        n0: 3,
        t0: 3.0,
        ..AutomatonConfig::three_mode()
    }
}

fn rot(t1: f64, h: &[f64]) -> [f64; 2] {
    let (s, c) = t1.sin_cos();
    [c * h[0] + s * h[1], -s * h[0] + c * h[1]]
}

pub fn build_vehicle(p: &VehicleParams) -> Result<Scenario, ScenarioError> {
    if !(p.amplitude > 0.0) {
        return Err(ScenarioError::InvalidParameter(
            "amplitude must be positive".into(),
        ));
    }
    p.cost.validate(2)?;
    let cfg = p.automaton.clone();
    if cfg.modes != 3 {
        return Err(ScenarioError::InvalidParameter(
            "the vehicle has exactly three modes".into(),
        ));
    }
    let verdict = check_schedule(&p.schedule, p.mode0, &cfg, p.horizon);
    let labels = vec!["x1".into(), "x2".into(), "x3".into(), "x4".into()];
    let data = automaton_theta_data(&cfg, &p.schedule, p.mode0, p.horizon, 4, labels)?;
    let a = p.amplitude;
    let tp = 2.0 * PI;

    let cost = p.cost.clone();
    let phi1 = move |x: &[f64], z: &[f64], t1: f64, t2: f64, out: &mut [f64]| {
        let u = (t2 + (z[0] - 2.0) * cost.value(&x[..2])).cos();
        let v = rot(t1, &x[2..4]);
        out[0] = a * v[0] * u;
        out[1] = a * v[1] * u;
        out[2] = 0.0;
        out[3] = 0.0;
    };
    let cost = p.cost.clone();
    let jac = move |x: &[f64], z: &[f64], t1: f64, t2: f64| {
        let k = z[0] - 2.0;
        let arg = t2 + k * cost.value(&x[..2]);
        let (s, c) = arg.sin_cos();
        let g = cost.gradient(&x[..2]);
        let v = rot(t1, &x[2..4]);
        let (st, ct) = t1.sin_cos();
        let rows = [[ct, st], [-st, ct]];
        let mut m = DMatrix::zeros(4, 4);
        for r in 0..2 {
            for q in 0..2 {
                m[(r, q)] = -a * v[r] * s * k * g[q];
                m[(r, 2 + q)] = a * c * rows[r][q];
            }
        }
        m
    };

    let eps = p.eps;
    let osc = match p.coordinates {
        Coordinates::Rotated => OscillatoryFlowSpec::new(4, tp, tp, phi1)?.with_jacobian(jac),
        Coordinates::Raw => {
            let cost = p.cost.clone();
            OscillatoryFlowSpec::new(
                4,
                tp,
                tp,
                move |x: &[f64], z: &[f64], _t1, t2, out: &mut [f64]| {
                    let u = (t2 + (z[0] - 2.0) * cost.value(&x[..2])).cos();
                    out[0] = a * x[2] * u;
                    out[1] = a * x[3] * u;
                    out[2] = x[3];
                    out[3] = -x[2];
                },
            )?
        }
    };
    let hybrid = OscillatoryHybrid::new(data, osc, eps)?;
    let mut system = hybrid.system();
    let affine = match p.coordinates {
        Coordinates::Rotated => {
            let g: InputField = Arc::new(move |x: &[f64], _z: &[f64], t1, out: &mut [f64]| {
                let v = rot(t1, &x[2..4]);
                out[0] = a * v[0];
                out[1] = a * v[1];
                out[2] = 0.0;
                out[3] = 0.0;
            });
            let cost = p.cost.clone();
            let theta: Phase =
                Arc::new(move |x: &[f64], z: &[f64]| (z[0] - 2.0) * cost.value(&x[..2]));
            Some(cosine_decomposition(vec![(g, 1.0, theta)], tp))
        }
        Coordinates::Raw => {
            // the raw heading rows have nonzero fast mean, so the averaging
            // hypotheses fail in these coordinates
            system.oscillatory = None;
            None
        }
    };

    let cost = p.cost.clone();
    let analytic = Arc::new(move |x: &[f64], z: &[f64]| {
        let gain = a * a * (x[2] * x[2] + x[3] * x[3]) / 4.0 * (2.0 - z[0]);
        let g = cost.gradient(&x[..2]);
        vec![gain * g[0], gain * g[1], 0.0, 0.0]
    });

    let mut x0 = vec![p.position[0], p.position[1], p.heading[0], p.heading[1]];
    x0.extend(full_logic(p.mode0, &cfg));
    x0.extend([0.0, 0.0]);

    let step = p
        .step
        .unwrap_or_else(|| SolverConfig::oscillatory_step(eps, tp));
    let solver = SolverConfig::new(step, p.horizon).with_priority(Priority::ScheduleDriven);
    let average_solver =
        SolverConfig::new(step.max(0.01), p.horizon).with_priority(Priority::ScheduleDriven);
    let target = p.cost.minimizer(2);
    let sampler_cfg = cfg.clone();
    let sampler: StateSampler = Arc::new(move |rng: &mut ChaCha8Rng| {
        let ang: f64 = rng.gen_range(0.0..2.0 * PI);
        let x = vec![
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            ang.cos(),
            ang.sin(),
        ];
        let z = vec![
            rng.gen_range(1..=3) as f64,
            rng.gen_range(0.0..=sampler_cfg.n0 as f64),
            rng.gen_range(0.0..=sampler_cfg.t0),
        ];
        (x, z)
    });

    Ok(Scenario {
        name: "vehicle".into(),
        eps,
        system,
        x0,
        solver,
        average_solver,
        quad: p.quad,
        analytic_average: analytic,
        indicator: IndicatorSpec::point(target, vec![0, 1]),
        closeness_components: vec![0, 1, 4],
        verdict: Some(verdict),
        automaton: Some(cfg),
        seed: None,
        sampler,
        affine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::AutomatonError;
    use crate::averaging::jacobian_fd_x;

    #[test]
    fn analytic_jacobian_matches_differences() {
        let sc = build_vehicle(&VehicleParams::default()).unwrap();
        let spec = &sc.oscillatory().unwrap().osc;
        let jac = spec.jac_phi1_x.as_ref().unwrap();
        for (x, z, t1, t2) in [
            ([1.0, -2.0, 0.6, 0.8], [3.0], 0.3, 1.1),
            ([-3.0, 0.5, -1.0, 0.2], [1.0], 2.0, 5.0),
        ] {
            let a = jac(&x, &z, t1, t2);
            let b = jacobian_fd_x(spec, &x, &z, t1, t2, 1e-6);
            assert!((a - b).abs().max() < 1e-6);
        }
    }

    #[test]
    fn schedules_meet_their_budgets() {
        let three = AutomatonConfig::three_mode();
        assert!(check_schedule(&nominal_schedule(), 3, &three, 30.0).ok());
        let aggressive = aggressive_schedule(4.0);
        assert!(!check_schedule(&aggressive, 1, &three, 4.0).ok());
        assert!(check_schedule(&aggressive, 1, &relaxed_automaton(), 4.0).ok());
        assert_eq!(aggressive.entries.last().unwrap().time, 3.8);
    }

    #[test]
    fn default_budget_refuses_the_aggressive_schedule() {
        let p = VehicleParams {
            schedule: aggressive_schedule(4.0),
            mode0: 1,
            horizon: 4.0,
            ..VehicleParams::default()
        };
        assert!(matches!(
            build_vehicle(&p),
            Err(ScenarioError::Automaton(AutomatonError::ScheduleRejected(
                _
            )))
        ));
    }

    #[test]
    fn initial_state_layout() {
        let sc = build_vehicle(&VehicleParams::default()).unwrap();
        assert_eq!(sc.x0, vec![-4.0, 4.0, 1.0, 0.0, 3.0, 2.0, 2.0, 0.0, 0.0]);
        assert_eq!(sc.system.labels[4], "z1");
        assert_eq!(sc.system.dim, 9);
    }
}
