//! Lie-bracket extremum seeking for control-affine systems under the
//! three-mode automaton.
//!
//! `φ₁ = Σᵢ bᵢ(x, τ₁)√(2wᵢ) cos(wᵢτ₂ + (z₁ − 2)J(x))`; the average is
//! `(2 − z₁)P(x)∇J(x)` with `P` the `τ₁`-mean of `Σᵢ bᵢbᵢᵀ`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use super::{
    box_and_logic_sampler, cosine_decomposition, full_logic, x_labels, CostFunction, Phase,
    Scenario, ScenarioError,
};
use crate::automaton::{automaton_theta_data, check_schedule, AutomatonConfig, SwitchSchedule};
use crate::averaging::{InputField, QuadratureConfig};
use crate::closeness::IndicatorSpec;
use crate::hybrid::{Priority, SolverConfig};
use crate::oscillatory::{OscillatoryFlowSpec, OscillatoryHybrid};
use crate::quadrature::{common_period, uniform_nodes, Rational};

/// Input vector field `b(x, τ₁)` writing a vector of the state dimension.
pub type InputVector = Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub struct EsAffineParams {
    pub eps: f64,
    pub fields: Vec<InputVector>,
    /// Period of the fields in `τ₁`.
    pub t1: f64,
    pub frequencies: Vec<Rational>,
    pub cost: CostFunction,
    pub schedule: SwitchSchedule,
    pub mode0: u32,
    pub automaton: AutomatonConfig,
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub step: Option<f64>,
    pub quad: QuadratureConfig,
}

impl std::fmt::Debug for EsAffineParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EsAffineParams")
            .field("eps", &self.eps)
            .field("fields", &self.fields.len())
            .field("frequencies", &self.frequencies)
            .field("x0", &self.x0)
            .finish_non_exhaustive()
    }
}

impl EsAffineParams {
    /// `bᵢ = eᵢ` in `ℝⁿ` with frequencies `1, 3/2, 5/2, …`.
    pub fn unit_fields(n: usize, eps: f64) -> Self {
        let fields = (0..n)
            .map(|i| {
                let b: InputVector = Arc::new(move |_x: &[f64], _t1, out: &mut [f64]| {
                    out.fill(0.0);
                    out[i] = 1.0;
                });
                b
            })
            .collect();
        let mut x0 = vec![0.0; n];
        x0[0] = 2.0;
        if n > 1 {
            x0[1] = -1.5;
        }
        Self {
            eps,
            fields,
            t1: 2.0 * PI,
            frequencies: default_frequencies(n),
            cost: CostFunction::default(),
            schedule: super::vehicle::nominal_schedule(),
            mode0: 3,
            automaton: AutomatonConfig::three_mode(),
            x0,
            horizon: 30.0,
            step: None,
            quad: QuadratureConfig {
                nodes_tau1: 16,
                nodes_tau2: 64,
                fd_step: 1e-5,
            },
        }
    }
}

/// `1, 3/2, 5/2, 7/2, …`
pub fn default_frequencies(n: usize) -> Vec<Rational> {
    (0..n as u64)
        .map(|i| {
            if i == 0 {
                Rational::integer(1)
            } else {
                Rational::new(2 * i + 1, 2).expect("positive")
            }
        })
        .collect()
}

/// `P(x) = (1/T₁)∫₀^{T₁} Σᵢ bᵢ(x, τ₁)bᵢ(x, τ₁)ᵀ dτ₁`.
pub fn input_gram(fields: &[InputVector], x: &[f64], t1: f64, nodes: usize) -> DMatrix<f64> {
    let n = x.len();
    let mut p = DMatrix::zeros(n, n);
    let mut b = vec![0.0; n];
    let ts = uniform_nodes(nodes, t1);
    for &t in &ts {
        for f in fields {
            f(x, t, &mut b);
            for r in 0..n {
                for c in 0..n {
                    p[(r, c)] += b[r] * b[c];
                }
            }
        }
    }
    p / ts.len() as f64
}

/// Smallest eigenvalue of `P` over the probe points.
pub fn excitation_margin(fields: &[InputVector], probes: &[Vec<f64>], t1: f64) -> f64 {
    probes
        .iter()
        .map(|x| {
            SymmetricEigen::new(input_gram(fields, x, t1, 64))
                .eigenvalues
                .min()
        })
        .fold(f64::INFINITY, f64::min)
}

fn probe_points(n: usize) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; n]];
    for i in 0..n {
        for s in [-2.0, 2.0] {
            let mut p = vec![0.5; n];
            p[i] = s;
            pts.push(p);
        }
    }
    pts
}

pub fn build_es_affine(p: &EsAffineParams) -> Result<Scenario, ScenarioError> {
    let n = p.x0.len();
    let m = p.fields.len();
    if n == 0 {
        return Err(ScenarioError::InvalidParameter("empty state".into()));
    }
    if p.frequencies.len() != m {
        return Err(ScenarioError::LengthMismatch {
            what: "frequencies",
            expected: m,
            got: p.frequencies.len(),
        });
    }
    for (i, a) in p.frequencies.iter().enumerate() {
        if p.frequencies[..i].contains(a) {
            return Err(ScenarioError::FrequencyCollision(a.to_string()));
        }
    }
    if !(p.t1 > 0.0) {
        return Err(ScenarioError::InvalidParameter(
            "field period must be positive".into(),
        ));
    }
    p.cost.validate(n)?;
    let margin = excitation_margin(&p.fields, &probe_points(n), p.t1);
    if !(margin > 1e-9) {
        return Err(ScenarioError::DegenerateInputs(margin));
    }
    let cfg = p.automaton.clone();
    if cfg.modes != 3 {
        return Err(ScenarioError::InvalidParameter(
            "extremum seeking uses three modes".into(),
        ));
    }
    let verdict = check_schedule(&p.schedule, p.mode0, &cfg, p.horizon);
    let data = automaton_theta_data(&cfg, &p.schedule, p.mode0, p.horizon, n, x_labels(n))?;

    let t2 = common_period(&p.frequencies)?;
    let w: Vec<f64> = p.frequencies.iter().map(Rational::value).collect();
    let amp: Vec<f64> = w.iter().map(|wi| (2.0 * wi).sqrt()).collect();

    let (fields, cost, ww, aa) = (p.fields.clone(), p.cost.clone(), w.clone(), amp.clone());
    let phi1 = move |x: &[f64], z: &[f64], t1: f64, t2: f64, out: &mut [f64]| {
        let phase = (z[0] - 2.0) * cost.value(x);
        out.fill(0.0);
        let mut b = vec![0.0; out.len()];
        for (i, f) in fields.iter().enumerate() {
            f(x, t1, &mut b);
            let c = aa[i] * (ww[i] * t2 + phase).cos();
            out.iter_mut().zip(&b).for_each(|(o, bi)| *o += c * bi);
        }
    };
    let osc = OscillatoryFlowSpec::new(n, p.t1, t2, phi1)?;
    let eps = p.eps;
    let system = OscillatoryHybrid::new(data, osc, eps)?.system();

    let terms = p
        .fields
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let (f, a) = (f.clone(), amp[i]);
            let g: InputField = Arc::new(move |x: &[f64], _z: &[f64], t1, out: &mut [f64]| {
                f(x, t1, out);
                out.iter_mut().for_each(|o| *o *= a);
            });
            let cost = p.cost.clone();
            let th: Phase = Arc::new(move |x: &[f64], z: &[f64]| (z[0] - 2.0) * cost.value(x));
            (g, w[i], th)
        })
        .collect();
    let affine = Some(cosine_decomposition(terms, t2));

    let (fields, cost, t1) = (p.fields.clone(), p.cost.clone(), p.t1);
    let analytic = Arc::new(move |x: &[f64], z: &[f64]| {
        let pm = input_gram(&fields, x, t1, 64);
        let g = nalgebra::DVector::from_vec(cost.gradient(x));
        ((2.0 - z[0]) * pm * g).as_slice().to_vec()
    });

    let mut x0 = p.x0.clone();
    x0.extend(full_logic(p.mode0, &cfg));
    x0.extend([0.0, 0.0]);
    let w_max = w.iter().copied().fold(0.0, f64::max);
    let step = p.step.unwrap_or(eps * eps * t2 / (64.0 * w_max));
    let solver = SolverConfig::new(step, p.horizon).with_priority(Priority::ScheduleDriven);
    let average_solver =
        SolverConfig::new(step.max(0.01), p.horizon).with_priority(Priority::ScheduleDriven);
    let mut components: Vec<usize> = (0..n).collect();
    components.push(n);

    Ok(Scenario {
        name: "es_affine".into(),
        eps,
        system,
        x0,
        solver,
        average_solver,
        quad: p.quad,
        analytic_average: analytic,
        indicator: IndicatorSpec::point(p.cost.minimizer(n), (0..n).collect()),
        closeness_components: components,
        verdict: Some(verdict),
        sampler: box_and_logic_sampler(n, -3.0, 3.0, cfg.clone()),
        automaton: Some(cfg),
        seed: None,
        affine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_fields_give_identity_gram() {
        let p = EsAffineParams::unit_fields(3, 0.1);
        let g = input_gram(&p.fields, &[0.3, 0.1, -2.0], p.t1, 32);
        assert!((g - DMatrix::identity(3, 3)).abs().max() < 1e-15);
    }

    #[test]
    fn default_frequencies_are_distinct() {
        let f = default_frequencies(4);
        assert_eq!(f[1], Rational::new(3, 2).unwrap());
        assert_eq!(f[3], Rational::new(7, 2).unwrap());
        assert!((common_period(&f[..2]).unwrap() - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn collision_and_length_errors() {
        let mut p = EsAffineParams::unit_fields(2, 0.1);
        p.frequencies[1] = Rational::integer(1);
        assert!(matches!(
            build_es_affine(&p),
            Err(ScenarioError::FrequencyCollision(_))
        ));
        p.frequencies.pop();
        assert!(matches!(
            build_es_affine(&p),
            Err(ScenarioError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn single_direction_cannot_excite_the_plane() {
        let mut p = EsAffineParams::unit_fields(2, 0.1);
        p.fields.pop();
        p.frequencies.pop();
        assert!(matches!(
            build_es_affine(&p),
            Err(ScenarioError::DegenerateInputs(_))
        ));
    }

    #[test]
    fn rest_mode_has_zero_average() {
        let sc = build_es_affine(&EsAffineParams::unit_fields(2, 0.1)).unwrap();
        assert_eq!(
            (sc.analytic_average)(&[1.0, 2.0], &[2.0, 0.0, 0.0]),
            vec![0.0, 0.0]
        );
        assert_eq!(
            (sc.analytic_average)(&[1.0, 2.0], &[3.0, 0.0, 0.0]),
            vec![-1.0, -2.0]
        );
    }
}
