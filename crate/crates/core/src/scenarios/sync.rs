//! Phase synchronization of `r` oscillators with unknown control directions
//! over switching graphs, in polar coordinates.
//!
//! `ξ̇ᵢ = 1 + αᵢ ε⁻¹√(2wᵢ) cos(wᵢτ₂ + Jᵢ(ξ))` with
//! `Jᵢ = Σ_{j∈Nᵢ} (1 − cos(ξᵢ − ξⱼ))`. The average is the Kuramoto flow
//! `1 − Σ_{j∈Nᵢ} sin(ξᵢ − ξⱼ)` whatever the directions `α`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use petgraph::algo::connected_components;
use petgraph::graph::UnGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{cosine_decomposition, Phase, Scenario, ScenarioError, StateSampler};
use crate::automaton::{automaton_theta_data, check_schedule, AutomatonConfig, SwitchSchedule};
use crate::averaging::{InputField, QuadratureConfig};
use crate::closeness::IndicatorSpec;
use crate::hybrid::{Priority, SolverConfig};
use crate::oscillatory::{OscillatoryFlowSpec, OscillatoryHybrid};
use crate::quadrature::{common_period, Rational};

/// Undirected edges on nodes `0..r`.
pub type EdgeSet = Vec<(usize, usize)>;

#[derive(Debug, Clone)]
pub struct SyncParams {
    pub eps: f64,
    pub graphs: Vec<EdgeSet>,
    pub directions: Vec<Vec<f64>>,
    pub frequencies: Vec<Rational>,
    pub schedule: SwitchSchedule,
    pub mode0: u32,
    pub automaton: AutomatonConfig,
    pub xi0: Vec<f64>,
    pub horizon: f64,
    /// Overrides the default step `ε²T₂/(64·max wᵢ)`.
    pub step: Option<f64>,
    pub quad: QuadratureConfig,
}

impl SyncParams {
    /// Two oscillators, one edge, four direction modes with
    /// `ϱ(1) = (1, (+1, +1))`, `ϱ(2) = (1, (−1, +1))`, `ϱ(3) = (1, (+1, −1))`,
    /// `ϱ(4) = (1, (−1, −1))`.
    pub fn two_oscillators(eps: f64, seed: u64) -> Self {
        let directions = vec![
            vec![1.0, 1.0],
            vec![-1.0, 1.0],
            vec![1.0, -1.0],
            vec![-1.0, -1.0],
        ];
        Self::with_layout(eps, vec![vec![(0, 1)]], directions, seed)
    }

    /// Four oscillators switching among a path, a star and a cycle, with
    /// four direction patterns (twelve modes).
    pub fn four_oscillators(eps: f64, seed: u64) -> Self {
        let graphs = vec![
            vec![(0, 1), (1, 2), (2, 3)],
            vec![(0, 1), (0, 2), (0, 3)],
            vec![(0, 1), (1, 2), (2, 3), (3, 0)],
        ];
        let directions = vec![
            vec![1.0, 1.0, -1.0, 1.0],
            vec![-1.0, 1.0, 1.0, 1.0],
            vec![-1.0, 1.0, -1.0, -1.0],
            vec![-1.0, -1.0, 1.0, 1.0],
        ];
        Self::with_layout(eps, graphs, directions, seed)
    }

    fn with_layout(eps: f64, graphs: Vec<EdgeSet>, directions: Vec<Vec<f64>>, seed: u64) -> Self {
        let r = directions[0].len();
        let modes = (graphs.len() * directions.len()) as u32;
        let horizon = 20.0;
        Self {
            eps,
            graphs,
            directions,
            frequencies: (0..r as u64).map(|i| Rational::integer(10 + i)).collect(),
            schedule: cyclic_schedule(modes, 1, 2.0, horizon),
            mode0: 1,
            automaton: AutomatonConfig::all_stable(modes, 1.0, 2),
            xi0: random_phases(r, seed),
            horizon,
            step: None,
            quad: QuadratureConfig {
                nodes_tau1: 16,
                nodes_tau2: 64,
                fd_step: 1e-5,
            },
        }
    }

    pub fn oscillators(&self) -> usize {
        self.xi0.len()
    }

    /// `ϱ(z₁) = (graph index, direction index)`, both zero-based.
    pub fn mode_layout(&self, z1: u32) -> (usize, usize) {
        let m = (z1 - 1) as usize;
        (m / self.directions.len(), m % self.directions.len())
    }
}

/// `mode0 → mode0+1 → … → modes → 1 → …`, one switch every `period`.
pub fn cyclic_schedule(modes: u32, mode0: u32, period: f64, horizon: f64) -> SwitchSchedule {
    let mut entries = Vec::new();
    let mut mode = mode0;
    let mut t = period;
    while t < horizon {
        mode = mode % modes + 1;
        entries.push((t, mode));
        t += period;
    }
    SwitchSchedule::new(entries)
}

/// Seeded phases drawn uniformly from `[0, π)`.
pub fn random_phases(r: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..r).map(|_| rng.gen_range(0.0..PI)).collect()
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Largest pairwise angular distance, a proper indicator of `ξ₁ = ⋯ = ξᵣ`.
pub fn sync_error(xi: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..xi.len() {
        for j in 0..i {
            worst = worst.max(angle_gap(xi[i], xi[j]));
        }
    }
    worst
}

fn neighbours(r: usize, edges: &EdgeSet, index: usize) -> Result<Vec<Vec<usize>>, ScenarioError> {
    let mut g = UnGraph::<(), ()>::with_capacity(r, edges.len());
    let nodes: Vec<_> = (0..r).map(|_| g.add_node(())).collect();
    let mut nb = vec![Vec::new(); r];
    for &(a, b) in edges {
        if a >= r || b >= r || a == b {
            return Err(ScenarioError::InvalidParameter(format!(
                "bad edge ({a}, {b}) in graph {}",
                index + 1
            )));
        }
        g.add_edge(nodes[a], nodes[b], ());
        if !nb[a].contains(&b) {
            nb[a].push(b);
            nb[b].push(a);
        }
    }
    if connected_components(&g) != 1 {
        return Err(ScenarioError::DisconnectedGraph(index + 1));
    }
    Ok(nb)
}

type Layout = Arc<Vec<(Vec<Vec<usize>>, Vec<f64>)>>;

fn layout_for<'a>(z: &[f64], modes: &'a Layout) -> &'a (Vec<Vec<usize>>, Vec<f64>) {
    &modes[(z[0].round() as usize).clamp(1, modes.len()) - 1]
}

fn disagreement(xi: &[f64], nb: &[usize], i: usize) -> f64 {
    nb.iter().map(|&j| 1.0 - (xi[i] - xi[j]).cos()).sum()
}

pub fn build_sync(p: &SyncParams) -> Result<Scenario, ScenarioError> {
    let r = p.oscillators();
    if r < 2 {
        return Err(ScenarioError::InvalidParameter(
            "need at least two oscillators".into(),
        ));
    }
    if p.frequencies.len() != r {
        return Err(ScenarioError::LengthMismatch {
            what: "frequencies",
            expected: r,
            got: p.frequencies.len(),
        });
    }
    for (i, a) in p.frequencies.iter().enumerate() {
        if p.frequencies[..i].contains(a) {
            return Err(ScenarioError::FrequencyCollision(a.to_string()));
        }
    }
    if p.graphs.is_empty() || p.directions.is_empty() {
        return Err(ScenarioError::InvalidParameter(
            "need at least one graph and one direction".into(),
        ));
    }
    let mut modes = Vec::new();
    let nbs = p
        .graphs
        .iter()
        .enumerate()
        .map(|(k, e)| neighbours(r, e, k))
        .collect::<Result<Vec<_>, _>>()?;
    for nb in &nbs {
        for alpha in &p.directions {
            if alpha.len() != r {
                return Err(ScenarioError::LengthMismatch {
                    what: "direction vector",
                    expected: r,
                    got: alpha.len(),
                });
            }
            if alpha.iter().any(|a| a.abs() != 1.0) {
                return Err(ScenarioError::InvalidParameter(
                    "directions must be ±1".into(),
                ));
            }
            modes.push((nb.clone(), alpha.clone()));
        }
    }
    let cfg = p.automaton.clone();
    if cfg.modes as usize != modes.len() {
        return Err(ScenarioError::LengthMismatch {
            what: "automaton modes (graphs × directions)",
            expected: modes.len(),
            got: cfg.modes as usize,
        });
    }
    let modes: Layout = Arc::new(modes);
    let verdict = check_schedule(&p.schedule, p.mode0, &cfg, p.horizon);
    let labels = (1..=r).map(|i| format!("xi{i}")).collect();
    let data = automaton_theta_data(&cfg, &p.schedule, p.mode0, p.horizon, r, labels)?;

    let t2 = common_period(&p.frequencies)?;
    let w: Vec<f64> = p.frequencies.iter().map(Rational::value).collect();
    let amp: Vec<f64> = w.iter().map(|wi| (2.0 * wi).sqrt()).collect();

    let (m, ww, aa) = (modes.clone(), w.clone(), amp.clone());
    let phi1 = move |x: &[f64], z: &[f64], _t1: f64, t2: f64, out: &mut [f64]| {
        let (nb, alpha) = layout_for(z, &m);
        for i in 0..out.len() {
            out[i] = alpha[i] * aa[i] * (ww[i] * t2 + disagreement(x, &nb[i], i)).cos();
        }
    };
    let (m, ww, aa) = (modes.clone(), w.clone(), amp.clone());
    let jac = move |x: &[f64], z: &[f64], _t1: f64, t2: f64| {
        let (nb, alpha) = layout_for(z, &m);
        let n = x.len();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            let s = -alpha[i] * aa[i] * (ww[i] * t2 + disagreement(x, &nb[i], i)).sin();
            for &j in &nb[i] {
                let d = (x[i] - x[j]).sin();
                out[(i, i)] += s * d;
                out[(i, j)] -= s * d;
            }
        }
        out
    };
    let osc = OscillatoryFlowSpec::new(r, t2, t2, phi1)?
        .with_phi2(|_, _, _, _, out: &mut [f64]| out.fill(1.0))
        .with_jacobian(jac);
    let eps = p.eps;
    let system = OscillatoryHybrid::new(data, osc, eps)?.system();

    let terms = (0..r)
        .map(|i| {
            let (m1, m2, a) = (modes.clone(), modes.clone(), amp[i]);
            let g: InputField = Arc::new(move |_x: &[f64], z: &[f64], _t1, out: &mut [f64]| {
                out.fill(0.0);
                out[i] = layout_for(z, &m1).1[i] * a;
            });
            let th: Phase =
                Arc::new(move |x: &[f64], z: &[f64]| disagreement(x, &layout_for(z, &m2).0[i], i));
            (g, w[i], th)
        })
        .collect();
    let affine = Some(cosine_decomposition(terms, t2));

    let m = modes.clone();
    let analytic = Arc::new(move |x: &[f64], z: &[f64]| {
        let (nb, _) = layout_for(z, &m);
        (0..x.len())
            .map(|i| 1.0 - nb[i].iter().map(|&j| (x[i] - x[j]).sin()).sum::<f64>())
            .collect()
    });

    let mut x0 = p.xi0.clone();
    x0.extend(super::full_logic(p.mode0, &cfg));
    x0.extend([0.0, 0.0]);
    let w_max = w.iter().copied().fold(0.0, f64::max);
    let step = p.step.unwrap_or(eps * eps * t2 / (64.0 * w_max));
    let solver = SolverConfig::new(step, p.horizon).with_priority(Priority::ScheduleDriven);
    let average_solver =
        SolverConfig::new(step.max(0.01), p.horizon).with_priority(Priority::ScheduleDriven);
    let nmodes = cfg.modes;
    let n0 = cfg.n0 as f64;
    let sampler: StateSampler = Arc::new(move |rng: &mut ChaCha8Rng| {
        let x = (0..r).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        let z = vec![
            rng.gen_range(1..=nmodes) as f64,
            rng.gen_range(0.0..=n0),
            0.0,
        ];
        (x, z)
    });
    let mut components: Vec<usize> = (0..r).collect();
    components.push(r);

    Ok(Scenario {
        name: "sync".into(),
        eps,
        system,
        x0,
        solver,
        average_solver,
        quad: p.quad,
        analytic_average: analytic,
        indicator: IndicatorSpec::Distance(Arc::new(move |s: &[f64]| sync_error(&s[..r]))),
        closeness_components: components,
        verdict: Some(verdict),
        automaton: Some(cfg),
        seed: None,
        sampler,
        affine,
    })
}
