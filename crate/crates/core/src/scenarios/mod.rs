//! Ready-to-simulate closed-loop applications with analytic averages for
//! cross-validation.

pub mod config;
pub mod es_affine;
pub mod sphere;
pub mod sync;
pub mod vehicle;
pub mod verify;

use std::fmt;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{AutomatonConfig, AutomatonError, ScheduleVerdict};
use crate::averaging::{
    build_average_system, AveragedSystem, AveragingError, Dither, InputField, QuadratureConfig,
};
use crate::closeness::IndicatorSpec;
use crate::hybrid::{simulate, HybridArc, HybridSystem, SimError, SolverConfig};
use crate::oscillatory::{OscError, OscillatoryHybrid};
use crate::quadrature::QuadratureError;

pub use config::{parse_epsilon, ConfigError, ScenarioConfig};
pub use es_affine::{build_es_affine, EsAffineParams};
pub use sphere::{build_sphere_es, synergistic_eval, SphereEsParams};
pub use sync::{build_sync, sync_error, SyncParams};
pub use vehicle::{build_vehicle, Coordinates, VehicleParams};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error(transparent)]
    Oscillatory(#[from] OscError),
    #[error(transparent)]
    Averaging(#[from] AveragingError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("frequencies must be pairwise distinct: {0}")]
    FrequencyCollision(String),
    #[error("expected {expected} entries for {what}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("graph {0} is not connected")]
    DisconnectedGraph(usize),
    #[error("synergy gap must lie in (0, 1/4), got {0}")]
    DeltaOutOfRange(f64),
    #[error("point is off the unit sphere: |x| = {0}")]
    OffManifold(f64),
    #[error("input fields fail to excite every direction (min Rayleigh quotient {0})")]
    DegenerateInputs(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Analytic averaged flow `(x, z) ↦ ẋ`.
pub type AnalyticAverage = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
/// Draws a random `(x, z)` from the region where the average is probed.
pub type StateSampler = Arc<dyn Fn(&mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) + Send + Sync>;

/// Smooth cost `J` with its gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostFunction {
    /// `J(x) = ½ Σ wᵢ (xᵢ − cᵢ)²`; empty vectors mean `c = 0`, `w = 1`.
    Quadratic {
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default)]
        weights: Vec<f64>,
    },
}

impl Default for CostFunction {
    fn default() -> Self {
        Self::Quadratic {
            center: Vec::new(),
            weights: Vec::new(),
        }
    }
}

impl CostFunction {
    fn coeffs(&self, i: usize) -> (f64, f64) {
        match self {
            Self::Quadratic { center, weights } => (
                center.get(i).copied().unwrap_or(0.0),
                weights.get(i).copied().unwrap_or(1.0),
            ),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (0..x.len())
            .map(|i| {
                let (c, w) = self.coeffs(i);
                0.5 * w * (x[i] - c) * (x[i] - c)
            })
            .sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let (c, w) = self.coeffs(i);
                w * (x[i] - c)
            })
            .collect()
    }

    /// The minimiser in `ℝⁿ`.
    pub fn minimizer(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.coeffs(i).0).collect()
    }

    pub fn validate(&self, n: usize) -> Result<(), ScenarioError> {
        match self {
            Self::Quadratic { center, weights } => {
                for (what, v) in [("cost center", center), ("cost weights", weights)] {
                    if !v.is_empty() && v.len() != n {
                        return Err(ScenarioError::LengthMismatch {
                            what,
                            expected: n,
                            got: v.len(),
                        });
                    }
                }
                if weights.iter().any(|w| !(*w > 0.0)) {
                    return Err(ScenarioError::InvalidParameter(
                        "cost weights must be positive".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// `φ₁ = Σ_ℓ b_ℓ v_ℓ` with state-dependent fields and pure dithers.
#[derive(Clone)]
pub struct AffineDecomposition {
    pub fields: Vec<InputField>,
    pub dithers: Vec<Dither>,
    pub t2: f64,
}

/// Phase `θ(x, z)` of a cosine dither term.
pub type Phase = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Splits `Σᵢ gᵢ(x, z, τ₁)·cos(wᵢτ₂ + θᵢ(x, z))` into the pairs
/// `gᵢcos θᵢ · cos(wᵢτ₂)` and `−gᵢsin θᵢ · sin(wᵢτ₂)`.
pub fn cosine_decomposition(terms: Vec<(InputField, f64, Phase)>, t2: f64) -> AffineDecomposition {
    let mut fields: Vec<InputField> = Vec::new();
    let mut dithers: Vec<Dither> = Vec::new();
    for (g, w, theta) in terms {
        let (gc, tc) = (g.clone(), theta.clone());
        fields.push(Arc::new(
            move |x: &[f64], z: &[f64], t1, out: &mut [f64]| {
                gc(x, z, t1, out);
                let c = tc(x, z).cos();
                out.iter_mut().for_each(|o| *o *= c);
            },
        ));
        dithers.push(Arc::new(move |_, t2| (w * t2).cos()));
        fields.push(Arc::new(
            move |x: &[f64], z: &[f64], t1, out: &mut [f64]| {
                g(x, z, t1, out);
                let s = -theta(x, z).sin();
                out.iter_mut().for_each(|o| *o *= s);
            },
        ));
        dithers.push(Arc::new(move |_, t2| (w * t2).sin()));
    }
    AffineDecomposition {
        fields,
        dithers,
        t2,
    }
}

/// A built scenario: the original system, how to run it, and what to
/// compare it against.
#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub eps: f64,
    pub system: HybridSystem,
    pub x0: Vec<f64>,
    pub solver: SolverConfig,
    /// Step and horizon for the averaged system, which is not stiff.
    pub average_solver: SolverConfig,
    pub quad: QuadratureConfig,
    pub analytic_average: AnalyticAverage,
    pub indicator: IndicatorSpec,
    /// Components compared by closeness (valid in both state layouts).
    pub closeness_components: Vec<usize>,
    pub verdict: Option<ScheduleVerdict>,
    pub automaton: Option<AutomatonConfig>,
    pub seed: Option<u64>,
    pub sampler: StateSampler,
    pub affine: Option<AffineDecomposition>,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("eps", &self.eps)
            .field("x0", &self.x0)
            .field("solver", &self.solver)
            .field("verdict", &self.verdict)
            .finish_non_exhaustive()
    }
}

impl Scenario {
    pub fn oscillatory(&self) -> Option<&OscillatoryHybrid> {
        self.system.oscillatory.as_deref()
    }

    /// Number of `x` components (flow state before logic and timers).
    pub fn n1(&self) -> usize {
        self.oscillatory().map_or(self.system.dim, |o| o.osc.n1)
    }

    pub fn simulate(&self) -> Result<HybridArc, SimError> {
        simulate(&self.system, &self.x0, &self.solver)
    }

    pub fn averaged(&self) -> Result<AveragedSystem, AveragingError> {
        build_average_system(&self.system, &self.quad)
    }

    pub fn simulate_average(&self) -> Result<HybridArc, ScenarioError> {
        let avg = self.averaged()?;
        let x0 = avg.project_state(&self.x0);
        Ok(simulate(&avg.system, &x0, &self.average_solver)?)
    }

    /// Splits a `θ = (x, z)` state.
    pub fn split_theta<'a>(&self, theta: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        theta.split_at(self.n1())
    }
}

/// Uniform `x ∈ [lo, hi]ⁿ` followed by automaton logic `(z₁, z₂, z₃)`.
pub(crate) fn box_and_logic_sampler(
    n: usize,
    lo: f64,
    hi: f64,
    cfg: AutomatonConfig,
) -> StateSampler {
    use rand::Rng;
    Arc::new(move |rng: &mut ChaCha8Rng| {
        let x = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
        let z = vec![
            rng.gen_range(1..=cfg.modes) as f64,
            rng.gen_range(0.0..=cfg.n0 as f64),
            rng.gen_range(0.0..=cfg.t0),
        ];
        (x, z)
    })
}

/// Initial logic state for the automaton: full budgets in `mode0`.
pub(crate) fn full_logic(mode0: u32, cfg: &AutomatonConfig) -> [f64; 3] {
    [mode0 as f64, cfg.n0 as f64, cfg.t0]
}

/// `x_1 … x_n`.
pub(crate) fn x_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}
