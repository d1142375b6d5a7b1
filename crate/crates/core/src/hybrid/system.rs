use std::fmt;
use std::sync::Arc;

use crate::oscillatory::OscillatoryHybrid;

/// Set membership with slack: `contains(x, tol)`.
pub type Membership = Arc<dyn Fn(&[f64], f64) -> bool + Send + Sync>;
/// A selection of the flow map: `(state, t, out)`.
pub type FlowField = Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;
/// A finite selection set of the jump map.
pub type JumpMap = Arc<dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync>;
/// In-place retraction applied after every integration step.
/// Flow of the logic variables `z`.
pub type LogicFlow = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type Projection = Arc<dyn Fn(&mut [f64]) + Send + Sync>;
/// Field on `(x, z, τ₁, τ₂)` writing `ẋ`.
pub type TimedField = Arc<dyn Fn(&[f64], &[f64], f64, f64, &mut [f64]) + Send + Sync>;
/// Field on `(x, z)` writing `ẋ`.
pub type PlainField = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Which successor of a set-valued jump is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JumpSelector {
    #[default]
    First,
    Seeded(u64),
}

/// A forced jump at `time`; `hint` indexes the successor list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledJump {
    pub time: f64,
    pub hint: Option<usize>,
}

pub fn always(_: &[f64], _: f64) -> bool {
    true
}

pub fn never(_: &[f64], _: f64) -> bool {
    false
}

/// Executable hybrid data `(C, F, D, G)` plus selection policies.
#[derive(Clone)]
pub struct HybridSystem {
    pub dim: usize,
    pub flow_set: Membership,
    pub flow_field: FlowField,
    pub jump_set: Membership,
    pub jump_map: JumpMap,
    pub selector: JumpSelector,
    pub schedule: Vec<ScheduledJump>,
    /// Model-intrinsic retraction (manifold renormalisation, timer clamps).
    pub projection: Option<Projection>,
    /// Leading components checked against the escape radius; trailing
    /// timers grow without bound by construction and are excluded.
    pub bounded_dims: usize,
    pub labels: Vec<String>,
    /// Present when the flow has the two-timescale oscillatory structure.
    pub oscillatory: Option<Arc<OscillatoryHybrid>>,
}

impl fmt::Debug for HybridSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HybridSystem")
            .field("dim", &self.dim)
            .field("labels", &self.labels)
            .field("schedule", &self.schedule)
            .field("selector", &self.selector)
            .finish_non_exhaustive()
    }
}

impl HybridSystem {
    /// A pure flow `ẋ = field(x, t)` on `C = ℝⁿ` with `D = ∅`.
    pub fn continuous(
        dim: usize,
        field: impl Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            flow_set: Arc::new(always),
            flow_field: Arc::new(field),
            jump_set: Arc::new(never),
            jump_map: Arc::new(|x: &[f64]| vec![x.to_vec()]),
            selector: JumpSelector::First,
            schedule: Vec::new(),
            projection: None,
            bounded_dims: dim,
            labels: default_labels(dim),
            oscillatory: None,
        }
    }

    pub fn with_jumps(
        mut self,
        jump_set: impl Fn(&[f64], f64) -> bool + Send + Sync + 'static,
        jump_map: impl Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.jump_set = Arc::new(jump_set);
        self.jump_map = Arc::new(jump_map);
        self
    }

    pub fn with_flow_set(
        mut self,
        c: impl Fn(&[f64], f64) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.flow_set = Arc::new(c);
        self
    }

    pub fn with_schedule(mut self, times: &[f64]) -> Self {
        self.schedule = times
            .iter()
            .map(|&time| ScheduledJump { time, hint: None })
            .collect();
        self
    }

    pub fn with_projection(mut self, p: impl Fn(&mut [f64]) + Send + Sync + 'static) -> Self {
        self.projection = Some(Arc::new(p));
        self
    }

    pub fn with_selector(mut self, selector: JumpSelector) -> Self {
        self.selector = selector;
        self
    }

    pub fn in_flow_set(&self, x: &[f64], tol: f64) -> bool {
        (self.flow_set)(x, tol)
    }

    pub fn in_jump_set(&self, x: &[f64], tol: f64) -> bool {
        (self.jump_set)(x, tol)
    }

    pub fn eval_flow(&self, x: &[f64], t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        (self.flow_field)(x, t, &mut out);
        out
    }
}

pub fn default_labels(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x_{i}")).collect()
}

/// Hybrid data posed on `θ = (x, z)` before fast timers are attached.
///
/// Sets and jump map act on `θ`; `z_flow` is the selection of `Φ(z)`.
#[derive(Clone)]
pub struct ThetaData {
    pub n1: usize,
    pub n2: usize,
    pub flow_set: Membership,
    pub jump_set: Membership,
    pub jump_map: JumpMap,
    pub z_flow: LogicFlow,
    pub selector: JumpSelector,
    pub schedule: Vec<ScheduledJump>,
    pub projection: Option<Projection>,
    pub labels: Vec<String>,
}

impl fmt::Debug for ThetaData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ThetaData")
            .field("n1", &self.n1)
            .field("n2", &self.n2)
            .field("labels", &self.labels)
            .finish_non_exhaustive()
    }
}

impl ThetaData {
    pub fn theta_dim(&self) -> usize {
        self.n1 + self.n2
    }

    /// Attaches `τ₁, τ₂` with `τ̇₁ = ε⁻¹`, `τ̇₂ = ε⁻²`, `τ⁺ = τ`, and flows
    /// `x` under `fast(x, z, τ₁, τ₂)`.
    pub fn with_timers(&self, fast: TimedField, eps: f64) -> HybridSystem {
        let (n1, n2) = (self.n1, self.n2);
        let nt = n1 + n2;
        let z_flow = self.z_flow.clone();
        let flow_field: FlowField = Arc::new(move |s: &[f64], _t: f64, out: &mut [f64]| {
            let (x, rest) = s.split_at(n1);
            let z = &rest[..n2];
            fast(x, z, s[nt], s[nt + 1], &mut out[..n1]);
            z_flow(&s[..nt], &mut out[n1..nt]);
            out[nt] = 1.0 / eps;
            out[nt + 1] = 1.0 / (eps * eps);
        });
        let c = self.flow_set.clone();
        let d = self.jump_set.clone();
        let g = self.jump_map.clone();
        let jump_map: JumpMap = Arc::new(move |s: &[f64]| {
            g(&s[..nt])
                .into_iter()
                .map(|mut th| {
                    th.extend_from_slice(&s[nt..]);
                    th
                })
                .collect()
        });
        let projection = self.projection.clone().map(|p| {
            let p: Projection = Arc::new(move |s: &mut [f64]| p(&mut s[..nt]));
            p
        });
        let mut labels = self.labels.clone();
        labels.push("tau1".into());
        labels.push("tau2".into());
        HybridSystem {
            dim: nt + 2,
            flow_set: Arc::new(move |s: &[f64], tol| c(&s[..nt], tol)),
            flow_field,
            jump_set: Arc::new(move |s: &[f64], tol| d(&s[..nt], tol)),
            jump_map,
            selector: self.selector,
            schedule: self.schedule.clone(),
            projection,
            bounded_dims: nt,
            labels,
            oscillatory: None,
        }
    }

    /// Timer-free system flowing `x` under `field(x, z)`.
    pub fn without_timers(&self, field: PlainField) -> HybridSystem {
        let (n1, n2) = (self.n1, self.n2);
        let nt = n1 + n2;
        let z_flow = self.z_flow.clone();
        let flow_field: FlowField = Arc::new(move |s: &[f64], _t: f64, out: &mut [f64]| {
            field(&s[..n1], &s[n1..nt], &mut out[..n1]);
            z_flow(s, &mut out[n1..nt]);
        });
        HybridSystem {
            dim: nt,
            flow_set: self.flow_set.clone(),
            flow_field,
            jump_set: self.jump_set.clone(),
            jump_map: self.jump_map.clone(),
            selector: self.selector,
            schedule: self.schedule.clone(),
            projection: self.projection.clone(),
            bounded_dims: nt,
            labels: self.labels.clone(),
            oscillatory: None,
        }
    }
}
