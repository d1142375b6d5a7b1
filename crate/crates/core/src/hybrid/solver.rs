use std::sync::Arc;

use log::{debug, trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::arc::{HybridArc, Segment};
use super::system::{HybridSystem, JumpSelector, Projection};
use crate::linalg::norm;

pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-9;
pub const DEFAULT_ESCAPE_RADIUS: f64 = 1e6;

/// Which transition wins when both flowing and jumping are possible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Priority {
    /// Jump only when the state has left the flow set.
    FlowPriority,
    /// Jump whenever the state is in the jump set.
    #[default]
    JumpPriority,
    /// Jump only at scheduled times (or when flowing is impossible).
    ScheduleDriven,
}

#[derive(Clone)]
pub struct SolverConfig {
    pub step: f64,
    pub t_final: f64,
    pub j_max: usize,
    pub priority: Priority,
    pub state_bound: f64,
    pub projection: Option<Projection>,
    pub membership_tol: f64,
}

impl std::fmt::Debug for SolverConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolverConfig")
            .field("step", &self.step)
            .field("t_final", &self.t_final)
            .field("j_max", &self.j_max)
            .field("priority", &self.priority)
            .field("state_bound", &self.state_bound)
            .field("projection", &self.projection.is_some())
            .field("membership_tol", &self.membership_tol)
            .finish()
    }
}

impl SolverConfig {
    pub fn new(step: f64, t_final: f64) -> Self {
        Self {
            step,
            t_final,
            j_max: 10_000,
            priority: Priority::default(),
            state_bound: DEFAULT_ESCAPE_RADIUS,
            projection: None,
            membership_tol: DEFAULT_MEMBERSHIP_TOL,
        }
    }

    pub fn with_priority(mut self, priority: Priority) -> Self {
        self.priority = priority;
        self
    }

    pub fn with_j_max(mut self, j_max: usize) -> Self {
        self.j_max = j_max;
        self
    }

    pub fn with_projection(mut self, p: impl Fn(&mut [f64]) + Send + Sync + 'static) -> Self {
        self.projection = Some(Arc::new(p));
        self
    }

    /// Largest step resolving the fastest oscillation, `ε²·T₂/64`.
    pub fn oscillatory_step(eps: f64, t2: f64) -> f64 {
        eps * eps * t2 / 64.0
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.step > 0.0) || !(self.t_final > 0.0) || !(self.state_bound > 0.0) {
            return Err(SimError::InvalidConfig(format!("{self:?}")));
        }
        if !(self.membership_tol >= 0.0) {
            return Err(SimError::InvalidConfig(
                "negative membership tolerance".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("state left the ball of radius {bound} at t = {t}")]
    EscapeDetected { t: f64, j: usize, bound: f64 },
    #[error("scheduled jump at t = {time} while the state is outside the jump set")]
    ScheduleInfeasible { time: f64 },
    #[error("state is in neither the flow set nor the jump set at (t, j) = ({t}, {j})")]
    StuckState { t: f64, j: usize },
    #[error("jump map returned no successors at (t, j) = ({t}, {j})")]
    EmptyJumpMap { t: f64, j: usize },
    #[error("initial state has dimension {got}, system has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

/// Classical fixed-step RK4 with projection applied after the step.
fn rk4_step(
    sys: &HybridSystem,
    cfg: &SolverConfig,
    x: &[f64],
    t: f64,
    h: f64,
    k: &mut [Vec<f64>; 4],
    tmp: &mut [f64],
) -> Vec<f64> {
    let f = &sys.flow_field;
    f(x, t, &mut k[0]);
    for (i, v) in tmp.iter_mut().enumerate() {
        *v = x[i] + 0.5 * h * k[0][i];
    }
    f(tmp, t + 0.5 * h, &mut k[1]);
    for (i, v) in tmp.iter_mut().enumerate() {
        *v = x[i] + 0.5 * h * k[1][i];
    }
    f(tmp, t + 0.5 * h, &mut k[2]);
    for (i, v) in tmp.iter_mut().enumerate() {
        *v = x[i] + h * k[2][i];
    }
    f(tmp, t + h, &mut k[3]);
    let mut out: Vec<f64> = (0..x.len())
        .map(|i| x[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]))
        .collect();
    if let Some(p) = &sys.projection {
        p(&mut out);
    }
    if let Some(p) = &cfg.projection {
        p(&mut out);
    }
    out
}

struct Stepper<'a> {
    sys: &'a HybridSystem,
    cfg: &'a SolverConfig,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Stepper<'_> {
    fn step(&mut self, x: &[f64], t: f64, h: f64) -> Vec<f64> {
        rk4_step(self.sys, self.cfg, x, t, h, &mut self.k, &mut self.tmp)
    }
}

/// Integrates a hybrid arc from `x0`.
///
/// Flows use fixed-step RK4. Scheduled jumps are hit exactly by shortening
/// the step; state-triggered jumps follow `cfg.priority`. A step that leaves
/// the flow set is cut back by bisection so the segment ends on the boundary.
pub fn simulate(sys: &HybridSystem, x0: &[f64], cfg: &SolverConfig) -> Result<HybridArc, SimError> {
    cfg.validate()?;
    if x0.len() != sys.dim {
        return Err(SimError::DimensionMismatch {
            expected: sys.dim,
            got: x0.len(),
        });
    }
    let tol = cfg.membership_tol;
    if !sys.in_flow_set(x0, tol) && !sys.in_jump_set(x0, tol) {
        return Err(SimError::StuckState { t: 0.0, j: 0 });
    }
    let mut rng = match sys.selector {
        JumpSelector::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        JumpSelector::First => None,
    };
    let mut stepper = Stepper {
        sys,
        cfg,
        k: std::array::from_fn(|_| vec![0.0; sys.dim]),
        tmp: vec![0.0; sys.dim],
    };
    let mut sched: Vec<_> = sys
        .schedule
        .iter()
        .filter(|s| s.time >= 0.0)
        .copied()
        .collect();
    sched.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut next_event = 0usize;

    let mut arc = HybridArc::new(sys.dim);
    let mut seg = Segment::new(0, 0.0, x0.to_vec());
    let mut x = x0.to_vec();
    let mut t = 0.0_f64;
    let mut j = 0usize;
    let mut exited = false;
    let time_eps = |t: f64| 1e-12 * t.abs().max(1.0);

    loop {
        let scheduled_now = sched
            .get(next_event)
            .is_some_and(|e| e.time <= t + time_eps(t));
        let in_c = sys.in_flow_set(&x, tol);
        let in_d = sys.in_jump_set(&x, tol);
        let (jump, hint) = if scheduled_now {
            if !in_d {
                return Err(SimError::ScheduleInfeasible {
                    time: sched[next_event].time,
                });
            }
            (true, sched[next_event].hint)
        } else {
            let wants = match cfg.priority {
                Priority::JumpPriority => in_d,
                Priority::FlowPriority | Priority::ScheduleDriven => in_d && (!in_c || exited),
            };
            (wants, None)
        };

        if jump {
            if j >= cfg.j_max {
                debug!("j_max = {} reached at t = {t}", cfg.j_max);
                break;
            }
            let successors = (sys.jump_map)(&x);
            if successors.is_empty() {
                return Err(SimError::EmptyJumpMap { t, j });
            }
            let idx = match (hint, rng.as_mut()) {
                (Some(i), _) => i.min(successors.len() - 1),
                (None, Some(r)) => r.gen_range(0..successors.len()),
                (None, None) => 0,
            };
            x = successors.into_iter().nth(idx).expect("index in range");
            if scheduled_now {
                next_event += 1;
            }
            j += 1;
            trace!("jump {j} at t = {t}");
            arc.segments
                .push(std::mem::replace(&mut seg, Segment::new(j, t, x.clone())));
            exited = false;
            continue;
        }
        if !in_c || exited {
            return Err(SimError::StuckState { t, j });
        }
        if t >= cfg.t_final - time_eps(cfg.t_final) {
            break;
        }

        let mut h = cfg.step;
        let mut target = None;
        if cfg.t_final - t <= h + time_eps(cfg.t_final) {
            h = cfg.t_final - t;
            target = Some(cfg.t_final);
        }
        if let Some(e) = sched.get(next_event) {
            if e.time - t <= h + time_eps(e.time) {
                h = e.time - t;
                target = Some(e.time);
            }
        }
        let mut x_new = stepper.step(&x, t, h);
        check_escape(sys, cfg, &x_new, t + h, j)?;
        if !sys.in_flow_set(&x_new, tol) {
            let (hb, xb) = locate_exit(&mut stepper, &x, t, h, tol);
            h = hb;
            x_new = xb;
            exited = true;
        }
        if h <= time_eps(t) {
            // flow is impossible from here; fall through to the jump test
            if exited && !in_d {
                return Err(SimError::StuckState { t, j });
            }
            continue;
        }
        t = match target {
            Some(end) if !exited => end,
            _ => t + h,
        };
        x = x_new;
        seg.push(t, x.clone());
    }
    arc.segments.push(seg);
    Ok(arc)
}

fn check_escape(
    sys: &HybridSystem,
    cfg: &SolverConfig,
    x: &[f64],
    t: f64,
    j: usize,
) -> Result<(), SimError> {
    let bounded = &x[..sys.bounded_dims.min(x.len())];
    if bounded.iter().any(|v| !v.is_finite()) || norm(bounded) > cfg.state_bound {
        return Err(SimError::EscapeDetected {
            t,
            j,
            bound: cfg.state_bound,
        });
    }
    Ok(())
}

/// Bisects the step length so the end point is the last state still in `C`.
fn locate_exit(stepper: &mut Stepper<'_>, x: &[f64], t: f64, h: f64, tol: f64) -> (f64, Vec<f64>) {
    let sys = stepper.sys;
    let (mut lo, mut hi) = (0.0_f64, h);
    let mut best = x.to_vec();
    for _ in 0..60 {
        if hi - lo <= 1e-15 * h.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let xm = stepper.step(x, t, mid);
        if sys.in_flow_set(&xm, tol) {
            lo = mid;
            best = xm;
        } else {
            hi = mid;
        }
    }
    (lo, best)
}
