use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// A point `(t, j)` of a hybrid time domain.
///
/// Points are ordered by hybrid time `t + j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridTimePoint {
    pub t: f64,
    pub j: usize,
}

impl HybridTimePoint {
    pub fn new(t: f64, j: usize) -> Self {
        debug_assert!(t >= 0.0);
        Self { t, j }
    }

    pub fn hybrid_time(&self) -> f64 {
        self.t + self.j as f64
    }
}

impl PartialOrd for HybridTimePoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.hybrid_time().partial_cmp(&other.hybrid_time())
    }
}

/// The samples of a hybrid arc on one jump interval `I_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub j: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Segment {
    pub fn new(j: usize, t: f64, x: Vec<f64>) -> Self {
        Self {
            j,
            times: vec![t],
            states: vec![x],
        }
    }

    pub fn push(&mut self, t: f64, x: Vec<f64>) {
        self.times.push(t);
        self.states.push(x);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("segment has samples")
    }

    pub fn first_state(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("segment has samples")
    }

    /// True when `I_j` has nonempty interior.
    pub fn flows(&self) -> bool {
        self.len() > 1 && self.end() > self.start()
    }

    /// Piecewise-linear interpolation at `t ∈ [start, end]` (clamped).
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let n = self.len();
        if n == 1 || t <= self.times[0] {
            return self.states[0].clone();
        }
        if t >= self.end() {
            return self.states[n - 1].clone();
        }
        let k = self.times.partition_point(|&s| s <= t).max(1) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        self.states[k]
            .iter()
            .zip(&self.states[k + 1])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }
}

/// A hybrid arc sampled on a hybrid time domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridArc {
    pub dim: usize,
    pub segments: Vec<Segment>,
}

impl HybridArc {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            segments: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn jumps(&self) -> usize {
        self.segments.len().saturating_sub(1)
    }

    pub fn segment(&self, j: usize) -> Option<&Segment> {
        self.segments.get(j)
    }

    pub fn initial_state(&self) -> Option<&[f64]> {
        self.segments.first().map(|s| s.first_state())
    }

    pub fn final_state(&self) -> Option<&[f64]> {
        self.segments.last().map(|s| s.last_state())
    }

    pub fn final_point(&self) -> Option<HybridTimePoint> {
        self.segments
            .last()
            .map(|s| HybridTimePoint::new(s.end(), s.j))
    }

    pub fn sample_count(&self) -> usize {
        self.segments.iter().map(Segment::len).sum()
    }

    /// Iterates `((t, j), state)` in domain order.
    pub fn samples(&self) -> impl Iterator<Item = (HybridTimePoint, &[f64])> + '_ {
        self.segments.iter().flat_map(|s| {
            s.times
                .iter()
                .zip(&s.states)
                .map(move |(&t, x)| (HybridTimePoint::new(t, s.j), x.as_slice()))
        })
    }

    /// Times of the jumps, in order.
    pub fn jump_times(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(Segment::start).collect()
    }

    /// Checks the structural invariants of a hybrid arc.
    pub fn check_structure(&self) -> Result<(), String> {
        for (k, s) in self.segments.iter().enumerate() {
            if s.j != k {
                return Err(format!("segment {k} carries j = {}", s.j));
            }
            if s.is_empty() || s.times.len() != s.states.len() {
                return Err(format!("segment {k} is malformed"));
            }
            if s.times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(format!("segment {k} times are not strictly increasing"));
            }
            if s.states.iter().any(|x| x.len() != self.dim) {
                return Err(format!("segment {k} has a state of wrong dimension"));
            }
            if k == 0 && s.start() != 0.0 {
                return Err("arc does not start at t = 0".into());
            }
            if k > 0 && s.start() != self.segments[k - 1].end() {
                return Err(format!(
                    "segment {k} does not start where segment {} ends",
                    k - 1
                ));
            }
        }
        Ok(())
    }
}

/// Restriction of `arc` to the domain points with `t + j ≤ horizon`.
///
/// When `horizon − j` falls strictly between two samples, the restricted
/// segment ends at an interpolated sample placed exactly there.
pub fn hybrid_time_slice(arc: &HybridArc, horizon: f64) -> HybridArc {
    let mut out = HybridArc::new(arc.dim);
    for seg in &arc.segments {
        let limit = horizon - seg.j as f64;
        if seg.start() > limit {
            break;
        }
        let keep = seg.times.partition_point(|&t| t <= limit);
        let mut s = Segment {
            j: seg.j,
            times: seg.times[..keep].to_vec(),
            states: seg.states[..keep].to_vec(),
        };
        if keep < seg.len() && s.end() < limit {
            s.push(limit, seg.interpolate(limit));
        }
        out.segments.push(s);
    }
    out
}
