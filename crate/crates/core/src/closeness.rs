//! `(T, ρ)`-closeness of hybrid arcs and empirical practical stability.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hybrid::{hybrid_time_slice, HybridArc, HybridTimePoint, Segment};
use crate::linalg::norm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClosenessError {
    #[error("arcs have dimensions {0} and {1}")]
    DimensionMismatch(usize, usize),
    #[error("component {0} is out of range")]
    ComponentOutOfRange(usize),
    #[error("bisection tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
}

/// A sample of one arc together with its closest admissible match on the
/// other arc, as found at the largest failing `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: HybridTimePoint,
    pub matched: Option<HybridTimePoint>,
    pub distance: f64,
    /// True when `point` belongs to the second arc.
    pub reversed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosenessReport {
    #[serde(rename = "T")]
    pub horizon: f64,
    /// `f64::INFINITY` when the jump structures cannot be matched.
    pub rho_min: f64,
    pub witness: Option<Witness>,
}

fn project(arc: &HybridArc, components: Option<&[usize]>) -> Result<HybridArc, ClosenessError> {
    let Some(c) = components else {
        return Ok(arc.clone());
    };
    if let Some(&bad) = c.iter().find(|&&i| i >= arc.dim) {
        return Err(ClosenessError::ComponentOutOfRange(bad));
    }
    Ok(HybridArc {
        dim: c.len(),
        segments: arc
            .segments
            .iter()
            .map(|s| Segment {
                j: s.j,
                times: s.times.clone(),
                states: s
                    .states
                    .iter()
                    .map(|x| c.iter().map(|&i| x[i]).collect())
                    .collect(),
            })
            .collect(),
    })
}

fn prepare(
    a: &HybridArc,
    b: &HybridArc,
    components: Option<&[usize]>,
) -> Result<(HybridArc, HybridArc), ClosenessError> {
    if components.is_none() && a.dim != b.dim {
        return Err(ClosenessError::DimensionMismatch(a.dim, b.dim));
    }
    Ok((project(a, components)?, project(b, components)?))
}

fn point_segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut ab2 = 0.0;
    let mut ap_ab = 0.0;
    for i in 0..p.len() {
        let d = b[i] - a[i];
        ab2 += d * d;
        ap_ab += (p[i] - a[i]) * d;
    }
    let w = if ab2 > 0.0 {
        (ap_ab / ab2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.iter()
        .zip(a.iter().zip(b))
        .map(|(pi, (ai, bi))| {
            let q = ai + w * (bi - ai);
            (pi - q) * (pi - q)
        })
        .sum::<f64>()
        .sqrt()
}

fn lerp(seg: &Segment, k: usize, t: f64) -> Vec<f64> {
    let (t0, t1) = (seg.times[k], seg.times[k + 1]);
    let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
    seg.states[k]
        .iter()
        .zip(&seg.states[k + 1])
        .map(|(x, y)| x + w * (y - x))
        .collect()
}

/// Smallest state distance from `p` to the interpolated segment restricted
/// to times in `[t − ρ, t + ρ]`; stops early once `stop` is reached.
fn window_distance(seg: &Segment, t: f64, p: &[f64], rho: f64, stop: f64) -> Option<(f64, f64)> {
    let (lo, hi) = (t - rho, t + rho);
    if hi < seg.start() || lo > seg.end() {
        return None;
    }
    if seg.len() == 1 {
        return Some((crate::linalg::dist(p, &seg.states[0]), seg.start()));
    }
    let first = seg.times.partition_point(|&s| s < lo).saturating_sub(1);
    let mut best = (f64::INFINITY, t);
    for k in first..seg.len() - 1 {
        let (t0, t1) = (seg.times[k], seg.times[k + 1]);
        if t0 > hi {
            break;
        }
        if t1 < lo {
            continue;
        }
        let (c0, c1) = (t0.max(lo), t1.min(hi));
        let x0 = if c0 > t0 {
            lerp(seg, k, c0)
        } else {
            seg.states[k].clone()
        };
        let x1 = if c1 < t1 {
            lerp(seg, k, c1)
        } else {
            seg.states[k + 1].clone()
        };
        let d = point_segment_distance(p, &x0, &x1);
        if d < best.0 {
            best = (d, 0.5 * (c0 + c1));
            if d <= stop {
                break;
            }
        }
    }
    Some(best)
}

/// First sample of `a` (within the horizon) without a `ρ`-match on `b`.
fn first_unmatched(a: &HybridArc, b: &HybridArc, horizon: f64, rho: f64) -> Option<Witness> {
    let sliced = hybrid_time_slice(a, horizon);
    for seg in &sliced.segments {
        let other = b.segment(seg.j);
        for (&t, x) in seg.times.iter().zip(&seg.states) {
            let found = other.and_then(|o| window_distance(o, t, x, rho, rho));
            match found {
                Some((d, _)) if d <= rho => {}
                Some((d, s)) => {
                    return Some(Witness {
                        point: HybridTimePoint::new(t, seg.j),
                        matched: Some(HybridTimePoint::new(s, seg.j)),
                        distance: d,
                        reversed: false,
                    })
                }
                None => {
                    return Some(Witness {
                        point: HybridTimePoint::new(t, seg.j),
                        matched: None,
                        distance: f64::INFINITY,
                        reversed: false,
                    })
                }
            }
        }
    }
    None
}

fn unmatched_either(a: &HybridArc, b: &HybridArc, horizon: f64, rho: f64) -> Option<Witness> {
    first_unmatched(a, b, horizon, rho).or_else(|| {
        first_unmatched(b, a, horizon, rho).map(|w| Witness {
            reversed: true,
            ..w
        })
    })
}

/// Checks both directions of `(T, ρ)`-closeness on the selected components.
pub fn is_t_rho_close(
    a: &HybridArc,
    b: &HybridArc,
    horizon: f64,
    rho: f64,
    components: Option<&[usize]>,
) -> Result<bool, ClosenessError> {
    let (a, b) = prepare(a, b, components)?;
    Ok(unmatched_either(&a, &b, horizon, rho).is_none())
}

fn extent(arc: &HybridArc) -> (f64, f64) {
    let t = arc.final_point().map_or(0.0, |p| p.t);
    let x = arc.samples().map(|(_, x)| norm(x)).fold(0.0, f64::max);
    (t, x)
}

/// Bisection for the smallest `ρ` making the arcs `(T, ρ)`-close.
pub fn min_rho(
    a: &HybridArc,
    b: &HybridArc,
    horizon: f64,
    tol: f64,
    components: Option<&[usize]>,
) -> Result<ClosenessReport, ClosenessError> {
    if !(tol > 0.0) {
        return Err(ClosenessError::InvalidTolerance(tol));
    }
    let (a, b) = prepare(a, b, components)?;
    let (ta, xa) = extent(&a);
    let (tb, xb) = extent(&b);
    let mut hi = ta.max(tb).max(horizon) + xa + xb + 1.0;
    if let Some(w) = unmatched_either(&a, &b, horizon, hi) {
        return Ok(ClosenessReport {
            horizon,
            rho_min: f64::INFINITY,
            witness: Some(w),
        });
    }
    let mut lo = 0.0;
    let mut witness = match unmatched_either(&a, &b, horizon, 0.0) {
        None => {
            return Ok(ClosenessReport {
                horizon,
                rho_min: 0.0,
                witness: None,
            })
        }
        w => w,
    };
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match unmatched_either(&a, &b, horizon, mid) {
            None => hi = mid,
            w => {
                lo = mid;
                witness = w;
            }
        }
    }
    Ok(ClosenessReport {
        horizon,
        rho_min: hi,
        witness,
    })
}

pub type DistanceFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Distance-like function to the target set.
#[derive(Clone)]
pub enum IndicatorSpec {
    /// Distance to the nearest listed point, on the given components.
    Points {
        points: Vec<Vec<f64>>,
        components: Vec<usize>,
    },
    Distance(DistanceFn),
    /// `{point} × box`: Euclidean distance on `point_components` combined
    /// with the distance to the box on `box_components`.
    PointBox {
        point: Vec<f64>,
        point_components: Vec<usize>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        box_components: Vec<usize>,
    },
}

impl fmt::Debug for IndicatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Points { points, components } => f
                .debug_struct("Points")
                .field("points", points)
                .field("components", components)
                .finish(),
            Self::Distance(_) => f.write_str("Distance(..)"),
            Self::PointBox {
                point,
                point_components,
                lower,
                upper,
                box_components,
            } => f
                .debug_struct("PointBox")
                .field("point", point)
                .field("point_components", point_components)
                .field("lower", lower)
                .field("upper", upper)
                .field("box_components", box_components)
                .finish(),
        }
    }
}

impl IndicatorSpec {
    pub fn point(point: Vec<f64>, components: Vec<usize>) -> Self {
        Self::Points {
            points: vec![point],
            components,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Points { points, components } => points
                .iter()
                .map(|p| {
                    components
                        .iter()
                        .zip(p)
                        .map(|(&i, pi)| (x[i] - pi) * (x[i] - pi))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min),
            Self::Distance(f) => f(x),
            Self::PointBox {
                point,
                point_components,
                lower,
                upper,
                box_components,
            } => {
                let mut s = 0.0;
                for (&i, p) in point_components.iter().zip(point) {
                    s += (x[i] - p) * (x[i] - p);
                }
                for (k, &i) in box_components.iter().enumerate() {
                    let d = (lower[k] - x[i]).max(0.0) + (x[i] - upper[k]).max(0.0);
                    s += d * d;
                }
                s.sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub nu: f64,
    pub settle_time: Option<f64>,
    pub overshoot_ratio: f64,
    pub passed: bool,
}

/// Empirical envelope check `ω ≤ c·ω(0) + ν`, with `ω ≤ ν` from some time
/// on, over samples with `t ≤ horizon`.
pub fn practical_stability_check(
    arc: &HybridArc,
    ind: &IndicatorSpec,
    nu: f64,
    c_overshoot: f64,
    horizon: f64,
) -> StabilityVerdict {
    let samples: Vec<(f64, f64)> = arc
        .samples()
        .filter(|(p, _)| p.t <= horizon)
        .map(|(p, x)| (p.t, ind.eval(x)))
        .collect();
    let Some(&(_, w0)) = samples.first() else {
        return StabilityVerdict {
            nu,
            settle_time: None,
            overshoot_ratio: f64::NAN,
            passed: false,
        };
    };
    let peak = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    let within_envelope = samples.iter().all(|s| s.1 <= c_overshoot * w0 + nu);
    let mut settle = None;
    for &(t, w) in samples.iter().rev() {
        if w > nu {
            break;
        }
        settle = Some(t);
    }
    let covers = arc.final_point().is_some_and(|p| p.t >= horizon - 1e-9);
    let overshoot_ratio = if w0 > 0.0 {
        peak / w0
    } else if peak > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    StabilityVerdict {
        nu,
        settle_time: settle,
        overshoot_ratio,
        passed: within_envelope && settle.is_some() && covers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sampled(f: impl Fn(f64) -> f64, t_end: f64, h: f64) -> HybridArc {
        let mut seg = Segment::new(0, 0.0, vec![f(0.0)]);
        let n = (t_end / h).round() as usize;
        for k in 1..=n {
            let t = k as f64 * h;
            seg.push(t, vec![f(t)]);
        }
        HybridArc {
            dim: 1,
            segments: vec![seg],
        }
    }

    #[test]
    fn arc_is_close_to_itself_at_zero() {
        let a = sampled(|t| t.sin(), 5.0, 0.01);
        assert!(is_t_rho_close(&a, &a, 5.0, 0.0, None).unwrap());
        let r = min_rho(&a, &a, 5.0, 1e-3, None).unwrap();
        assert_eq!(r.rho_min, 0.0);
    }

    #[test]
    fn time_shift_is_detected() {
        // b(t) = a(t − 0.1) for slope-1 ramp: b lags a by 0.1 in both time and state
        let a = sampled(|t| t, 3.0, 0.01);
        let b = sampled(|t| (t - 0.1).max(0.0), 3.0, 0.01);
        assert!(is_t_rho_close(&a, &b, 2.0, 0.2, None).unwrap());
        assert!(!is_t_rho_close(&a, &b, 2.0, 0.04, None).unwrap());
        let r = min_rho(&a, &b, 2.0, 1e-4, None).unwrap();
        // best trade-off between |t − s| and |a − b| is 0.05
        assert_abs_diff_eq!(r.rho_min, 0.05, epsilon = 2e-4);
    }

    #[test]
    fn constant_arcs_at_distance_d() {
        let a = sampled(|_| 0.0, 2.0, 0.1);
        let b = sampled(|_| 0.7, 2.0, 0.1);
        let r = min_rho(&a, &b, 2.0, 1e-6, None).unwrap();
        assert_abs_diff_eq!(r.rho_min, 0.7, epsilon = 1e-6);
        assert!(r.witness.is_some());
    }

    #[test]
    fn jump_count_mismatch_is_never_close() {
        let a = sampled(|_| 0.0, 2.0, 0.1);
        let mut b = a.clone();
        b.segments[0].times.truncate(11);
        b.segments[0].states.truncate(11);
        let mut s1 = Segment::new(1, 1.0, vec![0.0]);
        s1.push(2.0, vec![0.0]);
        b.segments.push(s1);
        assert!(!is_t_rho_close(&a, &b, 3.0, 100.0, None).unwrap());
        assert_eq!(
            min_rho(&a, &b, 3.0, 1e-3, None).unwrap().rho_min,
            f64::INFINITY
        );
        // before the jump, they agree
        assert!(is_t_rho_close(&a, &b, 0.9, 0.0, None).unwrap());
    }

    #[test]
    fn component_selection_and_dimension_checks() {
        let a = HybridArc {
            dim: 2,
            segments: vec![Segment::new(0, 0.0, vec![0.0, 5.0])],
        };
        let b = HybridArc {
            dim: 1,
            segments: vec![Segment::new(0, 0.0, vec![0.0])],
        };
        assert!(is_t_rho_close(&a, &b, 1.0, 0.1, None).is_err());
        assert!(is_t_rho_close(&a, &b, 1.0, 0.0, Some(&[0])).unwrap());
        assert!(is_t_rho_close(&a, &b, 1.0, 0.0, Some(&[3])).is_err());
    }

    #[test]
    fn exponential_decay_settles() {
        let a = sampled(|t| (-t).exp(), 10.0, 0.01);
        let ind = IndicatorSpec::point(vec![0.0], vec![0]);
        let v = practical_stability_check(&a, &ind, 0.1, 1.0, 10.0);
        assert!(v.passed);
        assert_abs_diff_eq!(v.settle_time.unwrap(), 10f64.ln(), epsilon = 0.011);
        assert_abs_diff_eq!(v.overshoot_ratio, 1.0);
    }

    #[test]
    fn constant_unit_indicator_fails() {
        let a = sampled(|_| 1.0, 5.0, 0.1);
        let ind = IndicatorSpec::point(vec![0.0], vec![0]);
        assert!(!practical_stability_check(&a, &ind, 0.5, 2.0, 5.0).passed);
    }

    #[test]
    fn indicators_vanish_on_their_sets() {
        let pb = IndicatorSpec::PointBox {
            point: vec![1.0, 2.0],
            point_components: vec![0, 1],
            lower: vec![0.0],
            upper: vec![3.0],
            box_components: vec![2],
        };
        assert_eq!(pb.eval(&[1.0, 2.0, 1.5]), 0.0);
        assert_abs_diff_eq!(pb.eval(&[1.0, 2.0, 4.0]), 1.0);
        let pts = IndicatorSpec::Points {
            points: vec![vec![0.0], vec![2.0]],
            components: vec![0],
        };
        assert_eq!(pts.eval(&[2.0]), 0.0);
        assert_eq!(pts.eval(&[1.5]), 0.5);
        assert!(pts.eval(&[5.0]) > 0.0);
    }

    proptest! {
        #[test]
        fn closeness_is_monotone_and_symmetric(
            shift in 0.0f64..0.5, amp in 0.1f64..2.0, rho in 0.0f64..1.0, extra in 0.0f64..1.0
        ) {
            let a = sampled(|t| amp * t.sin(), 4.0, 0.05);
            let b = sampled(|t| amp * (t + shift).sin(), 4.0, 0.05);
            if is_t_rho_close(&a, &b, 3.0, rho, None).unwrap() {
                prop_assert!(is_t_rho_close(&a, &b, 3.0, rho + extra, None).unwrap());
            }
            let ab = min_rho(&a, &b, 3.0, 1e-3, None).unwrap().rho_min;
            let ba = min_rho(&b, &a, 3.0, 1e-3, None).unwrap().rho_min;
            prop_assert!((ab - ba).abs() <= 1e-3);
        }
    }
}
