use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::arc::HybridArc;
use super::system::HybridSystem;
use crate::linalg::dist;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Worst sup-norm residual between the finite-difference velocity and
    /// the flow field at interior grid points.
    pub max_flow_defect: f64,
    pub jump_violations: usize,
    pub in_set_violations: usize,
}

impl ValidationReport {
    pub fn is_clean(&self, defect_tol: f64) -> bool {
        self.jump_violations == 0
            && self.in_set_violations == 0
            && self.max_flow_defect <= defect_tol
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValidateError {
    #[error("arc has dimension {arc}, system has {system}")]
    DimensionMismatch { arc: usize, system: usize },
}

/// Checks the solution conditions of `sys` along `arc`.
///
/// Velocities come from the second-order three-point difference on the
/// (possibly nonuniform) grid, so the defect of an exact sample scales like
/// the square of the step.
pub fn validate_arc(
    arc: &HybridArc,
    sys: &HybridSystem,
    tol: f64,
) -> Result<ValidationReport, ValidateError> {
    if arc.dim != sys.dim {
        return Err(ValidateError::DimensionMismatch {
            arc: arc.dim,
            system: sys.dim,
        });
    }
    let mut rep = ValidationReport::default();
    let mut f = vec![0.0; sys.dim];
    for seg in &arc.segments {
        if seg.flows() {
            for x in &seg.states {
                if !sys.in_flow_set(x, tol) {
                    rep.in_set_violations += 1;
                }
            }
        }
        for k in 1..seg.len().saturating_sub(1) {
            let (t0, t1, t2) = (seg.times[k - 1], seg.times[k], seg.times[k + 1]);
            let (h0, h1) = (t1 - t0, t2 - t1);
            let (x0, x1, x2) = (&seg.states[k - 1], &seg.states[k], &seg.states[k + 1]);
            (sys.flow_field)(x1, t1, &mut f);
            for i in 0..sys.dim {
                let d = -h1 / (h0 * (h0 + h1)) * x0[i]
                    + (h1 - h0) / (h0 * h1) * x1[i]
                    + h0 / (h1 * (h0 + h1)) * x2[i];
                rep.max_flow_defect = rep.max_flow_defect.max((d - f[i]).abs());
            }
        }
    }
    for w in arc.segments.windows(2) {
        let pre = w[0].last_state();
        let post = w[1].first_state();
        let in_d = sys.in_jump_set(pre, tol);
        let lands = (sys.jump_map)(pre)
            .iter()
            .any(|g| dist(g, post) <= tol.max(1e-12));
        if !in_d || !lands {
            rep.jump_violations += 1;
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::{simulate, Segment, SolverConfig};

    fn decay() -> HybridSystem {
        HybridSystem::continuous(1, |x, _, out| out[0] = -x[0])
    }

    #[test]
    fn exponential_arc_is_clean() {
        let arc = simulate(&decay(), &[1.0], &SolverConfig::new(1e-3, 2.0)).unwrap();
        let rep = validate_arc(&arc, &decay(), 1e-9).unwrap();
        assert!(rep.max_flow_defect <= 1e-4, "{rep:?}");
        assert_eq!((rep.jump_violations, rep.in_set_violations), (0, 0));
    }

    #[test]
    fn inserted_jump_outside_d_is_counted() {
        let sys = decay().with_jumps(|x, tol| x[0] >= 10.0 - tol, |x| vec![x.to_vec()]);
        let mut arc = simulate(&sys, &[1.0], &SolverConfig::new(1e-2, 1.0)).unwrap();
        let last = arc.final_state().unwrap().to_vec();
        arc.segments.push(Segment::new(1, 1.0, last));
        let rep = validate_arc(&arc, &sys, 1e-9).unwrap();
        assert_eq!(rep.jump_violations, 1);
    }

    #[test]
    fn flow_samples_outside_c_are_counted() {
        let sys = decay().with_flow_set(|x, tol| x[0] >= 0.5 - tol);
        let mut arc = HybridArc::new(1);
        let mut seg = Segment::new(0, 0.0, vec![1.0]);
        seg.push(1.0, vec![0.1]);
        arc.segments.push(seg);
        let rep = validate_arc(&arc, &sys, 1e-9).unwrap();
        assert_eq!(rep.in_set_violations, 1);
    }

    #[test]
    fn dimension_is_checked() {
        let arc = HybridArc::new(3);
        assert!(validate_arc(&arc, &decay(), 1e-9).is_err());
    }
}
