//! Closest reachable pointing direction for targets whose orientation
//! cannot be reached, and the solver that substitutes it.

use nalgebra::Vector3;

use super::axial;
use super::{geometry, to_symmetry_frame, BoundaryKind, BoundaryPoint, Geometry};
use crate::model::{forward_kinematics, minimal_rotation, ConfigClass, Pose, StructuralParams};
use crate::vsik::{self, IkOutcome, IkStatus, SolverSettings};

/// Limits are moved this far into the feasible range when generating
/// candidate directions, so that candidates are strictly reachable.
pub const FALLBACK_INSET: f64 = 1e-6;

/// Curves whose best sample is refined.
const REFINED_CURVES: usize = 6;
/// Candidates tried by [`solve_with_fallback`] before giving up.
const MAX_FALLBACK_TRIES: usize = 20;
/// Limit slack accepted for a directly built configuration.
const BUILD_LIMIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestDirection {
    /// Unit pointing direction in the world frame.
    pub direction: Vector3<f64>,
    /// Boundary the direction lies on.
    pub kind: BoundaryKind,
    /// Great-circle angle to the target's direction.
    pub angle: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub sheet: i8,
}

/// Reachable direction nearest to the target's, searched over all boundary
/// curves at the target position with `n_samples` increments per sweep.
/// `None` if nothing is reachable from this position.
pub fn closest_feasible_direction(
    target: &Pose,
    params: &StructuralParams,
    class: ConfigClass,
    n_samples: usize,
) -> Option<ClosestDirection> {
    candidates(target, params, class, n_samples).into_iter().next()
}

/// Candidate directions ordered by angle to the target.
fn candidates(
    target: &Pose,
    params: &StructuralParams,
    class: ConfigClass,
    n_samples: usize,
) -> Vec<ClosestDirection> {
    let frame = to_symmetry_frame(target);
    let t = frame.a_s;
    let y_sign = if t.y < 0.0 { -1.0 } else { 1.0 };
    let make = |b: &BoundaryPoint, kind: BoundaryKind| {
        let direction = frame.lift(b.a_sx, b.a_sz, y_sign);
        let local = frame.to_frame(&direction);
        ClosestDirection {
            direction,
            kind,
            angle: t.dot(&local).clamp(-1.0, 1.0).acos(),
            theta1: b.theta1,
            theta2: b.theta2,
            sheet: b.sheet,
        }
    };

    let mut out: Vec<ClosestDirection> = Vec::new();
    if frame.axial {
        // Rotational symmetry: the best point of a chord shares the
        // target's azimuth.
        let bands = axial::bands(class, frame.p_s.z, params, FALLBACK_INSET);
        let rho = t.x.hypot(t.y);
        let (ux, uy) = if rho > 1e-12 { (t.x / rho, t.y / rho) } else { (1.0, 0.0) };
        for band in &bands {
            for end in [band.lo, band.hi] {
                let r = (1.0 - end.az * end.az).max(0.0).sqrt();
                let direction = Vector3::new(r * ux, r * uy, end.az);
                out.push(ClosestDirection {
                    direction,
                    kind: end.kind(),
                    angle: t.dot(&direction).clamp(-1.0, 1.0).acos(),
                    theta1: end.theta1,
                    theta2: end.theta2,
                    sheet: end.sheet,
                });
            }
        }
    } else {
        let geom = geometry(&frame, class, params);
        let curves = geom.curves(FALLBACK_INSET, n_samples);
        // Best sample of each curve.
        let mut best: Vec<(f64, usize, usize)> = curves
            .iter()
            .enumerate()
            .filter_map(|(ci, c)| {
                c.points
                    .iter()
                    .enumerate()
                    .map(|(pi, b)| (make(b, c.kind).angle, ci, pi))
                    .min_by(|a, b| a.0.total_cmp(&b.0))
            })
            .collect();
        best.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(_, ci, pi) in best.iter().take(REFINED_CURVES) {
            let curve = &curves[ci];
            out.push(make(&curve.points[pi], curve.kind));
            out.extend(geom.refine(curve, pi, FALLBACK_INSET).iter().map(|b| make(b, curve.kind)));
        }
        for &(_, ci, pi) in best.iter().skip(REFINED_CURVES) {
            out.push(make(&curves[ci].points[pi], curves[ci].kind));
        }
    }
    out.sort_by(|a, b| a.angle.total_cmp(&b.angle));
    out
}

/// Solves `target`; if its orientation is unreachable, substitutes the
/// closest reachable pointing direction (rotating the target frame by the
/// minimal rotation) and solves that instead.
///
/// A substituted solve reports `Solved` with `substitute_direction` set, and
/// its errors are measured against the original target.
pub fn solve_with_fallback(
    target: &Pose,
    class: ConfigClass,
    params: &StructuralParams,
    settings: &SolverSettings,
    n_samples: usize,
) -> IkOutcome {
    let first = vsik::solve(target, class, params, settings);
    if first.is_solved() || target.require_valid().is_err() {
        return first;
    }
    let mut iterations = first.iterations;
    let frame = to_symmetry_frame(target);
    let geom: Box<dyn Geometry> = geometry(&frame, class, params);
    let a = target.approach();
    for cand in candidates(target, params, class, n_samples)
        .iter()
        .take(MAX_FALLBACK_TRIES)
    {
        let substitute = Pose::new(
            target.position,
            minimal_rotation(&a, &cand.direction) * target.rotation,
        );
        let hint = match class {
            ConfigClass::Ci2 => cand.theta1,
            ConfigClass::Ci1 => cand.theta2,
        };
        let out = vsik::solve_with_hint(&substitute, class, params, settings, Some(hint));
        iterations += out.iterations;
        let config = if out.is_solved() {
            out.config
        } else {
            geom.build_config(cand.theta1, cand.theta2, cand.sheet, &substitute)
                .filter(|c| c.check_limits(params, BUILD_LIMIT_TOL).is_ok())
        };
        let Some(mut config) = config else { continue };
        config.clamp_to_limits(params);
        let Ok(reached) = forward_kinematics(params, &config) else {
            continue;
        };
        if reached.position_error(&substitute) >= settings.pos_tol
            || reached.orientation_error(&substitute) >= settings.ori_tol
        {
            continue;
        }
        return IkOutcome {
            status: IkStatus::Solved,
            config: Some(config),
            iterations,
            position_error: reached.position_error(target),
            orientation_error: reached.orientation_error(target),
            branch_used: out.branch_used,
            substitute_direction: Some([cand.direction.x, cand.direction.y, cand.direction.z]),
        };
    }
    IkOutcome {
        iterations,
        ..first
    }
}
