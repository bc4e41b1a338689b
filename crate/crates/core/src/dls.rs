//! Jacobian damped-least-squares baseline.
//!
//! Iterates `Δq = s·Jᵀ(JJᵀ + λ²I)⁻¹e` on the six configuration variables with
//! a numerical Jacobian, projecting each iterate back onto the
//! configuration box. Bending angles may pass through zero during the
//! iteration; a negative angle is stored as the same arc with the bending
//! direction turned by π.

use std::f64::consts::PI;

use nalgebra::{Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::model::{
    forward_kinematics_unchecked, rotation_log, wrap_angle, Config, ConfigClass, Pose,
    StructuralParams,
};
use crate::vsik::{IkOutcome, IkStatus};

/// Step of the central-difference Jacobian.
const JACOBIAN_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DlsSettings {
    /// Damping factor λ.
    pub damping: f64,
    pub step_scale: f64,
    pub max_iterations: usize,
    /// Iterations without orientation improvement, after the position has
    /// converged, before a position-first solve stops.
    pub stagnation_window: usize,
    pub pos_tol: f64,
    pub ori_tol: f64,
    /// Position errors are divided by this length (mm) to form the task vector.
    pub position_scale: f64,
    /// Per-iteration cap on the position error fed to the update (mm).
    pub max_position_error: f64,
    /// Per-iteration cap on the orientation error fed to the update (rad).
    pub max_orientation_error: f64,
    /// Weight of the orientation rows in position-first mode, applied once
    /// the position has been reached; before that only position rows count.
    pub orientation_weight: f64,
}

impl Default for DlsSettings {
    fn default() -> Self {
        Self {
            damping: 0.01,
            step_scale: 1.0,
            max_iterations: 200,
            stagnation_window: 30,
            pos_tol: 0.01,
            ori_tol: 0.01,
            position_scale: 10.0,
            max_position_error: 10.0,
            max_orientation_error: 0.3,
            orientation_weight: 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Priority {
    /// Position and orientation weighted equally.
    FullPose,
    /// Position first; orientation is improved while it keeps getting better.
    PositionFirst,
}

/// Index of the bending angles and their directions in the solver vector.
const THETA_DELTA: [(usize, usize); 2] = [(2, 3), (4, 5)];
const THETA_DELTA_CI1: [(usize, usize); 2] = [(1, 3), (4, 5)];

fn theta_delta(class: ConfigClass) -> [(usize, usize); 2] {
    match class {
        ConfigClass::Ci1 => THETA_DELTA_CI1,
        ConfigClass::Ci2 => THETA_DELTA,
    }
}

/// Index of the length variable (`L1` or `Ls`) in the solver vector.
fn length_index(class: ConfigClass) -> usize {
    match class {
        ConfigClass::Ci1 => 2,
        ConfigClass::Ci2 => 0,
    }
}

fn length_bounds(class: ConfigClass, params: &StructuralParams) -> (f64, f64) {
    match class {
        ConfigClass::Ci1 => (0.0, params.l10),
        ConfigClass::Ci2 => (0.0, params.ls_max),
    }
}

fn pose_of(class: ConfigClass, q: &Vector6<f64>, params: &StructuralParams) -> Pose {
    forward_kinematics_unchecked(params, &Config::from_array(class, (*q).into()))
}

/// Central-difference Jacobian of the task twist (position rows, then
/// world-frame angular rows) with respect to the six configuration variables.
///
/// Differences that would leave the length variable's range are one-sided.
pub fn numerical_jacobian(config: &Config, params: &StructuralParams) -> Matrix6<f64> {
    let class = config.class();
    let q = Vector6::from(config.to_array());
    jacobian_at(class, &q, params, JACOBIAN_STEP)
}

fn jacobian_at(
    class: ConfigClass,
    q: &Vector6<f64>,
    params: &StructuralParams,
    h: f64,
) -> Matrix6<f64> {
    let li = length_index(class);
    let (lmin, lmax) = length_bounds(class, params);
    let base = pose_of(class, q, params);
    let mut jac = Matrix6::zeros();
    for j in 0..6 {
        let (mut forward, mut backward) = (h, h);
        if j == li {
            if q[j] - h < lmin {
                backward = 0.0;
            } else if q[j] + h > lmax {
                forward = 0.0;
            }
        }
        let pose_at = |step: f64| {
            if step == 0.0 {
                base
            } else {
                let mut qs = *q;
                qs[j] += step;
                pose_of(class, &qs, params)
            }
        };
        let plus = pose_at(forward);
        let minus = pose_at(-backward);
        let span = forward + backward;
        let dp = (plus.position - minus.position) / span;
        let dw = rotation_log(&(plus.rotation * minus.rotation.transpose())) / span;
        jac.fixed_view_mut::<3, 1>(0, j).copy_from(&dp);
        jac.fixed_view_mut::<3, 1>(3, j).copy_from(&dw);
    }
    jac
}

/// Task error `[Δp, log(R_t·R_cᵀ)]` of `current` relative to `target`.
fn task_error(current: &Pose, target: &Pose) -> (Vector3<f64>, Vector3<f64>) {
    (
        target.position - current.position,
        rotation_log(&(target.rotation * current.rotation.transpose())),
    )
}

/// Negative bending angles become positive ones with the direction turned by π;
/// angles are wrapped and the result is projected onto the configuration box.
fn project(class: ConfigClass, q: &mut Vector6<f64>, params: &StructuralParams) {
    for (t, d) in theta_delta(class) {
        if q[t] < 0.0 {
            q[t] = -q[t];
            q[d] += PI;
        }
        q[d] = wrap_angle(q[d]);
    }
    let phi = match class {
        ConfigClass::Ci1 => 0,
        ConfigClass::Ci2 => 1,
    };
    q[phi] = wrap_angle(q[phi]);
    let li = length_index(class);
    let (lmin, lmax) = length_bounds(class, params);
    q[li] = q[li].clamp(lmin, lmax);
    let [(t1, _), (t2, _)] = theta_delta(class);
    let t1_max = match class {
        ConfigClass::Ci1 => params.theta1_max.min(q[li] / params.r1_min),
        ConfigClass::Ci2 => params.theta1_max,
    };
    q[t1] = q[t1].min(t1_max);
    q[t2] = q[t2].min(params.theta2_max);
}

fn clamp_norm(v: Vector3<f64>, max: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

fn step_vector(
    class: ConfigClass,
    q: &Vector6<f64>,
    target: &Pose,
    params: &StructuralParams,
    settings: &DlsSettings,
    orientation_weight: f64,
) -> Vector6<f64> {
    let current = pose_of(class, q, params);
    let (ep, eo) = task_error(&current, target);
    let ep = clamp_norm(ep, settings.max_position_error) / settings.position_scale;
    let eo = clamp_norm(eo, settings.max_orientation_error) * orientation_weight;
    let e = Vector6::new(ep.x, ep.y, ep.z, eo.x, eo.y, eo.z);
    if e.iter().all(|v| *v == 0.0) {
        return Vector6::zeros();
    }
    let mut jac = jacobian_at(class, q, params, JACOBIAN_STEP);
    for j in 0..6 {
        for i in 0..3 {
            jac[(i, j)] /= settings.position_scale;
            jac[(i + 3, j)] *= orientation_weight;
        }
    }
    let lambda2 = settings.damping * settings.damping;
    let a = jac * jac.transpose() + Matrix6::identity() * lambda2;
    match a.cholesky() {
        Some(ch) => jac.transpose() * ch.solve(&e) * settings.step_scale,
        None => Vector6::zeros(),
    }
}

/// One damped-least-squares update with equal position/orientation weights,
/// projected onto the configuration box.
pub fn dls_step(
    config: &Config,
    target: &Pose,
    params: &StructuralParams,
    settings: &DlsSettings,
) -> Config {
    let class = config.class();
    let mut q = Vector6::from(config.to_array());
    q += step_vector(class, &q, target, params, settings, 1.0);
    project(class, &mut q, params);
    Config::from_array(class, q.into())
}

/// Starting configuration: half the length range, everything else zero.
pub fn initial_config(class: ConfigClass, params: &StructuralParams) -> Config {
    let mut q = [0.0; 6];
    q[length_index(class)] = match class {
        ConfigClass::Ci1 => 0.5 * params.l10,
        ConfigClass::Ci2 => 0.5 * params.ls_max,
    };
    Config::from_array(class, q)
}

pub fn solve_dls(
    target: &Pose,
    class: ConfigClass,
    params: &StructuralParams,
    settings: &DlsSettings,
    priority: Priority,
) -> IkOutcome {
    solve_dls_from(target, &initial_config(class, params), params, settings, priority)
}

/// [`solve_dls`] from an explicit starting configuration.
pub fn solve_dls_from(
    target: &Pose,
    start: &Config,
    params: &StructuralParams,
    settings: &DlsSettings,
    priority: Priority,
) -> IkOutcome {
    let class = start.class();
    let orientation_weight = match priority {
        Priority::FullPose => 1.0,
        Priority::PositionFirst => settings.orientation_weight,
    };
    let mut q = Vector6::from(start.to_array());
    project(class, &mut q, params);
    let errors = |q: &Vector6<f64>| {
        let pose = pose_of(class, q, params);
        (pose.position_error(target), pose.orientation_error(target))
    };
    let (mut pos, mut ori) = errors(&q);
    // Position-first: orientation rows join once the position has been reached.
    let mut reached = false;
    let mut best: Option<(Vector6<f64>, f64, f64)> = None;
    let mut since_best = 0;
    let mut iterations = 0;
    let mut status = IkStatus::NoConvergence;
    while iterations < settings.max_iterations {
        if pos < settings.pos_tol && ori < settings.ori_tol {
            status = IkStatus::Solved;
            break;
        }
        if priority == Priority::PositionFirst && pos < settings.pos_tol {
            reached = true;
            if best.map_or(true, |b| ori < b.2) {
                best = Some((q, pos, ori));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= settings.stagnation_window {
                    break;
                }
            }
        }
        let weight = if priority == Priority::PositionFirst && !reached {
            0.0
        } else {
            orientation_weight
        };
        iterations += 1;
        let dq = step_vector(class, &q, target, params, settings, weight);
        if dq.norm() < 1e-14 {
            break;
        }
        q += dq;
        project(class, &mut q, params);
        (pos, ori) = errors(&q);
    }
    if status != IkStatus::Solved {
        if let Some((bq, bp, bo)) = best.filter(|b| pos >= settings.pos_tol || b.2 < ori) {
            (q, pos, ori) = (bq, bp, bo);
        }
    }
    if status != IkStatus::Solved && pos < settings.pos_tol && ori < settings.ori_tol {
        status = IkStatus::Solved;
    }
    IkOutcome {
        status,
        config: Some(Config::from_array(class, q.into())),
        iterations,
        position_error: pos,
        orientation_error: ori,
        branch_used: None,
        substitute_direction: None,
    }
}
