//! Variable-separation inverse kinematics.
//!
//! Each IK problem is reduced to one scalar equation: in `θ1` for CI-2 and
//! in `θ2` for CI-1. The scalar equation is solved by Newton iteration;
//! everything else follows in closed form from the line-segment shape.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::model::{
    arc_factor, forward_kinematics_unchecked, rot_y, rot_z, tan_half_ratio, wrap_angle, Config,
    ConfigCi1, ConfigCi2, ConfigClass, LineSegmentShape, Pose, StructuralParams,
};
use crate::{scalar, Error, Result};

/// Iterates are kept inside `(ITERATE_EPS, π − ITERATE_EPS)`.
const ITERATE_EPS: f64 = 1e-6;
/// Step of the central-difference derivative.
const DERIV_STEP: f64 = 1e-7;
/// A converged bending angle below this is treated as a straight segment.
const STRAIGHT_EPS: f64 = 1e-6;
/// Slack used when checking a recovered configuration against its limits.
const LIMIT_SLACK: f64 = 1e-9;
/// A limit-violating root is only trusted as a real configuration if its
/// forward kinematics lands this close (mm) to the target position.
const REAL_ROOT_POSITION_CHECK: f64 = 1.0;
/// Samples per branch in the bracketing scan fallback.
const SCAN_SAMPLES: usize = 240;
const MAX_BACKTRACKS: usize = 8;
/// A start where the residual is undefined is moved to the nearest defined
/// point within this distance, probed at this spacing.
const START_PROBE_RANGE: f64 = 0.05;
const START_PROBE_STEP: f64 = 0.002;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Convergence threshold on the CI-2 scalar residual (mm).
    pub residual_ci2: f64,
    /// Convergence threshold on the CI-1 scalar residual.
    pub residual_ci1: f64,
    /// Newton/Brent update budget per solve.
    pub max_iterations: usize,
    pub pos_tol: f64,
    pub ori_tol: f64,
    /// Consecutive clamps at the upper end of the iterate range that count
    /// as the bending angle running past π.
    pub theta_overflow_count: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            residual_ci2: 0.01,
            residual_ci1: 0.0003,
            max_iterations: 200,
            pos_tol: 0.01,
            ori_tol: 0.01,
            theta_overflow_count: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IkStatus {
    Solved,
    /// A real solution exists but breaks a configuration limit.
    InfeasibleOrientation,
    /// Complex roots or a bending angle running past π.
    NonRealSolution,
    NoConvergence,
}

impl IkStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            IkStatus::Solved => "solved",
            IkStatus::InfeasibleOrientation => "infeasible_orientation",
            IkStatus::NonRealSolution => "non_real_solution",
            IkStatus::NoConvergence => "no_convergence",
        }
    }
}

/// The two roots of the CI-2 quadratic in `l2`, labelled by the sign taken
/// in front of the square root of the discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum L2Root {
    First,
    Second,
}

impl L2Root {
    pub fn other(self) -> Self {
        match self {
            L2Root::First => L2Root::Second,
            L2Root::Second => L2Root::First,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            L2Root::First => "first_root",
            L2Root::Second => "second_root",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkOutcome {
    pub status: IkStatus,
    /// Present only when `status` is `Solved`.
    pub config: Option<Config>,
    /// Newton and bracketing updates spent on the scalar equation.
    pub iterations: usize,
    /// Achieved position error (mm); NaN when no configuration was produced.
    pub position_error: f64,
    /// Achieved orientation error (rad); NaN when no configuration was produced.
    pub orientation_error: f64,
    /// CI-2 only: which `l2` root produced the solution.
    pub branch_used: Option<L2Root>,
    /// Set when the target direction was replaced by the closest feasible one.
    pub substitute_direction: Option<[f64; 3]>,
}

impl IkOutcome {
    pub(crate) fn failed(status: IkStatus, iterations: usize) -> Self {
        Self {
            status,
            config: None,
            iterations,
            position_error: f64::NAN,
            orientation_error: f64::NAN,
            branch_used: None,
            substitute_direction: None,
        }
    }

    pub fn is_solved(&self) -> bool {
        self.status == IkStatus::Solved
    }
}

/// Why a residual could not be evaluated at a given angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ResidualFault {
    #[error("the l2 quadratic has complex roots")]
    ComplexRoots,
    #[error("the selected l2 root is not a positive finite length")]
    InvalidLength,
    #[error("the l1 expression is at its pole")]
    Pole,
    #[error("bending angle outside (0, π)")]
    Domain,
}

/// CI-2 residual evaluated at one `θ1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ci2Residual {
    /// `l2·θ2/tan(θ2/2) − L20` for the selected root (mm).
    pub value: f64,
    pub l1: f64,
    /// Selected `l2` root.
    pub l2: f64,
    /// Both roots, `[First, Second]`.
    pub l2_roots: [f64; 2],
    pub theta2: f64,
    pub ls: f64,
}

/// CI-1 residual evaluated at one `θ2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ci1Residual {
    pub value: f64,
    pub l1: f64,
    pub l2: f64,
}

/// Target-dependent constants of the CI-2 reduction.
#[derive(Debug, Clone, Copy)]
struct Ci2Problem {
    params: StructuralParams,
    /// Wrist point `p − Lg·a`.
    q: Vector3<f64>,
    a: Vector3<f64>,
    h: f64,
    b1: f64,
    b2: f64,
}

impl Ci2Problem {
    fn new(target: &Pose, params: &StructuralParams) -> Self {
        let a = target.approach();
        let q = target.position - params.lg * a;
        Self {
            params: *params,
            q,
            a,
            h: a.x * a.x + a.y * a.y,
            b1: q.x * q.x + q.y * q.y,
            b2: q.x * a.x + q.y * a.y,
        }
    }

    fn l2_roots(&self, theta1: f64, l1: f64) -> std::result::Result<[f64; 2], ResidualFault> {
        let s = theta1.sin();
        let s2 = s * s;
        let m = l1 + self.params.lr;
        let a = self.h - s2;
        let b = -(self.b2 + m * s2);
        let c = self.b1 - m * m * s2;
        let disc = b * b - a * c;
        if !(disc >= 0.0) {
            return Err(ResidualFault::ComplexRoots);
        }
        let sq = disc.sqrt();
        // Avoid cancellation: compute the larger-magnitude root directly and
        // the other from the product of roots.
        let (plus, minus) = if -b >= 0.0 {
            let qq = -b + sq;
            (qq / a, c / qq)
        } else {
            let qq = -b - sq;
            (c / qq, qq / a)
        };
        Ok([plus, minus])
    }

    fn eval(&self, theta1: f64, root: L2Root) -> std::result::Result<Ci2Residual, ResidualFault> {
        if !(theta1 > 0.0 && theta1 < PI) {
            return Err(ResidualFault::Domain);
        }
        let p = &self.params;
        let l1 = p.l10 * tan_half_ratio(theta1);
        let roots = self.l2_roots(theta1, l1)?;
        let l2 = match root {
            L2Root::First => roots[0],
            L2Root::Second => roots[1],
        };
        if !(l2 > 0.0 && l2.is_finite()) {
            return Err(ResidualFault::InvalidLength);
        }
        let l1r2 = l1 + p.lr + l2;
        let c = theta1.cos();
        let p2 = self.q - l2 * self.a;
        let d = Vector3::new(p2.x, p2.y, l1r2 * c);
        let theta2 = d.cross(&self.a).norm().atan2(d.dot(&self.a));
        let ls = self.q.z - l2 * self.a.z - l1r2 * c - l1;
        Ok(Ci2Residual {
            value: l2 * arc_factor(theta2) - p.l20,
            l1,
            l2,
            l2_roots: roots,
            theta2,
            ls,
        })
    }
}

/// Target-dependent constants of the CI-1 reduction.
#[derive(Debug, Clone, Copy)]
struct Ci1Problem {
    params: StructuralParams,
    c: [f64; 4],
    d: [f64; 4],
}

impl Ci1Problem {
    fn new(target: &Pose, params: &StructuralParams) -> Self {
        let p = target.position;
        let a = target.approach();
        let (lg, lr) = (params.lg, params.lr);
        let pa = p.dot(&a);
        let c1 = -2.0 * (pa - lg + lr);
        let c2 = p.dot(&(p - 2.0 * lg * a)) + lg * lg - lr * lr;
        let c3 = 2.0 * (1.0 - a.z);
        let c4 = 2.0 * (p.z - a.z * lg + lr);
        let d1 = c1 + c4 + c3 * lr;
        let d2 = c4 + c1 * a.z - c3 * (pa - lg);
        let d3 = c2 + c4 * lr;
        let d4 = c2 * a.z - c4 * (pa - lg);
        Self {
            params: *params,
            c: [c1, c2, c3, c4],
            d: [d1, d2, d3, d4],
        }
    }

    fn eval(&self, theta2: f64) -> std::result::Result<Ci1Residual, ResidualFault> {
        if !(theta2 > 0.0 && theta2 < PI) {
            return Err(ResidualFault::Domain);
        }
        let [c1, c2, c3, c4] = self.c;
        let [d1, d2, d3, d4] = self.d;
        let l2 = self.params.l20 * tan_half_ratio(theta2);
        let den = c3 * l2 + c4;
        let num = c1 * l2 + c2;
        if den.abs() <= 1e-12 * (num.abs() + 1.0) {
            return Err(ResidualFault::Pole);
        }
        let cos2 = theta2.cos();
        let value = c3 * (cos2 + 1.0) * l2 * l2 + d1 * l2 * cos2 + d2 * l2 + d3 * cos2 + d4;
        Ok(Ci1Residual {
            value,
            l1: num / den,
            l2,
        })
    }
}

/// CI-2 scalar residual at `θ1` for the chosen `l2` root.
pub fn residual_ci2(
    theta1: f64,
    target: &Pose,
    params: &StructuralParams,
    root: L2Root,
) -> std::result::Result<Ci2Residual, ResidualFault> {
    Ci2Problem::new(target, params).eval(theta1, root)
}

/// CI-1 scalar residual at `θ2`.
pub fn residual_ci1(
    theta2: f64,
    target: &Pose,
    params: &StructuralParams,
) -> std::result::Result<Ci1Residual, ResidualFault> {
    Ci1Problem::new(target, params).eval(theta2)
}

/// Recovers `(φ, δ1, δ2)` from the line-segment shape and the two bending angles.
///
/// Straight segments get `δ = 0`; their rotational freedom is folded into `φ`.
pub fn recover_orientation_angles(
    shape: &LineSegmentShape,
    target: &Pose,
    theta1: f64,
    theta2: f64,
) -> Result<(f64, f64, f64)> {
    let straight1 = theta1 < STRAIGHT_EPS;
    let straight2 = theta2 < STRAIGHT_EPS;
    let beta1 = if straight1 {
        0.0
    } else {
        let (x, y) = (shape.p2.x, shape.p2.y);
        if x.hypot(y) == 0.0 {
            return Err(Error::Degenerate(
                "segment 1 is bent but its tip lies on the channel axis".into(),
            ));
        }
        y.atan2(x)
    };
    let m1: Matrix3<f64> = rot_y(-theta1) * rot_z(-beta1) * target.rotation;
    let diff = if straight2 {
        0.0
    } else {
        m1[(1, 2)].atan2(m1[(0, 2)])
    };
    let n = rot_y(-theta2) * rot_z(-diff) * m1;
    let off_z = n[(0, 2)]
        .abs()
        .max(n[(1, 2)].abs())
        .max(n[(2, 0)].abs())
        .max(n[(2, 1)].abs())
        .max((n[(2, 2)] - 1.0).abs());
    if off_z > 1e-6 {
        return Err(Error::Degenerate(format!(
            "recovered frame deviates from a z-rotation by {off_z:.3e}"
        )));
    }
    let delta2 = n[(1, 0)].atan2(n[(0, 0)]);
    let delta1 = delta2 + diff;
    let phi = beta1 + delta1;
    let delta1 = if straight1 { 0.0 } else { delta1 };
    let delta2 = if straight2 { 0.0 } else { delta2 };
    Ok((wrap_angle(phi), wrap_angle(delta1), wrap_angle(delta2)))
}

/// What a single Newton run ended with.
enum NewtonEnd {
    Converged(f64),
    Stalled,
    Overflow,
    Failed,
    /// The residual is undefined at the start.
    BadStart,
    OutOfBudget,
}

/// Shared state of one solve: iteration budget and what has been seen so far.
struct Search<'a> {
    settings: &'a SolverSettings,
    iterations: usize,
    saw_nonreal: bool,
    saw_real_violation: bool,
    /// Move undefined starts to a nearby defined point.
    probe_starts: bool,
}

impl<'a> Search<'a> {
    fn budget_left(&self) -> bool {
        self.iterations < self.settings.max_iterations
    }

    fn note_fault(&mut self, fault: ResidualFault) {
        if fault == ResidualFault::ComplexRoots {
            self.saw_nonreal = true;
        }
    }

    /// `x0` if the residual is defined there, otherwise the nearest point
    /// within [`START_PROBE_RANGE`] where it is.
    fn valid_start(
        &mut self,
        f: &dyn Fn(f64) -> std::result::Result<f64, ResidualFault>,
        x0: f64,
    ) -> Option<(f64, f64)> {
        let first_fault = match f(x0) {
            Ok(v) => return Some((x0, v)),
            Err(e) => e,
        };
        if !self.probe_starts {
            self.note_fault(first_fault);
            return None;
        }
        let steps = (START_PROBE_RANGE / START_PROBE_STEP) as usize;
        for k in 1..=steps {
            for x in [x0 - k as f64 * START_PROBE_STEP, x0 + k as f64 * START_PROBE_STEP] {
                if !(ITERATE_EPS..=PI - ITERATE_EPS).contains(&x) {
                    continue;
                }
                if let Ok(v) = f(x) {
                    return Some((x, v));
                }
            }
        }
        self.note_fault(first_fault);
        None
    }

    fn newton(
        &mut self,
        f: &dyn Fn(f64) -> std::result::Result<f64, ResidualFault>,
        x0: f64,
        threshold: f64,
    ) -> NewtonEnd {
        let lo = ITERATE_EPS;
        let hi = PI - ITERATE_EPS;
        let Some((mut x, mut fx)) = self.valid_start(f, x0.clamp(lo, hi)) else {
            return NewtonEnd::BadStart;
        };
        let mut upper_clamps = 0;
        loop {
            if fx.abs() < threshold {
                return NewtonEnd::Converged(x);
            }
            if !self.budget_left() {
                return NewtonEnd::OutOfBudget;
            }
            self.iterations += 1;

            let fp = f((x + DERIV_STEP).min(hi));
            let fm = f((x - DERIV_STEP).max(lo));
            let df = match (fp, fm) {
                (Ok(p), Ok(m)) => (p - m) / ((x + DERIV_STEP).min(hi) - (x - DERIV_STEP).max(lo)),
                (Ok(p), Err(_)) => (p - fx) / ((x + DERIV_STEP).min(hi) - x),
                (Err(_), Ok(m)) => (fx - m) / (x - (x - DERIV_STEP).max(lo)),
                (Err(e), Err(_)) => {
                    self.note_fault(e);
                    return NewtonEnd::Failed;
                }
            };
            if !(df.is_finite() && df != 0.0) {
                return NewtonEnd::Stalled;
            }
            let mut step = -fx / df;
            let mut accepted = None;
            let mut last_fault = None;
            for _ in 0..=MAX_BACKTRACKS {
                let mut xn = x + step;
                let clamped_high = xn > hi;
                xn = xn.clamp(lo, hi);
                match f(xn) {
                    Ok(v) if v.is_finite() => {
                        accepted = Some((xn, v, clamped_high));
                        break;
                    }
                    Ok(_) => {}
                    Err(e) => last_fault = Some(e),
                }
                step *= 0.5;
            }
            let Some((xn, fxn, clamped_high)) = accepted else {
                if let Some(e) = last_fault {
                    self.note_fault(e);
                }
                return NewtonEnd::Failed;
            };
            if clamped_high {
                upper_clamps += 1;
                if upper_clamps >= self.settings.theta_overflow_count {
                    self.saw_nonreal = true;
                    return NewtonEnd::Overflow;
                }
            } else {
                upper_clamps = 0;
            }
            let moved = (xn - x).abs();
            x = xn;
            fx = fxn;
            if moved < 1e-12 && fx.abs() >= threshold {
                return NewtonEnd::Stalled;
            }
        }
    }
}

/// A root of the scalar equation turned into a configuration.
struct Candidate {
    config: Config,
    branch: Option<L2Root>,
}

trait ScalarProblem {
    fn class(&self) -> ConfigClass;
    fn branches(&self) -> &[Option<L2Root>];
    fn value(&self, x: f64, branch: Option<L2Root>) -> std::result::Result<f64, ResidualFault>;
    /// Turns a root into an unclamped configuration; `None` for roots that do
    /// not correspond to a real shape.
    fn candidate(&self, x: f64, branch: Option<L2Root>, target: &Pose) -> Option<Candidate>;
    fn threshold(&self, settings: &SolverSettings) -> f64;
    fn theta_max(&self) -> f64;
}

struct Ci2Scalar {
    problem: Ci2Problem,
    order: [Option<L2Root>; 2],
}

impl ScalarProblem for Ci2Scalar {
    fn class(&self) -> ConfigClass {
        ConfigClass::Ci2
    }

    fn branches(&self) -> &[Option<L2Root>] {
        &self.order
    }

    fn value(&self, x: f64, branch: Option<L2Root>) -> std::result::Result<f64, ResidualFault> {
        self.problem
            .eval(x, branch.unwrap_or(L2Root::First))
            .map(|r| r.value)
    }

    fn candidate(&self, x: f64, branch: Option<L2Root>, target: &Pose) -> Option<Candidate> {
        let root = branch.unwrap_or(L2Root::First);
        let r = self.problem.eval(x, root).ok()?;
        let p = &self.problem.params;
        let shape = LineSegmentShape {
            p1: Vector3::new(0.0, 0.0, r.l1 + r.ls),
            p2: self.problem.q - r.l2 * self.problem.a,
            l1: r.l1,
            l2: r.l2,
        };
        let (phi, delta1, delta2) =
            recover_orientation_angles(&shape, target, x, r.theta2).ok()?;
        let _ = p;
        Some(Candidate {
            config: Config::Ci2(ConfigCi2 {
                ls: r.ls,
                phi,
                theta1: x,
                delta1,
                theta2: r.theta2,
                delta2,
            }),
            branch: Some(root),
        })
    }

    fn threshold(&self, settings: &SolverSettings) -> f64 {
        settings.residual_ci2
    }

    fn theta_max(&self) -> f64 {
        self.problem.params.theta1_max
    }
}

struct Ci1Scalar {
    problem: Ci1Problem,
    p: Vector3<f64>,
    a: Vector3<f64>,
}

impl ScalarProblem for Ci1Scalar {
    fn class(&self) -> ConfigClass {
        ConfigClass::Ci1
    }

    fn branches(&self) -> &[Option<L2Root>] {
        &[None]
    }

    fn value(&self, x: f64, _: Option<L2Root>) -> std::result::Result<f64, ResidualFault> {
        self.problem.eval(x).map(|r| r.value)
    }

    fn candidate(&self, x: f64, _: Option<L2Root>, target: &Pose) -> Option<Candidate> {
        let r = self.problem.eval(x).ok()?;
        let params = &self.problem.params;
        let l1r2 = r.l1 + params.lr + r.l2;
        let p1 = Vector3::new(0.0, 0.0, r.l1);
        let p2 = self.p - (r.l2 + params.lg) * self.a;
        let d = p2 - p1;
        if !(l1r2 > 0.0) || (d.norm() - l1r2).abs() > 1e-6 * (1.0 + l1r2) {
            return None;
        }
        let theta1 = d.xy().norm().atan2(d.z);
        let theta2 = d.cross(&self.a).norm().atan2(d.dot(&self.a));
        let shape = LineSegmentShape {
            p1,
            p2,
            l1: r.l1,
            l2: r.l2,
        };
        let (phi, delta1, delta2) = recover_orientation_angles(&shape, target, theta1, theta2).ok()?;
        Some(Candidate {
            config: Config::Ci1(ConfigCi1 {
                phi,
                theta1,
                l1: r.l1 * arc_factor(theta1),
                delta1,
                theta2,
                delta2,
            }),
            branch: None,
        })
    }

    fn threshold(&self, settings: &SolverSettings) -> f64 {
        settings.residual_ci1
    }

    fn theta_max(&self) -> f64 {
        self.problem.params.theta2_max
    }
}

/// Solves a CI-2 target.
pub fn solve_ci2(target: &Pose, params: &StructuralParams, settings: &SolverSettings) -> IkOutcome {
    solve_with_hint(target, ConfigClass::Ci2, params, settings, None)
}

/// Solves a CI-1 target.
pub fn solve_ci1(target: &Pose, params: &StructuralParams, settings: &SolverSettings) -> IkOutcome {
    solve_with_hint(target, ConfigClass::Ci1, params, settings, None)
}

pub fn solve(
    target: &Pose,
    class: ConfigClass,
    params: &StructuralParams,
    settings: &SolverSettings,
) -> IkOutcome {
    solve_with_hint(target, class, params, settings, None)
}

/// Like [`solve`], but tries `hint` as the first initial guess for the
/// scalar unknown (`θ1` for CI-2, `θ2` for CI-1).
pub fn solve_with_hint(
    target: &Pose,
    class: ConfigClass,
    params: &StructuralParams,
    settings: &SolverSettings,
    hint: Option<f64>,
) -> IkOutcome {
    if target.require_valid().is_err() {
        return IkOutcome::failed(IkStatus::NoConvergence, 0);
    }
    if let Some(out) = solve_straight(target, class, params, settings) {
        return out;
    }
    let a = target.approach();
    match class {
        ConfigClass::Ci2 => {
            let problem = Ci2Problem::new(target, params);
            let guess = a.z.abs().min(1.0).acos();
            // Prefer the root with moderate bending at the initial guess.
            let first = match problem.eval(guess.max(ITERATE_EPS), L2Root::First) {
                Ok(r) => {
                    let [x, y] = r.l2_roots;
                    let score = |l: f64| {
                        if l > 0.0 && l.is_finite() {
                            (l - 0.5 * params.l20).abs()
                        } else {
                            f64::INFINITY
                        }
                    };
                    if score(y) < score(x) {
                        L2Root::Second
                    } else {
                        L2Root::First
                    }
                }
                Err(_) => L2Root::First,
            };
            let scalar = Ci2Scalar {
                problem,
                order: [Some(first), Some(first.other())],
            };
            run(&scalar, target, params, settings, hint, guess)
        }
        ConfigClass::Ci1 => {
            let scalar = Ci1Scalar {
                problem: Ci1Problem::new(target, params),
                p: target.position,
                a,
            };
            run(&scalar, target, params, settings, hint, 0.5 * params.theta2_max)
        }
    }
}

/// Targets on the channel axis pointing straight ahead are reached only by
/// the fully straight robot, where the scalar equations are singular.
fn solve_straight(
    target: &Pose,
    class: ConfigClass,
    params: &StructuralParams,
    settings: &SolverSettings,
) -> Option<IkOutcome> {
    let p = target.position;
    let a = target.approach();
    if 1.0 - a.z > 1e-12 || p.x.hypot(p.y) > 1e-9 {
        return None;
    }
    let r = &target.rotation;
    let phi = r[(1, 0)].atan2(r[(0, 0)]);
    let config = match class {
        ConfigClass::Ci2 => Config::Ci2(ConfigCi2 {
            ls: p.z - (params.l10 + params.lr + params.l20 + params.lg),
            phi,
            ..Default::default()
        }),
        ConfigClass::Ci1 => Config::Ci1(ConfigCi1 {
            phi,
            l1: p.z - (params.lr + params.l20 + params.lg),
            ..Default::default()
        }),
    };
    let status = if config.check_limits(params, LIMIT_SLACK).is_ok() {
        IkStatus::Solved
    } else if let Config::Ci1(c) = config {
        // A negative inserted length is not a real configuration.
        if c.l1 < 0.0 {
            return None;
        }
        IkStatus::InfeasibleOrientation
    } else {
        IkStatus::InfeasibleOrientation
    };
    if status != IkStatus::Solved {
        return Some(IkOutcome::failed(status, 0));
    }
    let mut config = config;
    config.clamp_to_limits(params);
    let pose = forward_kinematics_unchecked(params, &config);
    let pos = pose.position_error(target);
    let ori = pose.orientation_error(target);
    if pos >= settings.pos_tol || ori >= settings.ori_tol {
        return None;
    }
    Some(IkOutcome {
        status,
        config: Some(config),
        iterations: 0,
        position_error: pos,
        orientation_error: ori,
        branch_used: None,
        substitute_direction: None,
    })
}

fn run(
    problem: &dyn ScalarProblem,
    target: &Pose,
    params: &StructuralParams,
    settings: &SolverSettings,
    hint: Option<f64>,
    guess: f64,
) -> IkOutcome {
    let mut search = Search {
        settings,
        iterations: 0,
        saw_nonreal: false,
        saw_real_violation: false,
        probe_starts: false,
    };
    let restart = 0.9 * problem.theta_max();
    let mut starts: Vec<f64> = Vec::with_capacity(5);
    if let Some(h) = hint {
        starts.push(h);
    }
    starts.push(guess);
    starts.push(0.5 * problem.theta_max());
    starts.push(0.15 * problem.theta_max());
    starts.push(restart);

    let threshold = problem.threshold(settings);
    let mut tried_restart = vec![false; problem.branches().len()];
    let mut bad_starts: Vec<(f64, Option<L2Root>)> = Vec::new();
    for (si, &x0) in starts.iter().enumerate() {
        for (bi, &branch) in problem.branches().iter().enumerate() {
            // The stall restart is already covered by the explicit restart start.
            if si == starts.len() - 1 && tried_restart[bi] {
                continue;
            }
            let f = |x: f64| problem.value(x, branch);
            match search.newton(&f, x0, threshold) {
                NewtonEnd::Converged(x) => {
                    if let Some(out) = accept(problem, &mut search, x, branch, target, params) {
                        return out;
                    }
                }
                NewtonEnd::Stalled => {
                    if !tried_restart[bi] {
                        tried_restart[bi] = true;
                        if let NewtonEnd::Converged(x) = search.newton(&f, restart, threshold) {
                            if let Some(out) =
                                accept(problem, &mut search, x, branch, target, params)
                            {
                                return out;
                            }
                        }
                    }
                }
                NewtonEnd::OutOfBudget => return finish_failed(&search),
                NewtonEnd::BadStart => bad_starts.push((x0, branch)),
                NewtonEnd::Overflow | NewtonEnd::Failed => {}
            }
        }
    }
    // Starts that fell just outside a narrow defined interval.
    search.probe_starts = true;
    for (x0, branch) in bad_starts {
        let f = |x: f64| problem.value(x, branch);
        match search.newton(&f, x0, threshold) {
            NewtonEnd::Converged(x) => {
                if let Some(out) = accept(problem, &mut search, x, branch, target, params) {
                    return out;
                }
            }
            NewtonEnd::OutOfBudget => return finish_failed(&search),
            _ => {}
        }
    }
    scan(problem, &mut search, target, params)
}

/// Bracketing fallback: samples each branch over the whole iterate range and
/// refines every sign change.
fn scan(
    problem: &dyn ScalarProblem,
    search: &mut Search,
    target: &Pose,
    params: &StructuralParams,
) -> IkOutcome {
    let threshold = problem.threshold(search.settings);
    let lo = ITERATE_EPS;
    let hi = PI - ITERATE_EPS;
    for &branch in problem.branches() {
        let f = |x: f64| problem.value(x, branch).ok().filter(|v| v.is_finite());
        // Valid samples in order, with the edges of each valid interval
        // located by bisection so that narrow intervals are not missed.
        let mut samples: Vec<(f64, f64)> = Vec::with_capacity(SCAN_SAMPLES + 8);
        let mut prev_x = lo;
        let mut prev_valid = false;
        for i in 0..=SCAN_SAMPLES {
            let x = lo + (hi - lo) * i as f64 / SCAN_SAMPLES as f64;
            let v = match problem.value(x, branch) {
                Ok(v) if v.is_finite() => Some(v),
                Ok(_) => None,
                Err(e) => {
                    search.note_fault(e);
                    None
                }
            };
            if i > 0 && v.is_some() != prev_valid {
                let (good, bad) = if prev_valid { (prev_x, x) } else { (x, prev_x) };
                if let Some(edge) = domain_edge(&f, good, bad) {
                    samples.push(edge);
                    if prev_valid {
                        samples.push((f64::NAN, f64::NAN));
                    }
                }
            }
            if let Some(v) = v {
                samples.push((x, v));
            }
            prev_x = x;
            prev_valid = v.is_some();
        }
        for w in samples.windows(2) {
            let ((xa, fa), (xb, fb)) = (w[0], w[1]);
            if xa.is_nan() || xb.is_nan() || (fa.signum() == fb.signum() && fb != 0.0) {
                continue;
            }
            if !search.budget_left() {
                return finish_failed(search);
            }
            let g = |x: f64| f(x).unwrap_or(f64::NAN);
            if let Some((x, it)) = scalar::brent(g, xa, xb, 1e-14, 100) {
                search.iterations += it;
                let on_root = f(x).map(|v| v.abs() < threshold).unwrap_or(false);
                if on_root {
                    if let Some(out) = accept(problem, search, x, branch, target, params) {
                        return out;
                    }
                }
            }
        }
    }
    finish_failed(search)
}

/// Valid point closest to the boundary between `good` (valid) and `bad`.
fn domain_edge(f: &dyn Fn(f64) -> Option<f64>, good: f64, bad: f64) -> Option<(f64, f64)> {
    let (mut g, mut b) = (good, bad);
    let mut fg = f(g)?;
    for _ in 0..48 {
        let m = 0.5 * (g + b);
        match f(m) {
            Some(v) => {
                g = m;
                fg = v;
            }
            None => b = m,
        }
    }
    Some((g, fg))
}

fn finish_failed(search: &Search) -> IkOutcome {
    let status = if search.saw_real_violation {
        IkStatus::InfeasibleOrientation
    } else if search.saw_nonreal {
        IkStatus::NonRealSolution
    } else {
        IkStatus::NoConvergence
    };
    IkOutcome::failed(status, search.iterations)
}

/// Checks a converged root; returns the final outcome if it is a valid solution.
fn accept(
    problem: &dyn ScalarProblem,
    search: &mut Search,
    x: f64,
    branch: Option<L2Root>,
    target: &Pose,
    params: &StructuralParams,
) -> Option<IkOutcome> {
    let settings = search.settings;
    let cand = problem.candidate(x, branch, target)?;
    if cand.config.check_limits(params, LIMIT_SLACK).is_err() {
        if cand.config.theta1() < PI && cand.config.theta2() < PI {
            let pose = forward_kinematics_unchecked(params, &cand.config);
            if pose.position_error(target) < REAL_ROOT_POSITION_CHECK {
                search.saw_real_violation = true;
            }
        }
        return None;
    }
    let mut config = cand.config;
    config.clamp_to_limits(params);
    let pose = forward_kinematics_unchecked(params, &config);
    let (mut pos, mut ori) = (pose.position_error(target), pose.orientation_error(target));
    if pos >= settings.pos_tol || ori >= settings.ori_tol {
        // The residual threshold was too loose for this target: tighten it.
        let tight = problem.threshold(settings) * 1e-4;
        let f = |t: f64| problem.value(t, branch);
        let NewtonEnd::Converged(xp) = search.newton(&f, x, tight) else {
            return None;
        };
        let polished = problem.candidate(xp, branch, target)?;
        if polished.config.check_limits(params, LIMIT_SLACK).is_err() {
            return None;
        }
        config = polished.config;
        config.clamp_to_limits(params);
        let pose = forward_kinematics_unchecked(params, &config);
        pos = pose.position_error(target);
        ori = pose.orientation_error(target);
        if pos >= settings.pos_tol || ori >= settings.ori_tol {
            return None;
        }
    }
    Some(IkOutcome {
        status: IkStatus::Solved,
        config: Some(config),
        iterations: search.iterations,
        position_error: pos,
        orientation_error: ori,
        branch_used: cand.branch.filter(|_| problem.class() == ConfigClass::Ci2),
        substitute_direction: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::forward_kinematics;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> StructuralParams {
        StructuralParams::default()
    }

    fn ci2(ls: f64, phi: f64, t1: f64, d1: f64, t2: f64, d2: f64) -> Config {
        Config::Ci2(ConfigCi2 {
            ls,
            phi,
            theta1: t1,
            delta1: d1,
            theta2: t2,
            delta2: d2,
        })
    }

    #[test]
    fn ci2_residual_vanishes_at_generating_angle() {
        let p = params();
        let c = ci2(30.0, 0.4, 0.9, -1.2, 1.3, 2.0);
        let target = forward_kinematics(&p, &c).unwrap();
        let best = [L2Root::First, L2Root::Second]
            .iter()
            .filter_map(|&r| residual_ci2(0.9, &target, &p, r).ok())
            .map(|r| r.value.abs())
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-9, "{best}");
    }

    #[test]
    fn ci2_residual_reports_complex_roots_out_of_reach() {
        let p = params();
        // Pointing sideways, far outside the reach of the robot.
        let rot = crate::model::rot_axis(&Vector3::x_axis(), -PI / 2.0);
        let target = Pose::new(Vector3::new(400.0, 0.0, 50.0), rot);
        let err = residual_ci2(0.5, &target, &p, L2Root::First).unwrap_err();
        assert_eq!(err, ResidualFault::ComplexRoots);
    }

    #[test]
    fn ci1_residual_vanishes_at_generating_angle() {
        let p = params();
        let c = Config::Ci1(ConfigCi1 {
            phi: -0.3,
            theta1: 0.7,
            l1: 35.0,
            delta1: 0.5,
            theta2: 1.6,
            delta2: -2.2,
        });
        let target = forward_kinematics(&p, &c).unwrap();
        let r = residual_ci1(1.6, &target, &p).unwrap();
        assert!(r.value.abs() < 1e-8, "{}", r.value);
        let expected_l1 = crate::model::virtual_length(35.0, 0.7).unwrap();
        assert!((r.l1 - expected_l1).abs() < 1e-9);
    }

    #[test]
    fn ci1_residual_axis_aligned_direction() {
        // a = z makes the l1 expression affine in l2; residual stays finite.
        let p = params();
        let target = Pose::new(Vector3::new(20.0, 5.0, 120.0), Matrix3::identity());
        for i in 1..100 {
            let t = i as f64 * 0.03;
            assert!(residual_ci1(t, &target, &p).unwrap().value.is_finite());
        }
    }

    #[test]
    fn straight_targets() {
        let p = params();
        let s = SolverSettings::default();
        let z = p.l10 + p.lr + p.l20 + p.lg + 25.0;
        let target = Pose::new(Vector3::new(0.0, 0.0, z), rot_z(0.3));
        let out = solve_ci2(&target, &p, &s);
        assert_eq!(out.status, IkStatus::Solved);
        let Some(Config::Ci2(c)) = out.config else {
            panic!()
        };
        assert!((c.ls - 25.0).abs() < 1e-9);
        assert_eq!((c.theta1, c.theta2), (0.0, 0.0));
        assert!((c.phi - 0.3).abs() < 1e-12);

        let z = p.lr + p.l20 + p.lg + 10.0;
        let target = Pose::new(Vector3::new(0.0, 0.0, z), Matrix3::identity());
        let out = solve_ci1(&target, &p, &s);
        assert_eq!(out.status, IkStatus::Solved);
    }

    #[test]
    fn planar_configuration_recovers_equal_deltas() {
        let p = params();
        let c = ci2(20.0, 0.0, 0.8, 0.6, 1.1, 0.6);
        let target = forward_kinematics(&p, &c).unwrap();
        let out = solve_ci2(&target, &p, &SolverSettings::default());
        let Some(Config::Ci2(s)) = out.config else {
            panic!("{out:?}")
        };
        assert!((s.delta1 - s.delta2).abs() < 1e-6);
    }

    #[test]
    fn roundtrip_small_corpus() {
        let p = params();
        let s = SolverSettings::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let t1 = rng.gen_range(0.0..p.theta1_max);
            let t2 = rng.gen_range(0.0..p.theta2_max);
            let c = ci2(
                rng.gen_range(0.0..p.ls_max),
                rng.gen_range(-PI..PI),
                t1,
                rng.gen_range(-PI..PI),
                t2,
                rng.gen_range(-PI..PI),
            );
            let target = forward_kinematics(&p, &c).unwrap();
            let out = solve_ci2(&target, &p, &s);
            assert!(out.is_solved(), "{c:?} -> {out:?}");
            let c1 = Config::Ci1(ConfigCi1 {
                phi: rng.gen_range(-PI..PI),
                theta1: t1,
                l1: rng.gen_range(p.r1_min * t1..=p.l10),
                delta1: rng.gen_range(-PI..PI),
                theta2: t2,
                delta2: rng.gen_range(-PI..PI),
            });
            let target = forward_kinematics(&p, &c1).unwrap();
            let out = solve_ci1(&target, &p, &s);
            assert!(out.is_solved(), "{c1:?} -> {out:?}");
        }
    }

    #[test]
    fn theta1_beyond_limit_is_infeasible() {
        let p = params();
        let mut limited = p;
        limited.theta1_max = 1.0;
        let c = ci2(40.0, 0.0, 1.3, 0.0, 0.4, 0.0);
        let target = forward_kinematics(&p, &c).unwrap();
        let out = solve_ci2(&target, &limited, &SolverSettings::default());
        assert_eq!(out.status, IkStatus::InfeasibleOrientation, "{out:?}");
    }
}
