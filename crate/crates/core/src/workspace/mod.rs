//! Dexterous-workspace boundaries at a fixed end-effector position.
//!
//! Directions are studied in the symmetry frame `{s}`: the world frame turned
//! about `ẑ_w` until the target position lies in its XZ half-plane. Because
//! the bending directions are unlimited, the set of reachable pointing
//! directions is mirror-symmetric about that plane, so it is represented by
//! its projection onto the unit disk `(a_sx, a_sz)`.
//!
//! Type-I boundaries are where a configuration variable sits at a limit;
//! type-II boundaries are folds of the map from configuration to direction.

mod axial;
mod ci1;
mod ci2;
mod closest;
pub(crate) mod contour;
mod export;
mod raster;
mod region;

use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::model::{rot_z, Config, ConfigClass, Pose, StructuralParams};
use crate::vsik::{self, IkStatus, SolverSettings};

pub use closest::{
    closest_feasible_direction, solve_with_fallback, ClosestDirection, FALLBACK_INSET,
};
pub use export::{read_boundary_csv, read_boundary_json, write_boundary_set, BoundaryCsvRow};
pub use region::DexterousRegion;

/// Default number of increments per sweep parameter.
pub const DEFAULT_SAMPLES: usize = 600;

/// Position below this distance (mm) from the channel axis is treated as on-axis.
const AXIAL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryFrame {
    /// Rotation about `ẑ_w` taking `{w}` to `{s}`.
    pub gamma: f64,
    /// Target position in `{s}`; `p_s.y` is zero.
    pub p_s: Vector3<f64>,
    /// Target pointing direction in `{s}`.
    pub a_s: Vector3<f64>,
    /// The position lies on the channel axis; the workspace is then
    /// rotationally symmetric and every boundary is a horizontal circle.
    pub axial: bool,
}

impl SymmetryFrame {
    /// Frame for a position alone (`a_s` is set to `ẑ`).
    pub fn for_position(position: &Vector3<f64>) -> Self {
        let radial = position.x.hypot(position.y);
        let axial = radial < AXIAL_EPS;
        let gamma = if axial {
            0.0
        } else {
            position.y.atan2(position.x)
        };
        Self {
            gamma,
            p_s: Vector3::new(if axial { 0.0 } else { radial }, 0.0, position.z),
            a_s: Vector3::z(),
            axial,
        }
    }

    /// Disk coordinates `(a_sx, a_sz)` of the target direction.
    pub fn disk_point(&self) -> (f64, f64) {
        (self.a_s.x, self.a_s.z)
    }

    /// Maps a world direction into `{s}`.
    pub fn to_frame(&self, world: &Vector3<f64>) -> Vector3<f64> {
        rot_z(-self.gamma) * world
    }

    /// Lifts a disk point back to a world direction on the hemisphere
    /// selected by the sign of `y_sign`.
    pub fn lift(&self, a_sx: f64, a_sz: f64, y_sign: f64) -> Vector3<f64> {
        let a_sy = (1.0 - a_sx * a_sx - a_sz * a_sz).max(0.0).sqrt();
        let a_sy = if y_sign < 0.0 { -a_sy } else { a_sy };
        rot_z(self.gamma) * Vector3::new(a_sx, a_sy, a_sz)
    }
}

/// Rotates the target into the symmetry frame.
pub fn to_symmetry_frame(target: &Pose) -> SymmetryFrame {
    let mut frame = SymmetryFrame::for_position(&target.position);
    frame.a_s = frame.to_frame(&target.approach());
    frame
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryKind {
    /// CI-1: `θ2 = θ2max`. CI-2: `θ1 = θ1max`.
    #[serde(rename = "type_i_1")]
    TypeI1,
    /// CI-1: `θ1 = θ1max`. CI-2: `θ2 = θ2max`.
    #[serde(rename = "type_i_2")]
    TypeI2,
    /// CI-1: `L1 = r1min·θ1` (including the `L1 = 0` dot). CI-2: `Ls = 0`.
    #[serde(rename = "type_i_3")]
    TypeI3,
    /// CI-1: `L1 = L10`. CI-2: `Ls = Lsmax`.
    #[serde(rename = "type_i_4")]
    TypeI4,
    #[serde(rename = "type_ii")]
    TypeII,
}

impl BoundaryKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryKind::TypeI1 => "type_i_1",
            BoundaryKind::TypeI2 => "type_i_2",
            BoundaryKind::TypeI3 => "type_i_3",
            BoundaryKind::TypeI4 => "type_i_4",
            BoundaryKind::TypeII => "type_ii",
        }
    }

    pub fn is_type_one(&self) -> bool {
        *self != BoundaryKind::TypeII
    }
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BoundaryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "type_i_1" => BoundaryKind::TypeI1,
            "type_i_2" => BoundaryKind::TypeI2,
            "type_i_3" => BoundaryKind::TypeI3,
            "type_i_4" => BoundaryKind::TypeI4,
            "type_ii" => BoundaryKind::TypeII,
            other => return Err(format!("unknown boundary kind `{other}`")),
        })
    }
}

/// Parameter that drives a boundary curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Theta1,
    Theta2,
    /// The direction's z component (on-axis positions).
    Az,
}

/// One sampled boundary point with the bending angles that produce it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    /// Value of the driving parameter.
    pub sweep: f64,
    pub a_sx: f64,
    pub a_sz: f64,
    pub theta1: f64,
    pub theta2: f64,
    /// Root of the direction quadratic the point lies on (CI-2); always 1 for CI-1.
    #[serde(default = "default_sheet")]
    pub sheet: i8,
}

fn default_sheet() -> i8 {
    1
}

/// A contiguous polyline of feasible boundary points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub kind: BoundaryKind,
    pub driving_param: SweepParam,
    pub points: Vec<BoundaryPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySet {
    pub config_class: ConfigClass,
    pub position: [f64; 3],
    pub gamma: f64,
    pub axial: bool,
    /// Each kind may contribute several disjoint curves.
    pub curves: Vec<BoundaryCurve>,
    /// The feasible region has more than one connected component.
    pub disconnected: bool,
    /// Outlines of the feasible region in disk coordinates.
    #[serde(default)]
    pub regions: Vec<Vec<[f64; 2]>>,
}

impl BoundarySet {
    pub fn curves_of(&self, kind: BoundaryKind) -> impl Iterator<Item = &BoundaryCurve> {
        self.curves.iter().filter(move |c| c.kind == kind)
    }

    /// Smallest disk-coordinate distance from `(x, z)` to any boundary polyline.
    pub fn distance_to_boundary(&self, x: f64, z: f64) -> f64 {
        let mut best = f64::INFINITY;
        for curve in &self.curves {
            let pts = &curve.points;
            if pts.len() == 1 {
                best = best.min((pts[0].a_sx - x).hypot(pts[0].a_sz - z));
            }
            for w in pts.windows(2) {
                best = best.min(segment_distance(
                    (w[0].a_sx, w[0].a_sz),
                    (w[1].a_sx, w[1].a_sz),
                    (x, z),
                ));
            }
        }
        best
    }
}

fn segment_distance(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    let (dx, dz) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dz * dz;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dz) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a.0 + t * dx - p.0).hypot(a.1 + t * dz - p.1)
}

/// Slack below which a limit counts as satisfied.
pub(crate) const SLACK_TOL: f64 = 1e-9;

/// Accepted overshoot of `a_sx² + a_sz²` past the unit circle.
pub(crate) const DISK_TOL: f64 = 1e-9;

pub(crate) fn in_disk(p: (f64, f64)) -> bool {
    p.0.is_finite() && p.1.is_finite() && p.0 * p.0 + p.1 * p.1 <= 1.0 + DISK_TOL
}

/// Map from bending angles to disk points at one fixed position.
///
/// `inset` arguments move every configuration limit into the feasible range
/// by that amount (rad or mm); zero gives the exact limits.
pub(crate) trait Geometry {
    fn params(&self) -> &StructuralParams;

    /// Roots of the direction equation; CI-1 has a single one.
    fn sheets(&self) -> &'static [i8];

    /// Disk point for `(θ1, θ2)` on `sheet`, possibly outside the disk.
    fn raw_point(&self, t1: f64, t2: f64, sheet: i8) -> Option<(f64, f64)>;

    fn point(&self, t1: f64, t2: f64, sheet: i8) -> Option<(f64, f64)> {
        self.raw_point(t1, t2, sheet).filter(|&p| in_disk(p))
    }

    /// Smallest distance to a configuration limit; negative outside the
    /// limits, `None` when no configuration reaches the point.
    fn slack(&self, t1: f64, t2: f64, sheet: i8, inset: f64) -> Option<f64>;

    fn feasible_point(&self, t1: f64, t2: f64, sheet: i8, inset: f64) -> Option<BoundaryPoint> {
        let (a_sx, a_sz) = self.point(t1, t2, sheet)?;
        (self.slack(t1, t2, sheet, inset)? >= -SLACK_TOL).then_some(BoundaryPoint {
            sweep: f64::NAN,
            a_sx,
            a_sz,
            theta1: t1,
            theta2: t2,
            sheet,
        })
    }

    /// Feasible parts of every boundary, `n` increments per sweep.
    fn curves(&self, inset: f64, n: usize) -> Vec<BoundaryCurve>;

    /// Extra feasible points on `curve` near its point `idx`, at a finer spacing.
    fn refine(&self, curve: &BoundaryCurve, idx: usize, inset: f64) -> Vec<BoundaryPoint>;

    /// Draws every curve that can separate feasible from infeasible
    /// directions, ignoring all limits except the configuration box.
    fn draw_barriers(&self, raster: &mut raster::Raster);

    /// Disk points reached by feasible configurations.
    fn witnesses(&self, n: usize) -> Vec<(f64, f64)> {
        let p = self.params();
        let mut out = Vec::new();
        for &sheet in self.sheets() {
            for &t1 in &linspace(0.0, p.theta1_max, n) {
                for &t2 in &linspace(0.0, p.theta2_max, n) {
                    if let Some(b) = self.feasible_point(t1, t2, sheet, 0.0) {
                        out.push((b.a_sx, b.a_sz));
                    }
                }
            }
        }
        out
    }

    /// Configuration reaching `target` with the given bending angles;
    /// `target`'s pointing direction must be the point's direction.
    fn build_config(&self, t1: f64, t2: f64, sheet: i8, target: &Pose) -> Option<Config>;
}

pub(crate) fn geometry(
    frame: &SymmetryFrame,
    class: ConfigClass,
    params: &StructuralParams,
) -> Box<dyn Geometry> {
    match class {
        ConfigClass::Ci1 => Box::new(ci1::Ci1Geometry::new(frame.p_s.x, frame.p_s.z, params)),
        ConfigClass::Ci2 => Box::new(ci2::Ci2Geometry::new(frame.p_s.x, frame.p_s.z, params)),
    }
}

/// Samples `f` over `params` and splits the result into feasible runs.
pub(crate) fn sampled_curves(
    kind: BoundaryKind,
    driving_param: SweepParam,
    params: &[f64],
    f: impl Fn(f64) -> Option<BoundaryPoint>,
) -> Vec<BoundaryCurve> {
    let samples: Vec<Option<BoundaryPoint>> = params
        .iter()
        .map(|&s| f(s).map(|b| BoundaryPoint { sweep: s, ..b }))
        .collect();
    runs(&samples)
        .into_iter()
        .map(|points| BoundaryCurve {
            kind,
            driving_param,
            points,
        })
        .collect()
}

/// Sweep values strictly between the neighbours of `idx`, for refinement.
pub(crate) fn sweep_neighbourhood(curve: &BoundaryCurve, idx: usize, n: usize) -> Vec<f64> {
    let pts = &curve.points;
    let lo = pts[idx.saturating_sub(1)].sweep;
    let hi = pts[(idx + 1).min(pts.len() - 1)].sweep;
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    // Runs end at the last feasible sample; look one step beyond too.
    let step = (hi - lo).max(1e-12) / 2.0;
    linspace(lo - step, hi + step, n)
}

/// Polyline pieces of a sampled curve: runs of consecutive valid samples.
pub(crate) fn runs<T: Copy>(samples: &[Option<T>]) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for s in samples {
        match s {
            Some(v) => cur.push(*v),
            None => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Evenly spaced values from `a` to `b` inclusive.
pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Boundary curves for the given position, `n_samples` increments per sweep.
pub fn boundary_set(
    position: &Vector3<f64>,
    class: ConfigClass,
    params: &StructuralParams,
    n_samples: usize,
) -> BoundarySet {
    DexterousRegion::compute(position, class, params, n_samples).into_boundaries()
}

/// Bending-angle samples per axis for [`position_reachable`].
const REACH_GRID: usize = 40;

/// Whether some configuration within the limits places the end effector at
/// `position`, whatever its orientation. Decided on a grid of bending
/// angles, so positions reached only by a sliver of the box may be missed.
pub fn position_reachable(position: &Vector3<f64>, class: ConfigClass, params: &StructuralParams) -> bool {
    let frame = SymmetryFrame::for_position(position);
    if frame.axial {
        return !axial::bands(class, frame.p_s.z, params, 0.0).is_empty();
    }
    !geometry(&frame, class, params).witnesses(REACH_GRID).is_empty()
}

/// Feasibility class of a target direction, as seen by the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DirectionClass {
    Feasible,
    /// Beyond a configuration limit, inside the type-II envelope.
    InfeasibleTypeI,
    /// Beyond the type-II envelope.
    InfeasibleTypeII,
}

/// Classifies a target's direction from the VS-IK outcome: a limit-violating
/// real solution puts it on the type-I side, a non-real or non-convergent
/// solve beyond the type-II boundary.
pub fn classify_direction(
    target: &Pose,
    params: &StructuralParams,
    class: ConfigClass,
) -> DirectionClass {
    match vsik::solve(target, class, params, &SolverSettings::default()).status {
        IkStatus::Solved => DirectionClass::Feasible,
        IkStatus::InfeasibleOrientation => DirectionClass::InfeasibleTypeI,
        IkStatus::NonRealSolution | IkStatus::NoConvergence => DirectionClass::InfeasibleTypeII,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    #[test]
    fn symmetry_frame_cases() {
        let f = to_symmetry_frame(&Pose::new(Vector3::new(3.0, 4.0, 10.0), Matrix3::identity()));
        assert!((f.p_s - Vector3::new(5.0, 0.0, 10.0)).norm() < 1e-12);
        assert!(!f.axial);

        let f = to_symmetry_frame(&Pose::new(Vector3::new(2.0, 0.0, 1.0), Matrix3::identity()));
        assert_eq!(f.gamma, 0.0);

        let f = to_symmetry_frame(&Pose::new(Vector3::new(0.0, 0.0, 100.0), Matrix3::identity()));
        assert!(f.axial);
        assert_eq!(f.gamma, 0.0);
    }

    #[test]
    fn lift_then_project_is_identity() {
        let f = SymmetryFrame::for_position(&Vector3::new(-20.0, 35.0, 90.0));
        for &(x, z) in &[(0.3, -0.2), (-0.7, 0.1), (0.0, 0.99), (0.5, 0.5)] {
            for sign in [1.0, -1.0] {
                let w = f.lift(x, z, sign);
                let s = f.to_frame(&w);
                assert!((s.x - x).abs() < 1e-12 && (s.z - z).abs() < 1e-12);
                assert!((w.norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}
