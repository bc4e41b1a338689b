//! Domain types, forward kinematics and the line-segment shape representation.
//!
//! Each bending segment is a constant-curvature arc described by its length
//! `L`, bending angle `θ` and bending direction `δ`. The segment end frame
//! relative to its base is `Rot(z, −δ)·Rot(y, θ)·Rot(z, δ)`; the tip position
//! lies in the same bending plane, `Rot(z, −δ)·(L/θ)[1 − cos θ, 0, sin θ]ᵀ`.
//!
//! For the inverse problem an arc is replaced by the two lines tangent to it
//! at its ends. Each tangent line has the *virtual length*
//! `l = L·tan(θ/2)/θ`, which is what decouples the configuration variables.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::{scalar, Error, Result};

/// Below this bending angle the ratio `tan(θ/2)/θ` is evaluated by series.
const SERIES_THRESHOLD: f64 = 1e-4;

/// Fixed geometry and joint limits of the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralParams {
    /// Full length of segment 1.
    #[serde(rename = "L10")]
    pub l10: f64,
    /// Full length of segment 2.
    #[serde(rename = "L20")]
    pub l20: f64,
    /// Rigid middle stem.
    #[serde(rename = "Lr")]
    pub lr: f64,
    /// End effector length.
    #[serde(rename = "Lg")]
    pub lg: f64,
    /// Upper limit of the base-stem insertion.
    #[serde(rename = "Ls_max")]
    pub ls_max: f64,
    pub theta1_max: f64,
    pub theta2_max: f64,
    /// Minimum bending radius of segment 1.
    pub r1_min: f64,
}

impl Default for StructuralParams {
    fn default() -> Self {
        Self {
            l10: 40.0,
            l20: 60.0,
            lr: 20.0,
            lg: 20.0,
            ls_max: 150.0,
            theta1_max: PI / 2.0,
            theta2_max: 2.0 * PI / 3.0,
            r1_min: 80.0 / PI,
        }
    }
}

const PARAM_KEYS: [&str; 8] = [
    "L10",
    "L20",
    "Lr",
    "Lg",
    "Ls_max",
    "theta1_max",
    "theta2_max",
    "r1_min",
];

impl StructuralParams {
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("L10", self.l10),
            ("L20", self.l20),
            ("Lr", self.lr),
            ("Lg", self.lg),
            ("Ls_max", self.ls_max),
            ("r1_min", self.r1_min),
        ];
        for (name, v) in lengths {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [("theta1_max", self.theta1_max), ("theta2_max", self.theta2_max)] {
            if !(v > 0.0 && v < PI) {
                return Err(Error::InvalidParams(format!(
                    "{name} must lie in (0, π), got {v}"
                )));
            }
        }
        Ok(())
    }

    fn get_mut(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "L10" => &mut self.l10,
            "L20" => &mut self.l20,
            "Lr" => &mut self.lr,
            "Lg" => &mut self.lg,
            "Ls_max" => &mut self.ls_max,
            "theta1_max" => &mut self.theta1_max,
            "theta2_max" => &mut self.theta2_max,
            "r1_min" => &mut self.r1_min,
            _ => return None,
        })
    }

    /// Parses a flat `key = value` document. Keys that are absent keep their
    /// default value; `#` starts a comment; `:` is accepted in place of `=`.
    pub fn from_kv_str(text: &str) -> std::result::Result<Self, String> {
        let mut params = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| format!("line {}: expected `key = value`", lineno + 1))?;
            let key = key.trim();
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|e| format!("line {}: bad value for {key}: {e}", lineno + 1))?;
            let slot = params.get_mut(key).ok_or_else(|| {
                format!(
                    "line {}: unknown key `{key}` (expected one of {})",
                    lineno + 1,
                    PARAM_KEYS.join(", ")
                )
            })?;
            *slot = value;
        }
        params.validate().map_err(|e| e.to_string())?;
        Ok(params)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn to_kv_string(&self) -> String {
        let values = [
            self.l10,
            self.l20,
            self.lr,
            self.lg,
            self.ls_max,
            self.theta1_max,
            self.theta2_max,
            self.r1_min,
        ];
        PARAM_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// Robot configuration class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfigClass {
    /// Segment 1 partially inserted (variable length), segment 2 inextensible.
    Ci1,
    /// Both segments inextensible, base stem translates along the channel.
    Ci2,
}

impl fmt::Display for ConfigClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConfigClass::Ci1 => "ci1",
            ConfigClass::Ci2 => "ci2",
        })
    }
}

impl std::str::FromStr for ConfigClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "ci1" => Ok(ConfigClass::Ci1),
            "ci2" => Ok(ConfigClass::Ci2),
            other => Err(format!("unknown configuration class `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConfigCi1 {
    pub phi: f64,
    pub theta1: f64,
    /// Inserted length of segment 1.
    pub l1: f64,
    pub delta1: f64,
    pub theta2: f64,
    pub delta2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConfigCi2 {
    /// Base-stem insertion.
    pub ls: f64,
    pub phi: f64,
    pub theta1: f64,
    pub delta1: f64,
    pub theta2: f64,
    pub delta2: f64,
}

/// A configuration of either class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "lowercase")]
pub enum Config {
    Ci1(ConfigCi1),
    Ci2(ConfigCi2),
}

/// Which configuration limit a configuration breaks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitViolation {
    Theta1,
    Theta2,
    Ls,
    L1Max,
    L1BendingRadius,
}

impl Config {
    pub fn class(&self) -> ConfigClass {
        match self {
            Config::Ci1(_) => ConfigClass::Ci1,
            Config::Ci2(_) => ConfigClass::Ci2,
        }
    }

    /// Variables in solver order: `[φ, θ1, L1, δ1, θ2, δ2]` for CI-1 and
    /// `[Ls, φ, θ1, δ1, θ2, δ2]` for CI-2.
    pub fn to_array(&self) -> [f64; 6] {
        match *self {
            Config::Ci1(c) => [c.phi, c.theta1, c.l1, c.delta1, c.theta2, c.delta2],
            Config::Ci2(c) => [c.ls, c.phi, c.theta1, c.delta1, c.theta2, c.delta2],
        }
    }

    pub fn from_array(class: ConfigClass, q: [f64; 6]) -> Self {
        match class {
            ConfigClass::Ci1 => Config::Ci1(ConfigCi1 {
                phi: q[0],
                theta1: q[1],
                l1: q[2],
                delta1: q[3],
                theta2: q[4],
                delta2: q[5],
            }),
            ConfigClass::Ci2 => Config::Ci2(ConfigCi2 {
                ls: q[0],
                phi: q[1],
                theta1: q[2],
                delta1: q[3],
                theta2: q[4],
                delta2: q[5],
            }),
        }
    }

    pub fn theta1(&self) -> f64 {
        match self {
            Config::Ci1(c) => c.theta1,
            Config::Ci2(c) => c.theta1,
        }
    }

    pub fn theta2(&self) -> f64 {
        match self {
            Config::Ci1(c) => c.theta2,
            Config::Ci2(c) => c.theta2,
        }
    }

    /// Checks every configuration invariant with an absolute slack `tol`
    /// (same unit as the variable being checked).
    pub fn check_limits(
        &self,
        params: &StructuralParams,
        tol: f64,
    ) -> std::result::Result<(), LimitViolation> {
        let (t1, t2) = (self.theta1(), self.theta2());
        if !(t1 >= -tol && t1 <= params.theta1_max + tol) {
            return Err(LimitViolation::Theta1);
        }
        if !(t2 >= -tol && t2 <= params.theta2_max + tol) {
            return Err(LimitViolation::Theta2);
        }
        match self {
            Config::Ci1(c) => {
                if !(c.l1 <= params.l10 + tol) {
                    return Err(LimitViolation::L1Max);
                }
                if !(c.l1 >= params.r1_min * c.theta1.max(0.0) - tol) {
                    return Err(LimitViolation::L1BendingRadius);
                }
            }
            Config::Ci2(c) => {
                if !(c.ls >= -tol && c.ls <= params.ls_max + tol) {
                    return Err(LimitViolation::Ls);
                }
            }
        }
        Ok(())
    }

    /// Pulls values that sit within rounding of a limit back onto it.
    pub fn clamp_to_limits(&mut self, params: &StructuralParams) {
        match self {
            Config::Ci1(c) => {
                c.theta1 = c.theta1.clamp(0.0, params.theta1_max);
                c.theta2 = c.theta2.clamp(0.0, params.theta2_max);
                c.l1 = c.l1.clamp(params.r1_min * c.theta1, params.l10);
            }
            Config::Ci2(c) => {
                c.theta1 = c.theta1.clamp(0.0, params.theta1_max);
                c.theta2 = c.theta2.clamp(0.0, params.theta2_max);
                c.ls = c.ls.clamp(0.0, params.ls_max);
            }
        }
    }
}

/// End-effector pose: position and an orthonormal frame whose columns are
/// `n`, `s`, `a`. The third column `a` is the pointing direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "PoseRepr", try_from = "PoseRepr")]
pub struct Pose {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

/// Row-major on-disk form of a [`Pose`].
#[derive(Serialize, Deserialize)]
struct PoseRepr {
    position: [f64; 3],
    rotation: [[f64; 3]; 3],
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        let r = p.rotation;
        PoseRepr {
            position: [p.position.x, p.position.y, p.position.z],
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
        }
    }
}

impl TryFrom<PoseRepr> for Pose {
    type Error = String;

    fn try_from(r: PoseRepr) -> std::result::Result<Self, Self::Error> {
        let m = r.rotation;
        let pose = Pose {
            position: Vector3::from(r.position),
            rotation: Matrix3::new(
                m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
            ),
        };
        if !pose.is_orthonormal(1e-6) {
            return Err("rotation is not orthonormal with det = +1".into());
        }
        Ok(pose)
    }
}

impl Pose {
    pub fn new(position: Vector3<f64>, rotation: Matrix3<f64>) -> Self {
        Self { position, rotation }
    }

    /// The pointing direction `a`.
    pub fn approach(&self) -> Vector3<f64> {
        self.rotation.column(2).into_owned()
    }

    pub fn is_orthonormal(&self, tol: f64) -> bool {
        let r = &self.rotation;
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        err < tol && (r.determinant() - 1.0).abs() < tol
    }

    pub(crate) fn require_valid(&self) -> Result<()> {
        if !self.position.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidPose("non-finite position".into()));
        }
        if !self.is_orthonormal(1e-6) {
            return Err(Error::InvalidPose(
                "rotation is not orthonormal with det = +1".into(),
            ));
        }
        Ok(())
    }

    pub fn position_error(&self, other: &Pose) -> f64 {
        (self.position - other.position).norm()
    }

    /// Rotation angle between the two frames.
    pub fn orientation_error(&self, other: &Pose) -> f64 {
        rotation_angle(&(self.rotation.transpose() * other.rotation))
    }
}

/// Rotation matrix about a unit axis (Rodrigues formula).
pub fn rot_axis(axis: &Unit<Vector3<f64>>, alpha: f64) -> Matrix3<f64> {
    let k = axis.as_ref();
    let kx = k.cross_matrix();
    Matrix3::identity() + kx * alpha.sin() + kx * kx * (1.0 - alpha.cos())
}

pub(crate) fn rot_z(alpha: f64) -> Matrix3<f64> {
    let (s, c) = alpha.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub(crate) fn rot_y(alpha: f64) -> Matrix3<f64> {
    let (s, c) = alpha.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Angle of a rotation matrix, accurate near 0 and π.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let v = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    let sin = 0.5 * v.norm();
    let cos = 0.5 * (r.trace() - 1.0);
    sin.atan2(cos)
}

/// Axis-angle vector of a rotation matrix.
pub fn rotation_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let rot = nalgebra::Rotation3::from_matrix_unchecked(*r);
    UnitQuaternion::from_rotation_matrix(&rot).scaled_axis()
}

/// Smallest rotation taking unit vector `from` onto unit vector `to`.
pub fn minimal_rotation(from: &Vector3<f64>, to: &Vector3<f64>) -> Matrix3<f64> {
    let axis = from.cross(to);
    let sin = axis.norm();
    let cos = from.dot(to);
    if sin < 1e-15 {
        if cos > 0.0 {
            return Matrix3::identity();
        }
        // Antipodal: any perpendicular axis works.
        let helper = if from.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let perp = Unit::new_normalize(from.cross(&helper));
        return rot_axis(&perp, PI);
    }
    rot_axis(&Unit::new_unchecked(axis / sin), sin.atan2(cos))
}

/// Wraps an angle into `[−π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// `tan(θ/2)/θ`, continuous at 0 with value 1/2.
pub(crate) fn tan_half_ratio(theta: f64) -> f64 {
    if theta.abs() < SERIES_THRESHOLD {
        0.5 + theta * theta / 24.0
    } else {
        (0.5 * theta).tan() / theta
    }
}

/// Derivative of [`tan_half_ratio`].
pub(crate) fn tan_half_ratio_deriv(theta: f64) -> f64 {
    if theta.abs() < SERIES_THRESHOLD {
        theta / 12.0
    } else {
        let t = (0.5 * theta).tan();
        (0.5 * theta * (1.0 + t * t) - t) / (theta * theta)
    }
}

/// `θ/tan(θ/2)`, the arc-length to virtual-length factor; 2 at θ = 0.
pub(crate) fn arc_factor(theta: f64) -> f64 {
    1.0 / tan_half_ratio(theta)
}

fn check_bend(theta: f64) -> Result<()> {
    if !(0.0..PI).contains(&theta) {
        return Err(Error::Domain {
            name: "theta",
            value: theta,
            domain: "[0, π)",
        });
    }
    Ok(())
}

/// Pose of a segment end frame relative to its base frame.
pub fn segment_fk(length: f64, theta: f64, delta: f64) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    check_bend(theta)?;
    if !(length >= 0.0) {
        return Err(Error::Domain {
            name: "segment length",
            value: length,
            domain: "[0, ∞)",
        });
    }
    Ok(segment_fk_unchecked(length, theta, delta))
}

/// [`segment_fk`] without domain checks; also valid for negative `theta`,
/// which is the same arc as `(−θ, δ + π)`.
pub(crate) fn segment_fk_unchecked(
    length: f64,
    theta: f64,
    delta: f64,
) -> (Vector3<f64>, Matrix3<f64>) {
    let (planar_x, planar_z) = if theta.abs() < SERIES_THRESHOLD {
        let t2 = theta * theta;
        (
            length * theta * (0.5 - t2 / 24.0),
            length * (1.0 - t2 / 6.0),
        )
    } else {
        (
            length * (1.0 - theta.cos()) / theta,
            length * theta.sin() / theta,
        )
    };
    let (sd, cd) = delta.sin_cos();
    let position = Vector3::new(planar_x * cd, -planar_x * sd, planar_z);
    let rotation = rot_z(-delta) * rot_y(theta) * rot_z(delta);
    (position, rotation)
}

/// Virtual (tangent-line) length of a bent segment, `L·tan(θ/2)/θ`.
pub fn virtual_length(length: f64, theta: f64) -> Result<f64> {
    check_bend(theta)?;
    Ok(length * tan_half_ratio(theta))
}

/// Bending angle whose virtual length equals `l` for a segment of length `length`.
pub fn virtual_length_inverse(l: f64, length: f64) -> Result<f64> {
    if !(length > 0.0) {
        return Err(Error::Domain {
            name: "segment length",
            value: length,
            domain: "(0, ∞)",
        });
    }
    let target = l / length;
    if !(target >= 0.5 - 1e-15) {
        return Err(Error::NoSolution(format!(
            "virtual length {l} is below the straight-segment minimum {}",
            0.5 * length
        )));
    }
    if target <= 0.5 {
        return Ok(0.0);
    }
    let hi = PI * (1.0 - 1e-12);
    if tan_half_ratio(hi) < target {
        return Err(Error::NoSolution(format!(
            "virtual length {l} needs a bending angle beyond π"
        )));
    }
    let f = |t: f64| (tan_half_ratio(t) - target, tan_half_ratio_deriv(t));
    scalar::rtsafe(f, 0.0, hi, 1e-15, 200)
        .map(|(theta, _)| theta)
        .ok_or_else(|| Error::NoSolution("virtual-length inversion did not converge".into()))
}

/// Piecewise line-segment representation of the robot shape.
///
/// `p1` and `p2` are the intersections of consecutive tangent lines; `l1`,
/// `l2` the virtual lengths of the two segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSegmentShape {
    pub p1: Vector3<f64>,
    pub p2: Vector3<f64>,
    pub l1: f64,
    pub l2: f64,
}

impl LineSegmentShape {
    /// `l2 + Lg`.
    pub fn l2g(&self, params: &StructuralParams) -> f64 {
        self.l2 + params.lg
    }

    /// `l1 + Lr + l2`, the distance between `p1` and `p2`.
    pub fn l1r2(&self, params: &StructuralParams) -> f64 {
        self.l1 + params.lr + self.l2
    }

    /// `‖p2 − p1‖ − (l1 + Lr + l2)`; zero for a consistent shape.
    pub fn closure_residual(&self, params: &StructuralParams) -> f64 {
        (self.p2 - self.p1).norm() - self.l1r2(params)
    }
}

/// Builds the line-segment shape for a pose: `p1` is measured from the world
/// origin along the channel axis, `p2` backwards from the tip along `a`.
pub fn shape_points(
    pose: &Pose,
    params: &StructuralParams,
    l1: f64,
    l2: f64,
    ls: f64,
) -> LineSegmentShape {
    let a = pose.approach();
    LineSegmentShape {
        p1: Vector3::new(0.0, 0.0, l1 + ls),
        p2: pose.position - (l2 + params.lg) * a,
        l1,
        l2,
    }
}

/// Forward kinematics of either configuration class.
///
/// CI-1: `Rot(z, φ)`, segment 1 of length `L1`, `Lr` along the local z,
/// segment 2, `Lg` along the local z. CI-2 prepends a translation `Ls`
/// along the world z and uses the full length `L10` for segment 1.
pub fn forward_kinematics(params: &StructuralParams, config: &Config) -> Result<Pose> {
    match *config {
        Config::Ci1(c) => {
            check_bend(c.theta1)?;
            check_bend(c.theta2)?;
            if !(c.l1 >= 0.0) {
                return Err(Error::Domain {
                    name: "L1",
                    value: c.l1,
                    domain: "[0, L10]",
                });
            }
        }
        Config::Ci2(c) => {
            check_bend(c.theta1)?;
            check_bend(c.theta2)?;
        }
    }
    Ok(forward_kinematics_unchecked(params, config))
}

/// Forward kinematics without domain checks; bending angles may be negative.
pub(crate) fn forward_kinematics_unchecked(params: &StructuralParams, config: &Config) -> Pose {
    let (base_z, phi, len1, t1, d1, t2, d2) = match *config {
        Config::Ci1(c) => (0.0, c.phi, c.l1, c.theta1, c.delta1, c.theta2, c.delta2),
        Config::Ci2(c) => (c.ls, c.phi, params.l10, c.theta1, c.delta1, c.theta2, c.delta2),
    };
    let mut rotation = rot_z(phi);
    let mut position = Vector3::new(0.0, 0.0, base_z);

    let (p1, r1) = segment_fk_unchecked(len1, t1, d1);
    position += rotation * p1;
    rotation *= r1;
    position += rotation.column(2) * params.lr;

    let (p2, r2) = segment_fk_unchecked(params.l20, t2, d2);
    position += rotation * p2;
    rotation *= r2;
    position += rotation.column(2) * params.lg;

    Pose { position, rotation }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_config(rng: &mut impl Rng, p: &StructuralParams, class: ConfigClass) -> Config {
        let t1 = rng.gen_range(0.0..p.theta1_max);
        let t2 = rng.gen_range(0.0..p.theta2_max);
        let mut ang = || rng.gen_range(-PI..PI);
        let (phi, d1, d2) = (ang(), ang(), ang());
        match class {
            ConfigClass::Ci1 => Config::Ci1(ConfigCi1 {
                phi,
                theta1: t1,
                l1: rng.gen_range(p.r1_min * t1..=p.l10),
                delta1: d1,
                theta2: t2,
                delta2: d2,
            }),
            ConfigClass::Ci2 => Config::Ci2(ConfigCi2 {
                ls: rng.gen_range(0.0..p.ls_max),
                phi,
                theta1: t1,
                delta1: d1,
                theta2: t2,
                delta2: d2,
            }),
        }
    }

    #[test]
    fn rot_axis_cases() {
        assert_abs_diff_eq!(rot_axis(&Vector3::z_axis(), 0.0), Matrix3::identity());
        let r = rot_axis(&Vector3::z_axis(), PI / 2.0);
        assert_abs_diff_eq!(r * Vector3::x(), Vector3::y(), epsilon = 1e-15);
        let r = rot_axis(&Vector3::y_axis(), PI);
        assert_abs_diff_eq!(
            r,
            Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, -1.0)),
            epsilon = 1e-15
        );
        // Agrees with the dedicated constructors.
        assert_abs_diff_eq!(rot_axis(&Vector3::y_axis(), 0.7), rot_y(0.7), epsilon = 1e-15);
        assert_abs_diff_eq!(rot_axis(&Vector3::z_axis(), -1.3), rot_z(-1.3), epsilon = 1e-15);
    }

    #[test]
    fn segment_fk_cases() {
        let (p, r) = segment_fk(60.0, 0.0, 1.234).unwrap();
        assert_abs_diff_eq!(p, Vector3::new(0.0, 0.0, 60.0));
        assert_abs_diff_eq!(r, Matrix3::identity(), epsilon = 1e-15);

        let l = 40.0;
        let (p, _) = segment_fk(l, PI / 2.0, 0.0).unwrap();
        assert_abs_diff_eq!(p, Vector3::new(2.0 * l / PI, 0.0, 2.0 * l / PI), epsilon = 1e-12);

        assert!(segment_fk(l, -0.1, 0.0).is_err());
        assert!(segment_fk(l, PI, 0.0).is_err());
    }

    #[test]
    fn segment_tip_tangent_matches_arc() {
        // Brute-force product of the three rotation factors against the
        // numerical tangent of the arc at its tip.
        let (l, t, d) = (50.0, 1.1, 0.8);
        let rot = rot_axis(&Vector3::z_axis(), -d)
            * rot_axis(&Vector3::y_axis(), t)
            * rot_axis(&Vector3::z_axis(), d);
        let (_, r) = segment_fk(l, t, d).unwrap();
        assert_abs_diff_eq!(r, rot, epsilon = 1e-14);

        let h = 1e-6;
        let (pa, _) = segment_fk(l - h, t * (l - h) / l, d).unwrap();
        let (pb, _) = segment_fk(l + h, t * (l + h) / l, d).unwrap();
        let tangent = (pb - pa) / (2.0 * h);
        assert_abs_diff_eq!(tangent, r.column(2).into_owned(), epsilon = 1e-8);
    }

    #[test]
    fn virtual_length_cases() {
        assert_abs_diff_eq!(virtual_length(40.0, 0.0).unwrap(), 20.0);
        assert_abs_diff_eq!(virtual_length(40.0, PI / 2.0).unwrap(), 80.0 / PI, epsilon = 1e-12);
        assert!(virtual_length(40.0, PI).is_err());
        let near = virtual_length(40.0, PI - 1e-9).unwrap();
        assert!(near > 1e9);
        // Continuity at zero.
        let l = 40.0;
        assert!((virtual_length(l, 1e-8).unwrap() - l / 2.0).abs() < 1e-9 * l);
        // Monotone.
        let mut prev = 0.0;
        for i in 0..300 {
            let v = virtual_length(l, i as f64 * 0.01).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn virtual_length_inverse_cases() {
        assert_eq!(virtual_length_inverse(20.0, 40.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            virtual_length_inverse(80.0 / PI, 40.0).unwrap(),
            PI / 2.0,
            epsilon = 1e-12
        );
        assert!(matches!(
            virtual_length_inverse(19.0, 40.0),
            Err(Error::NoSolution(_))
        ));
    }

    #[test]
    fn straight_chains() {
        let p = StructuralParams::default();
        let c2 = Config::Ci2(ConfigCi2 {
            ls: 10.0,
            ..Default::default()
        });
        let pose = forward_kinematics(&p, &c2).unwrap();
        assert_abs_diff_eq!(
            pose.position,
            Vector3::new(0.0, 0.0, 10.0 + p.l10 + p.lr + p.l20 + p.lg),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(pose.rotation, Matrix3::identity(), epsilon = 1e-15);

        let c1 = Config::Ci1(ConfigCi1 {
            l1: 20.0,
            ..Default::default()
        });
        let pose = forward_kinematics(&p, &c1).unwrap();
        assert_abs_diff_eq!(
            pose.position,
            Vector3::new(0.0, 0.0, 20.0 + p.lr + p.l20 + p.lg),
            epsilon = 1e-12
        );
    }

    #[test]
    fn fk_orthonormal_and_shape_identities() {
        let p = StructuralParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for class in [ConfigClass::Ci1, ConfigClass::Ci2] {
            for _ in 0..10_000 {
                let c = random_config(&mut rng, &p, class);
                let pose = forward_kinematics(&p, &c).unwrap();
                let r = pose.rotation;
                assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-10);
                assert!((r.determinant() - 1.0).abs() < 1e-10);

                let (l1, ls) = match c {
                    Config::Ci1(c) => (virtual_length(c.l1, c.theta1).unwrap(), 0.0),
                    Config::Ci2(c) => (virtual_length(p.l10, c.theta1).unwrap(), c.ls),
                };
                let l2 = virtual_length(p.l20, c.theta2()).unwrap();
                let shape = shape_points(&pose, &p, l1, l2, ls);
                assert!(shape.closure_residual(&p).abs() < 1e-8);
                let d = shape.p2 - shape.p1;
                let l1r2 = shape.l1r2(&p);
                assert!((d.z / l1r2 - c.theta1().cos()).abs() < 1e-8);
                assert!((d.dot(&pose.approach()) / l1r2 - c.theta2().cos()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn shape_points_axis_aligned() {
        let p = StructuralParams::default();
        let pose = Pose::new(Vector3::new(0.0, 0.0, 150.0), Matrix3::identity());
        let s = shape_points(&pose, &p, 20.0, 30.0, 5.0);
        assert_abs_diff_eq!(s.p1, Vector3::new(0.0, 0.0, 25.0));
        assert_abs_diff_eq!(s.p2, Vector3::new(0.0, 0.0, 150.0 - 30.0 - p.lg));
    }

    #[test]
    fn params_kv_roundtrip_and_errors() {
        let p = StructuralParams {
            ls_max: 120.5,
            ..Default::default()
        };
        let back = StructuralParams::from_kv_str(&p.to_kv_string()).unwrap();
        assert_eq!(p, back);

        let partial = StructuralParams::from_kv_str("# only one\nLg: 25\n").unwrap();
        assert_eq!(partial.lg, 25.0);
        assert_eq!(partial.l10, 40.0);

        assert!(StructuralParams::from_kv_str("bogus = 1").is_err());
        assert!(StructuralParams::from_kv_str("L10 = abc").is_err());
        assert!(StructuralParams::from_kv_str("theta1_max = 3.5").is_err());
        assert!(StructuralParams::from_kv_str("Lr = -1").is_err());
    }

    #[test]
    fn pose_json_roundtrip_rejects_bad_rotation() {
        let pose = Pose::new(Vector3::new(1.0, 2.0, 3.0), rot_z(0.3) * rot_y(0.2));
        let s = serde_json::to_string(&pose).unwrap();
        let back: Pose = serde_json::from_str(&s).unwrap();
        assert_abs_diff_eq!(back.rotation, pose.rotation, epsilon = 1e-15);
        let bad = r#"{"position":[0,0,0],"rotation":[[2,0,0],[0,1,0],[0,0,1]]}"#;
        assert!(serde_json::from_str::<Pose>(bad).is_err());
    }

    #[test]
    fn rotation_helpers() {
        let r = rot_axis(&Unit::new_normalize(Vector3::new(1.0, -2.0, 0.5)), 2.9);
        assert_abs_diff_eq!(rotation_angle(&r), 2.9, epsilon = 1e-12);
        assert_abs_diff_eq!(rotation_log(&r).norm(), 2.9, epsilon = 1e-12);
        let a = Vector3::new(0.3, -0.4, 0.866).normalize();
        let b = Vector3::new(-0.8, 0.1, -0.2).normalize();
        let m = minimal_rotation(&a, &b);
        assert_abs_diff_eq!(m * a, b, epsilon = 1e-12);
        assert_abs_diff_eq!(rotation_angle(&m), a.dot(&b).acos(), epsilon = 1e-12);
        assert_abs_diff_eq!(minimal_rotation(&a, &(-a)) * a, -a, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), -PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-0.5), -0.5);
    }
}
