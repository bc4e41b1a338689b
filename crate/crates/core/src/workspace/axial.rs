//! Positions on the channel axis.
//!
//! Every direction with the same `a_sz` is equivalent there, so the
//! feasible set is a union of bands `a_sz ∈ [lo, hi]` bounded by horizontal
//! chords of the disk. Each class reduces to a one-parameter family of
//! bending angles, sampled densely.

use super::ci1::Ci1Geometry;
use super::{linspace, BoundaryCurve, BoundaryKind, BoundaryPoint, SweepParam};
use crate::model::{tan_half_ratio, ConfigClass, StructuralParams};

const SAMPLES: usize = 4000;
const SCAN_SAMPLES: usize = 400;
/// Gap in `a_sz` that separates two bands.
const BAND_GAP: f64 = 0.01;
const CHORD_POINTS: usize = 65;

/// A feasible sample of the family.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AxialSample {
    pub az: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub sheet: i8,
    /// Slack of each limit, in boundary-kind order #1..#4.
    slacks: [f64; 4],
    /// Sampling step of each limit's variable, used to decide whether it binds.
    steps: [f64; 4],
}

impl AxialSample {
    /// The limit this sample sits on, or `TypeII` if none binds.
    pub fn kind(&self) -> BoundaryKind {
        let kinds = [
            BoundaryKind::TypeI1,
            BoundaryKind::TypeI2,
            BoundaryKind::TypeI3,
            BoundaryKind::TypeI4,
        ];
        let mut best = (f64::INFINITY, BoundaryKind::TypeII);
        for k in 0..4 {
            let rel = self.slacks[k] / self.steps[k];
            if rel < 2.0 && rel < best.0 {
                best = (rel, kinds[k]);
            }
        }
        best.1
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Band {
    pub lo: AxialSample,
    pub hi: AxialSample,
}

impl Band {
    pub fn contains(&self, az: f64) -> bool {
        az >= self.lo.az && az <= self.hi.az
    }
}

pub(crate) fn bands(class: ConfigClass, psz: f64, params: &StructuralParams, inset: f64) -> Vec<Band> {
    let mut samples = match class {
        ConfigClass::Ci1 => ci1_samples(psz, params, inset),
        ConfigClass::Ci2 => ci2_samples(psz, params, inset),
    };
    samples.sort_by(|a, b| a.az.total_cmp(&b.az));
    let mut out: Vec<Band> = Vec::new();
    for s in samples {
        match out.last_mut() {
            Some(band) if s.az - band.hi.az < BAND_GAP => band.hi = s,
            _ => out.push(Band { lo: s, hi: s }),
        }
    }
    out
}

fn ci1_samples(psz: f64, params: &StructuralParams, inset: f64) -> Vec<AxialSample> {
    let p = params;
    let g = Ci1Geometry::new(0.0, psz, p);
    let t2_max = p.theta2_max - inset;
    let step2 = t2_max / (SAMPLES - 1) as f64;
    let mut out = Vec::new();
    for t2 in linspace(0.0, t2_max, SAMPLES) {
        let (l2, l1) = g.virtual_lengths(t2);
        if !(l1.is_finite() && l1 >= 0.0) {
            continue;
        }
        let [_, b, c] = g.line(t2);
        let az = -c / b;
        let c1 = (psz - l1 - (l2 + p.lg) * az) / (l1 + p.lr + l2);
        if !(az.abs() <= 1.0 && c1.abs() <= 1.0) {
            continue;
        }
        let t1 = c1.acos();
        let Some((lo, hi)) = g.theta1_bounds(l1, inset) else {
            continue;
        };
        if t1 < lo || t1 > hi {
            continue;
        }
        // θ1 moves with θ2 along the family; use its local change as the step.
        let step1 = (step2 * 4.0).max(1e-6);
        out.push(AxialSample {
            az,
            theta1: t1,
            theta2: t2,
            sheet: 1,
            slacks: [
                t2_max - t2,
                p.theta1_max - inset - t1,
                g.bend_limit(l1) - inset - t1,
                if lo > 0.0 { t1 - lo } else { f64::INFINITY },
            ],
            steps: [step2, step1, step1, step1],
        });
    }
    out
}

fn ci2_samples(psz: f64, params: &StructuralParams, inset: f64) -> Vec<AxialSample> {
    let p = params;
    let t1_max = p.theta1_max - inset;
    let t2_max = p.theta2_max - inset;
    // Condition tying θ1 and θ2 on the sheet: zero on the family.
    let eval = |t1: f64, t2: f64, sheet: i8| -> Option<(f64, f64)> {
        let l1 = p.l10 * tan_half_ratio(t1);
        let l2 = p.l20 * tan_half_ratio(t2);
        let u = l1 + p.lr + l2;
        let v = l2 + p.lg;
        let (s1, c1) = t1.sin_cos();
        let k = u * s1 / v;
        if k > 1.0 {
            return None;
        }
        let az = f64::from(sheet) * (1.0 - k * k).sqrt();
        Some((-v * k * k + u * c1 * az - u * t2.cos(), az))
    };
    let ls_of = |t1: f64, t2: f64, az: f64| {
        let l1 = p.l10 * tan_half_ratio(t1);
        let l2 = p.l20 * tan_half_ratio(t2);
        psz - (l2 + p.lg) * az - (l1 + p.lr + l2) * t1.cos() - l1
    };
    let step1 = t1_max / (SCAN_SAMPLES - 1) as f64;
    let step2 = t2_max / (SCAN_SAMPLES - 1) as f64;
    let mut out = Vec::new();
    let mut push = |t1: f64, t2: f64, sheet: i8| {
        let Some((_, az)) = eval(t1, t2, sheet) else { return };
        let ls = ls_of(t1, t2, az);
        if ls < inset || ls > p.ls_max - inset {
            return;
        }
        out.push(AxialSample {
            az,
            theta1: t1,
            theta2: t2,
            sheet,
            slacks: [t1_max - t1, t2_max - t2, ls - inset, p.ls_max - inset - ls],
            steps: [step1, step2, 1.0, 1.0],
        });
    };
    for sheet in [1i8, -1] {
        // Cross the family with lines of constant θ2, then of constant θ1.
        for (outer, inner, outer_is_t2) in [(t2_max, t1_max, true), (t1_max, t2_max, false)] {
            for a in linspace(0.0, outer, SAMPLES / 4) {
                let f = |b: f64| {
                    let (t1, t2) = if outer_is_t2 { (b, a) } else { (a, b) };
                    eval(t1, t2, sheet).map(|(r, _)| r)
                };
                let grid = linspace(0.0, inner, SCAN_SAMPLES);
                for w in grid.windows(2) {
                    let (Some(fa), Some(fb)) = (f(w[0]), f(w[1])) else { continue };
                    if (fa >= 0.0) == (fb >= 0.0) {
                        continue;
                    }
                    let (mut lo, mut hi) = (w[0], w[1]);
                    for _ in 0..40 {
                        let mid = 0.5 * (lo + hi);
                        match f(mid) {
                            Some(fm) if (fm >= 0.0) == (fa >= 0.0) => lo = mid,
                            Some(_) => hi = mid,
                            None => break,
                        }
                    }
                    let b = 0.5 * (lo + hi);
                    let (t1, t2) = if outer_is_t2 { (b, a) } else { (a, b) };
                    push(t1, t2, sheet);
                }
            }
        }
    }
    out
}

/// Horizontal chords at band ends that lie on a boundary (band ends at the
/// poles are not boundaries).
pub(crate) fn curves(bands: &[Band]) -> Vec<BoundaryCurve> {
    let mut out = Vec::new();
    for band in bands {
        for end in [band.lo, band.hi] {
            if end.az.abs() >= 1.0 - 1e-9 {
                continue;
            }
            let r = (1.0 - end.az * end.az).sqrt();
            out.push(BoundaryCurve {
                kind: end.kind(),
                driving_param: SweepParam::Az,
                points: linspace(-r, r, CHORD_POINTS)
                    .into_iter()
                    .map(|x| BoundaryPoint {
                        sweep: end.az,
                        a_sx: x,
                        a_sz: end.az,
                        theta1: end.theta1,
                        theta2: end.theta2,
                        sheet: end.sheet,
                    })
                    .collect(),
            });
        }
    }
    out
}

/// Outline of each band in the disk: lower chord, right arc, upper chord, left arc.
pub(crate) fn polygons(bands: &[Band]) -> Vec<Vec<[f64; 2]>> {
    bands
        .iter()
        .map(|band| {
            let (a, b) = (band.lo.az.clamp(-1.0, 1.0), band.hi.az.clamp(-1.0, 1.0));
            let arc = |from: f64, to: f64, sign: f64| {
                linspace(from.asin(), to.asin(), 33)
                    .into_iter()
                    .map(move |phi| [sign * phi.cos(), phi.sin()])
            };
            let mut poly: Vec<[f64; 2]> = arc(a, b, 1.0).collect();
            poly.extend(arc(b, a, -1.0));
            poly.push(poly[0]);
            poly
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward_kinematics, Config, ConfigCi1, ConfigCi2};

    #[test]
    fn axial_fk_samples_fall_in_a_band() {
        let p = StructuralParams::default();
        // Planar S-shapes that return to the axis.
        // θ2 is chosen so that bending back with δ2 = π returns the tip to the axis.
        let mut c = ConfigCi2 {
            ls: 40.0,
            phi: 0.0,
            theta1: 0.6,
            delta1: 0.0,
            theta2: 0.0,
            delta2: std::f64::consts::PI,
        };
        let x_of = |t2: f64| {
            let mut cc = c;
            cc.theta2 = t2;
            forward_kinematics(&p, &Config::Ci2(cc)).unwrap().position.x
        };
        let (t2, _) = crate::scalar::brent(x_of, 0.0, p.theta2_max, 1e-14, 200).unwrap();
        c.theta2 = t2;
        let pose = forward_kinematics(&p, &Config::Ci2(c)).unwrap();
        assert!(pose.position.x.hypot(pose.position.y) < 1e-9);
        let found = bands(ConfigClass::Ci2, pose.position.z, &p, 0.0);
        let az = pose.approach().z;
        assert!(found.iter().any(|b| b.lo.az - 1e-3 <= az && az <= b.hi.az + 1e-3), "{az} {found:?}");

        let c1 = ConfigCi1 {
            phi: 0.0,
            theta1: 0.5,
            l1: 30.0,
            delta1: 0.0,
            theta2: 0.0,
            delta2: std::f64::consts::PI,
        };
        let x_of = |t2: f64| {
            let mut cc = c1;
            cc.theta2 = t2;
            forward_kinematics(&p, &Config::Ci1(cc)).unwrap().position.x
        };
        let (t2, _) = crate::scalar::brent(x_of, 0.0, p.theta2_max, 1e-14, 200).unwrap();
        let pose = forward_kinematics(&p, &Config::Ci1(ConfigCi1 { theta2: t2, ..c1 })).unwrap();
        let found = bands(ConfigClass::Ci1, pose.position.z, &p, 0.0);
        let az = pose.approach().z;
        assert!(found.iter().any(|b| b.lo.az - 1e-3 <= az && az <= b.hi.az + 1e-3), "{az} {found:?}");
    }
}
