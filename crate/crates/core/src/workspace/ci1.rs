//! CI-1 directions at a fixed position.
//!
//! With the position fixed, the distance from `p1 = (0, 0, l1)` to the tip
//! only involves `θ2`, so `l1` is a function of `θ2` alone and `θ1` is free
//! within the length limits. For fixed `θ2` the reachable directions lie on
//! the line `A1·a_sx + B1·a_sz + C1 = 0`; `θ1` moves the point along it.

use super::raster::Raster;
use super::{
    linspace, sampled_curves, sweep_neighbourhood, BoundaryCurve, BoundaryKind,
    BoundaryPoint, Geometry, SweepParam,
};
use crate::model::{
    arc_factor, shape_points, tan_half_ratio, tan_half_ratio_deriv, virtual_length_inverse,
    Config, ConfigCi1, Pose, StructuralParams,
};
use crate::scalar::brent;
use crate::vsik::recover_orientation_angles;

const BARRIER_SAMPLES: usize = 240;
const REFINE_SAMPLES: usize = 129;
/// Extra `θ2` samples across the three sweep steps around an admissibility change.
const EDGE_SAMPLES: usize = 257;

pub(crate) struct Ci1Geometry {
    psx: f64,
    psz: f64,
    params: StructuralParams,
}

impl Ci1Geometry {
    pub fn new(psx: f64, psz: f64, params: &StructuralParams) -> Self {
        Self {
            psx,
            psz,
            params: *params,
        }
    }

    /// `(l2, l1)` at `θ2`; `l1` may be negative or non-finite.
    pub fn virtual_lengths(&self, t2: f64) -> (f64, f64) {
        let p = &self.params;
        let l2 = p.l20 * tan_half_ratio(t2);
        let m = p.lr + l2;
        let l2g = l2 + p.lg;
        let c2 = t2.cos();
        let num = self.psx * self.psx + self.psz * self.psz - m * m - l2g * l2g - 2.0 * m * l2g * c2;
        let den = 2.0 * (self.psz + m + l2g * c2);
        (l2, num / den)
    }

    /// Virtual length of segment 1 forced by the position at `θ2`.
    pub fn l1(&self, t2: f64) -> Option<f64> {
        let (_, l1) = self.virtual_lengths(t2);
        (l1.is_finite() && l1 >= 0.0).then_some(l1)
    }

    /// Feasible `θ1` range for a given `l1`: the lower end comes from
    /// `L1 ≤ L10`, the upper from `θ1max` and the bending radius.
    /// `None` if `L1 ≤ L10` cannot hold.
    pub fn theta1_bounds(&self, l1: f64, inset: f64) -> Option<(f64, f64)> {
        let p = &self.params;
        let lo = if l1 <= 0.5 * p.l10 {
            0.0
        } else {
            virtual_length_inverse(l1, p.l10).ok()? + inset
        };
        let hi = (p.theta1_max - inset).min(self.bend_limit(l1) - inset);
        Some((lo, hi))
    }

    /// `θ1` at which `L1 = r1min·θ1`.
    pub fn bend_limit(&self, l1: f64) -> f64 {
        2.0 * (l1 / self.params.r1_min).atan()
    }

    /// `θ1` at which `L1 = L10`, if `l1` is long enough to need bending.
    pub fn length_limit(&self, l1: f64) -> Option<f64> {
        if l1 <= 0.5 * self.params.l10 {
            None
        } else {
            virtual_length_inverse(l1, self.params.l10).ok()
        }
    }

    /// Coefficients `(A1, B1, C1)` of the direction line at `θ2`.
    pub fn line(&self, t2: f64) -> [f64; 3] {
        let p = &self.params;
        let (l2, _) = self.virtual_lengths(t2);
        let l2g = l2 + p.lg;
        let l2rc = l2 + p.lr + self.psz;
        let c = t2.cos();
        let psx = self.psx;
        [
            -2.0 * psx * (l2rc + l2g * c),
            psx * psx - l2g * l2g - l2rc * l2rc - 2.0 * l2g * l2rc * c,
            2.0 * l2g * l2rc + (l2g * l2g + psx * psx + l2rc * l2rc) * c,
        ]
    }

    /// `θ2`-derivative of [`Self::line`].
    pub fn line_deriv(&self, t2: f64) -> [f64; 3] {
        let p = &self.params;
        let l2 = p.l20 * tan_half_ratio(t2);
        let dl2 = p.l20 * tan_half_ratio_deriv(t2);
        let l2g = l2 + p.lg;
        let l2rc = l2 + p.lr + self.psz;
        let (s, c) = t2.sin_cos();
        let psx = self.psx;
        [
            -2.0 * psx * (dl2 + dl2 * c - l2g * s),
            -2.0 * l2g * dl2 - 2.0 * l2rc * dl2 - 2.0 * (dl2 * l2rc + l2g * dl2) * c
                + 2.0 * l2g * l2rc * s,
            2.0 * (dl2 * l2rc + l2g * dl2) + (2.0 * l2g * dl2 + 2.0 * l2rc * dl2) * c
                - (l2g * l2g + psx * psx + l2rc * l2rc) * s,
        ]
    }

    /// Point of the line family's envelope at `θ2` with its `θ1`.
    pub fn envelope(&self, t2: f64) -> Option<(f64, f64, f64)> {
        let [a, b, c] = self.line(t2);
        let [da, db, dc] = self.line_deriv(t2);
        let det = a * db - b * da;
        let scale = (a.abs() + b.abs()) * (da.abs() + db.abs());
        if !(det.abs() > 1e-14 * scale) {
            return None;
        }
        let ax = (b * dc - c * db) / det;
        let az = (c * da - a * dc) / det;
        let (l2, l1) = self.virtual_lengths(t2);
        if !(l1.is_finite() && l1 >= 0.0) {
            return None;
        }
        let p = &self.params;
        let c1 = (self.psz - l1 - (l2 + p.lg) * az) / (l1 + p.lr + l2);
        if !(c1.abs() <= 1.0) {
            return None;
        }
        Some((ax, az, c1.acos()))
    }

    /// `θ2` values in `[0, θ2max]` where `l1` passes through zero.
    fn dot_angles(&self) -> Vec<f64> {
        let l1 = |t2: f64| self.virtual_lengths(t2).1;
        let grid = linspace(0.0, self.params.theta2_max, 601);
        let mut out = Vec::new();
        for w in grid.windows(2) {
            let (fa, fb) = (l1(w[0]), l1(w[1]));
            if !(fa.is_finite() && fb.is_finite() && fa * fb <= 0.0 && fa != fb) {
                continue;
            }
            // A sign change through a pole is not a root.
            if let Some((t, _)) = brent(l1, w[0], w[1], 1e-14, 100) {
                if l1(t).abs() < 1e-6 && out.last().map_or(true, |&l: &f64| (t - l).abs() > 1e-9) {
                    out.push(t);
                }
            }
        }
        out
    }

    /// Uniform `θ2` samples on `[0, hi]`, densified wherever the `θ1` range
    /// opens or closes. Near the edge of the translational workspace the
    /// feasible `θ2` range can be a sliver next to such a change, narrower
    /// than the uniform step.
    fn theta2_sweep(&self, hi: f64, n: usize, inset: f64) -> Vec<f64> {
        let mut sweep = linspace(0.0, hi, n + 1);
        let open = |t2: f64| {
            self.l1(t2)
                .and_then(|l1| self.theta1_bounds(l1, inset))
                .is_some_and(|(lo, hi)| lo <= hi)
        };
        let state: Vec<bool> = sweep.iter().map(|&t| open(t)).collect();
        let mut extra = Vec::new();
        for k in 0..sweep.len() - 1 {
            if state[k] != state[k + 1] {
                let a = sweep[k.saturating_sub(1)];
                let b = sweep[(k + 2).min(sweep.len() - 1)];
                extra.extend(linspace(a, b, EDGE_SAMPLES));
            }
        }
        sweep.extend(extra);
        sweep.sort_by(f64::total_cmp);
        sweep.dedup();
        sweep
    }

    fn point_at(&self, t1: f64, t2: f64, inset: f64) -> Option<BoundaryPoint> {
        self.feasible_point(t1, t2, 1, inset)
    }

    fn boundary_1(&self, t2: f64, inset: f64, n: usize) -> Vec<BoundaryCurve> {
        let Some(l1) = self.l1(t2) else {
            return Vec::new();
        };
        let Some((lo, hi)) = self.theta1_bounds(l1, inset) else {
            return Vec::new();
        };
        if lo > hi {
            return Vec::new();
        }
        sampled_curves(BoundaryKind::TypeI1, SweepParam::Theta1, &linspace(lo, hi, n + 1), |t1| {
            self.point_at(t1, t2, inset)
        })
    }

    /// `θ1` on the curve of `kind` at `θ2`, for the kinds swept by `θ2`.
    fn theta1_on(&self, kind: BoundaryKind, t2: f64, inset: f64) -> Option<f64> {
        match kind {
            BoundaryKind::TypeI2 => Some(self.params.theta1_max - inset),
            BoundaryKind::TypeI3 => Some(self.bend_limit(self.l1(t2)?) - inset),
            BoundaryKind::TypeI4 => Some(self.length_limit(self.l1(t2)?)? + inset),
            BoundaryKind::TypeII => self.envelope(t2).map(|e| e.2),
            BoundaryKind::TypeI1 => None,
        }
    }
}

impl Geometry for Ci1Geometry {
    fn params(&self) -> &StructuralParams {
        &self.params
    }

    fn sheets(&self) -> &'static [i8] {
        &[1]
    }

    fn raw_point(&self, t1: f64, t2: f64, _sheet: i8) -> Option<(f64, f64)> {
        let p = &self.params;
        let (l2, l1) = self.virtual_lengths(t2);
        if !(l1.is_finite() && l1 >= 0.0) {
            return None;
        }
        let l2g = l2 + p.lg;
        let l1r2 = l1 + p.lr + l2;
        let az = (self.psz - l1 - l1r2 * t1.cos()) / l2g;
        let ax = (l1r2 * t2.cos() + l2g - (self.psz - l1) * az) / self.psx;
        Some((ax, az))
    }

    fn slack(&self, t1: f64, t2: f64, _sheet: i8, inset: f64) -> Option<f64> {
        self.point(t1, t2, 1)?;
        let l1 = self.l1(t2)?;
        let Some((lo, hi)) = self.theta1_bounds(l1, inset) else {
            return Some(f64::NEG_INFINITY);
        };
        Some(
            (t1 - lo)
                .min(hi - t1)
                .min(self.params.theta2_max - inset - t2)
                .min(t2),
        )
    }

    fn curves(&self, inset: f64, n: usize) -> Vec<BoundaryCurve> {
        let p = &self.params;
        let mut out = self.boundary_1(p.theta2_max - inset, inset, n);
        let sweep = self.theta2_sweep(p.theta2_max - inset, n, inset);
        for kind in [
            BoundaryKind::TypeI2,
            BoundaryKind::TypeI3,
            BoundaryKind::TypeI4,
            BoundaryKind::TypeII,
        ] {
            out.extend(sampled_curves(kind, SweepParam::Theta2, &sweep, |t2| {
                self.point_at(self.theta1_on(kind, t2, inset)?, t2, inset)
            }));
        }
        // `L1 = 0` forces `θ1 = 0`: a single direction.
        for t2 in self.dot_angles() {
            if t2 <= p.theta2_max - inset {
                if let Some((a_sx, a_sz)) = self.point(0.0, t2, 1) {
                    out.push(BoundaryCurve {
                        kind: BoundaryKind::TypeI3,
                        driving_param: SweepParam::Theta2,
                        points: vec![BoundaryPoint {
                            sweep: t2,
                            a_sx,
                            a_sz,
                            theta1: 0.0,
                            theta2: t2,
                            sheet: 1,
                        }],
                    });
                }
            }
        }
        out
    }

    fn refine(&self, curve: &BoundaryCurve, idx: usize, inset: f64) -> Vec<BoundaryPoint> {
        if curve.points.len() < 2 {
            return Vec::new();
        }
        let t2_fixed = self.params.theta2_max - inset;
        sweep_neighbourhood(curve, idx, REFINE_SAMPLES)
            .into_iter()
            .filter_map(|s| {
                let b = match curve.kind {
                    BoundaryKind::TypeI1 => self.point_at(s, t2_fixed, inset),
                    kind => self.point_at(self.theta1_on(kind, s, inset)?, s, inset),
                }?;
                Some(BoundaryPoint { sweep: s, ..b })
            })
            .collect()
    }

    fn draw_barriers(&self, raster: &mut Raster) {
        let p = self.params;
        // Boundary #1 is a chord of its line.
        let [a, b, c] = self.line(p.theta2_max);
        let norm = a.hypot(b);
        if norm > 0.0 {
            let d = -c / norm;
            let r = 1.05;
            if d.abs() < r {
                let (nx, nz) = (a / norm, b / norm);
                let half = (r * r - d * d).sqrt();
                let foot = (d * nx, d * nz);
                raster.draw_segment(
                    (foot.0 - half * nz, foot.1 + half * nx),
                    (foot.0 + half * nz, foot.1 - half * nx),
                );
            }
        }
        let in_box = |t1: f64| (0.0..=p.theta1_max).contains(&t1);
        let curves: [&dyn Fn(f64) -> Option<(f64, f64)>; 4] = [
            &|t2| self.raw_point(p.theta1_max, t2, 1),
            &|t2| {
                let t1 = self.bend_limit(self.l1(t2)?);
                in_box(t1).then(|| self.raw_point(t1, t2, 1)).flatten()
            },
            &|t2| {
                let t1 = self.length_limit(self.l1(t2)?)?;
                in_box(t1).then(|| self.raw_point(t1, t2, 1)).flatten()
            },
            &|t2| {
                let (ax, az, t1) = self.envelope(t2)?;
                in_box(t1).then_some((ax, az))
            },
        ];
        for f in curves {
            raster.draw_parametric(f, 0.0, p.theta2_max, BARRIER_SAMPLES);
        }
    }

    fn witnesses(&self, n: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for &t2 in &linspace(0.0, self.params.theta2_max, n) {
            let Some(l1) = self.l1(t2) else { continue };
            let Some((lo, hi)) = self.theta1_bounds(l1, 0.0) else {
                continue;
            };
            if lo > hi {
                continue;
            }
            for &t1 in &linspace(lo, hi, n) {
                if let Some(pt) = self.point(t1, t2, 1) {
                    out.push(pt);
                }
            }
        }
        out
    }

    fn build_config(&self, t1: f64, t2: f64, _sheet: i8, target: &Pose) -> Option<Config> {
        let p = &self.params;
        let (l2, l1) = self.virtual_lengths(t2);
        if !(l1.is_finite() && l1 >= 0.0) {
            return None;
        }
        let shape = shape_points(target, p, l1, l2, 0.0);
        let (phi, delta1, delta2) = recover_orientation_angles(&shape, target, t1, t2).ok()?;
        Some(Config::Ci1(ConfigCi1 {
            phi,
            theta1: t1,
            l1: l1 * arc_factor(t1),
            delta1,
            theta2: t2,
            delta2,
        }))
    }
}
