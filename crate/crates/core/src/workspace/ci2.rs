//! CI-2 directions at a fixed position.
//!
//! For given bending angles the base translation is eliminated and `a_sz`
//! solves a quadratic with discriminant
//! `D = u² + v² + 2uv·cosθ2 − p_sx²` (`u = l1 + Lr + l2`, `v = l2 + Lg`).
//! Each root is a sheet of the map `(θ1, θ2) → (a_sx, a_sz)`; the two sheets
//! meet where `D = 0`.

use std::cell::OnceCell;

use super::ci1::Ci1Geometry;
use super::contour::{bisect_segment, zero_contours, Grid};
use super::raster::Raster;
use super::{
    linspace, runs, sampled_curves, sweep_neighbourhood, BoundaryCurve, BoundaryKind,
    BoundaryPoint, Geometry, SweepParam,
};
use crate::model::{
    shape_points, tan_half_ratio, tan_half_ratio_deriv, Config, ConfigCi2, Pose, StructuralParams,
};
use crate::vsik::recover_orientation_angles;

const BARRIER_SAMPLES: usize = 240;
const REFINE_SAMPLES: usize = 129;
/// Grid size per axis for the fold determinant.
const FOLD_GRID: usize = 160;
/// Lower end of the fold grid; the determinant vanishes on the `θ = 0` edges.
const FOLD_GRID_START: f64 = 1e-3;
const BISECT_STEPS: usize = 48;

struct Parts {
    u: f64,
    v: f64,
    l1: f64,
    d: f64,
    c1: f64,
}

pub(crate) struct Ci2Geometry {
    psx: f64,
    psz: f64,
    params: StructuralParams,
    /// Zero contours of the fold determinant as `(sheet, [(θ1, θ2)])`.
    folds: OnceCell<Vec<(i8, Vec<(f64, f64)>)>>,
}

impl Ci2Geometry {
    pub fn new(psx: f64, psz: f64, params: &StructuralParams) -> Self {
        Self {
            psx,
            psz,
            params: *params,
            folds: OnceCell::new(),
        }
    }

    fn parts(&self, t1: f64, t2: f64) -> Parts {
        let p = &self.params;
        let l1 = p.l10 * tan_half_ratio(t1);
        let l2 = p.l20 * tan_half_ratio(t2);
        let u = l1 + p.lr + l2;
        let v = l2 + p.lg;
        Parts {
            u,
            v,
            l1,
            d: u * u + v * v + 2.0 * u * v * t2.cos() - self.psx * self.psx,
            c1: t1.cos(),
        }
    }

    /// Disk point from `a_sz`, plus the base translation.
    fn complete(&self, parts: &Parts, t2: f64, az: f64) -> (f64, f64, f64) {
        let Parts { u, v, l1, c1, .. } = *parts;
        let ax = (v + u * t2.cos() - v * az * az - u * c1 * az) / self.psx;
        let ls = self.psz - v * az - u * c1 - l1;
        (ax, az, ls)
    }

    fn solve(&self, t1: f64, t2: f64, sheet: i8) -> Option<(f64, f64, f64)> {
        let parts = self.parts(t1, t2);
        if !(parts.d >= 0.0) {
            return None;
        }
        let az = (-parts.u * parts.c1 + f64::from(sheet) * parts.d.sqrt()) / parts.v;
        Some(self.complete(&parts, t2, az))
    }

    /// Sheet whose root is `a_sz`.
    fn sheet_of(&self, t1: f64, t2: f64, az: f64) -> i8 {
        let parts = self.parts(t1, t2);
        if parts.v * az + parts.u * parts.c1 >= 0.0 {
            1
        } else {
            -1
        }
    }

    /// Point with base translation `ls` reached at `θ2`, as `(θ1, a_sx, a_sz)`.
    ///
    /// With `Ls` fixed the robot is a CI-1 robot with `L1 = L10` whose base
    /// sits `ls` higher.
    fn fixed_ls_point(&self, ls: f64, t2: f64) -> Option<(f64, f64, f64)> {
        let g = Ci1Geometry::new(self.psx, self.psz - ls, &self.params);
        let t1 = g.length_limit(g.l1(t2)?)?;
        let (ax, az) = g.raw_point(t1, t2, 1)?;
        Some((t1, ax, az))
    }

    fn fixed_ls_feasible(&self, ls: f64, t2: f64, inset: f64) -> Option<BoundaryPoint> {
        let (t1, _, az) = self.fixed_ls_point(ls, t2)?;
        self.feasible_point(t1, t2, self.sheet_of(t1, t2, az), inset)
    }

    fn ls_for(&self, kind: BoundaryKind, inset: f64) -> f64 {
        if kind == BoundaryKind::TypeI3 {
            inset
        } else {
            self.params.ls_max - inset
        }
    }

    /// Determinant of `∂(a_sx, a_sz)/∂(θ1, θ2)` on a sheet.
    pub fn fold_det(&self, t1: f64, t2: f64, sheet: i8) -> Option<f64> {
        let p = &self.params;
        let (s1, c1) = t1.sin_cos();
        let (s2, c2) = t2.sin_cos();
        let l1 = p.l10 * tan_half_ratio(t1);
        let l2 = p.l20 * tan_half_ratio(t2);
        let u1 = p.l10 * tan_half_ratio_deriv(t1);
        let u2 = p.l20 * tan_half_ratio_deriv(t2);
        let v2 = u2;
        let u = l1 + p.lr + l2;
        let v = l2 + p.lg;
        let d = u * u + v * v + 2.0 * u * v * c2 - self.psx * self.psx;
        if !(d > 0.0) {
            return None;
        }
        let sq = d.sqrt();
        let sg = f64::from(sheet);
        let d1 = 2.0 * u1 * (u + v * c2);
        let d2 = 2.0 * u * u2 + 2.0 * v * v2 + 2.0 * (u2 * v + u * v2) * c2 - 2.0 * u * v * s2;
        let n = -u * c1 + sg * sq;
        let n1 = -u1 * c1 + u * s1 + sg * d1 / (2.0 * sq);
        let n2 = -u2 * c1 + sg * d2 / (2.0 * sq);
        let az = n / v;
        let az1 = n1 / v;
        let az2 = (n2 * v - n * v2) / (v * v);
        let ax1 = (u1 * c2 - 2.0 * v * az * az1 - (u1 * c1 - u * s1) * az - u * c1 * az1) / self.psx;
        let ax2 = (v2 + u2 * c2 - u * s2 - v2 * az * az - 2.0 * v * az * az2 - u2 * c1 * az
            - u * c1 * az2)
            / self.psx;
        Some(ax1 * az2 - ax2 * az1)
    }

    fn grid_axes(&self) -> (Vec<f64>, Vec<f64>) {
        let p = &self.params;
        (
            linspace(FOLD_GRID_START, p.theta1_max, FOLD_GRID),
            linspace(FOLD_GRID_START, p.theta2_max, FOLD_GRID),
        )
    }

    /// Zero contours of `f` over the bending-angle box.
    fn contours(&self, f: &dyn Fn(f64, f64) -> Option<f64>) -> Vec<Vec<(f64, f64)>> {
        let (us, vs) = self.grid_axes();
        let values: Vec<Option<f64>> = us
            .iter()
            .flat_map(|&t1| vs.iter().map(move |&t2| (t1, t2)))
            .map(|(t1, t2)| f(t1, t2))
            .collect();
        let grid = Grid {
            us: &us,
            vs: &vs,
            values: &values,
        };
        zero_contours(&grid, &|a, b| bisect_segment(f, a, b, BISECT_STEPS))
    }

    fn folds(&self) -> &[(i8, Vec<(f64, f64)>)] {
        self.folds.get_or_init(|| {
            let mut out = Vec::new();
            for &sheet in self.sheets() {
                for line in self.contours(&|t1, t2| self.fold_det(t1, t2, sheet)) {
                    out.push((sheet, line));
                }
            }
            out
        })
    }

    /// Zero of the fold determinant on the line through `q` across the
    /// segment `a → b`, within one segment length.
    fn project_on_fold(&self, q: (f64, f64), a: (f64, f64), b: (f64, f64), sheet: i8) -> Option<(f64, f64)> {
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        if len == 0.0 {
            return Some(q);
        }
        let nrm = (-(b.1 - a.1) / len, (b.0 - a.0) / len);
        let at = |t: f64| (q.0 + t * nrm.0, q.1 + t * nrm.1);
        let f = |t1: f64, t2: f64| self.fold_det(t1, t2, sheet);
        let ts = linspace(-len, len, 9);
        let vals: Vec<Option<f64>> = ts.iter().map(|&t| {
            let (x, y) = at(t);
            f(x, y)
        }).collect();
        // Closest sign change to the segment.
        let mut best: Option<(f64, (f64, f64))> = None;
        for k in 0..ts.len() - 1 {
            if let (Some(fa), Some(fb)) = (vals[k], vals[k + 1]) {
                if (fa >= 0.0) != (fb >= 0.0) {
                    let root = bisect_segment(&f, at(ts[k]), at(ts[k + 1]), BISECT_STEPS)?;
                    let off = (ts[k] + ts[k + 1]).abs();
                    if best.map_or(true, |(o, _)| off < o) {
                        best = Some((off, root));
                    }
                }
            }
        }
        best.map(|(_, r)| r)
    }
}

impl Geometry for Ci2Geometry {
    fn params(&self) -> &StructuralParams {
        &self.params
    }

    fn sheets(&self) -> &'static [i8] {
        &[1, -1]
    }

    fn raw_point(&self, t1: f64, t2: f64, sheet: i8) -> Option<(f64, f64)> {
        self.solve(t1, t2, sheet).map(|(ax, az, _)| (ax, az))
    }

    fn slack(&self, t1: f64, t2: f64, sheet: i8, inset: f64) -> Option<f64> {
        self.point(t1, t2, sheet)?;
        let (_, _, ls) = self.solve(t1, t2, sheet)?;
        let p = &self.params;
        Some(
            t1.min(p.theta1_max - inset - t1)
                .min(t2)
                .min(p.theta2_max - inset - t2)
                .min(ls - inset)
                .min(p.ls_max - inset - ls),
        )
    }

    fn curves(&self, inset: f64, n: usize) -> Vec<BoundaryCurve> {
        let p = &self.params;
        let t1_sweep = linspace(0.0, p.theta1_max - inset, n + 1);
        let t2_sweep = linspace(0.0, p.theta2_max - inset, n + 1);
        let mut out = Vec::new();
        for &sheet in self.sheets() {
            out.extend(sampled_curves(BoundaryKind::TypeI1, SweepParam::Theta2, &t2_sweep, |t2| {
                self.feasible_point(p.theta1_max - inset, t2, sheet, inset)
            }));
            out.extend(sampled_curves(BoundaryKind::TypeI2, SweepParam::Theta1, &t1_sweep, |t1| {
                self.feasible_point(t1, p.theta2_max - inset, sheet, inset)
            }));
        }
        for kind in [BoundaryKind::TypeI3, BoundaryKind::TypeI4] {
            let ls = self.ls_for(kind, inset);
            out.extend(sampled_curves(kind, SweepParam::Theta2, &t2_sweep, |t2| {
                self.fixed_ls_feasible(ls, t2, inset)
            }));
        }
        for (sheet, line) in self.folds() {
            let samples: Vec<Option<BoundaryPoint>> = line
                .iter()
                .map(|&(t1, t2)| {
                    self.feasible_point(t1, t2, *sheet, inset)
                        .map(|b| BoundaryPoint { sweep: t2, ..b })
                })
                .collect();
            out.extend(runs(&samples).into_iter().map(|points| BoundaryCurve {
                kind: BoundaryKind::TypeII,
                driving_param: SweepParam::Theta2,
                points,
            }));
        }
        out
    }

    fn refine(&self, curve: &BoundaryCurve, idx: usize, inset: f64) -> Vec<BoundaryPoint> {
        let p = &self.params;
        if curve.points.len() < 2 {
            return Vec::new();
        }
        let sheet = curve.points[idx].sheet;
        let with_sweep = |s: f64, b: Option<BoundaryPoint>| b.map(|b| BoundaryPoint { sweep: s, ..b });
        match curve.kind {
            BoundaryKind::TypeII => {
                let pts = &curve.points;
                let mut out = Vec::new();
                for (i, j) in [(idx.saturating_sub(1), idx), (idx, (idx + 1).min(pts.len() - 1))] {
                    if i == j {
                        continue;
                    }
                    let a = (pts[i].theta1, pts[i].theta2);
                    let b = (pts[j].theta1, pts[j].theta2);
                    for t in linspace(0.0, 1.0, REFINE_SAMPLES) {
                        let q = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
                        if let Some((t1, t2)) = self.project_on_fold(q, a, b, sheet) {
                            out.extend(with_sweep(t2, self.feasible_point(t1, t2, sheet, inset)));
                        }
                    }
                }
                out
            }
            kind => sweep_neighbourhood(curve, idx, REFINE_SAMPLES)
                .into_iter()
                .filter_map(|s| {
                    let b = match kind {
                        BoundaryKind::TypeI1 => self.feasible_point(p.theta1_max - inset, s, sheet, inset),
                        BoundaryKind::TypeI2 => self.feasible_point(s, p.theta2_max - inset, sheet, inset),
                        _ => self.fixed_ls_feasible(self.ls_for(kind, inset), s, inset),
                    };
                    with_sweep(s, b)
                })
                .collect(),
        }
    }

    fn draw_barriers(&self, raster: &mut Raster) {
        let p = self.params;
        for &sheet in self.sheets() {
            raster.draw_parametric(&|t2| self.raw_point(p.theta1_max, t2, sheet), 0.0, p.theta2_max, BARRIER_SAMPLES);
            raster.draw_parametric(&|t1| self.raw_point(t1, p.theta2_max, sheet), 0.0, p.theta1_max, BARRIER_SAMPLES);
        }
        for ls in [0.0, p.ls_max] {
            raster.draw_parametric(
                &|t2| {
                    let (t1, ax, az) = self.fixed_ls_point(ls, t2)?;
                    (t1 <= p.theta1_max).then_some((ax, az))
                },
                0.0,
                p.theta2_max,
                BARRIER_SAMPLES,
            );
        }
        let draw_mapped = |raster: &mut Raster, line: &[(f64, f64)], map: &dyn Fn(f64, f64) -> Option<(f64, f64)>| {
            let mapped: Vec<Option<(f64, f64)>> = line.iter().map(|&(t1, t2)| map(t1, t2)).collect();
            for run in runs(&mapped) {
                raster.draw_polyline(&run);
            }
        };
        for (sheet, line) in self.folds() {
            draw_mapped(raster, line, &|t1, t2| self.raw_point(t1, t2, *sheet));
        }
        // Where the sheets meet.
        let seam = self.contours(&|t1, t2| Some(self.parts(t1, t2).d));
        for line in &seam {
            draw_mapped(raster, line, &|t1, t2| {
                let parts = self.parts(t1, t2);
                let (ax, az, _) = self.complete(&parts, t2, -parts.u * parts.c1 / parts.v);
                Some((ax, az))
            });
        }
    }

    fn build_config(&self, t1: f64, t2: f64, _sheet: i8, target: &Pose) -> Option<Config> {
        let p = &self.params;
        let parts = self.parts(t1, t2);
        let az = target.approach().z;
        let (_, _, ls) = self.complete(&parts, t2, az);
        let l2 = p.l20 * tan_half_ratio(t2);
        let shape = shape_points(target, p, parts.l1, l2, ls);
        let (phi, delta1, delta2) = recover_orientation_angles(&shape, target, t1, t2).ok()?;
        Some(Config::Ci2(ConfigCi2 {
            ls,
            phi,
            theta1: t1,
            delta1,
            theta2: t2,
            delta2,
        }))
    }
}
