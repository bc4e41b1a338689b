//! Membership in the dexterous workspace at one position.
//!
//! The disk is rasterised and cut along every curve that can bound the
//! feasible set: images of the configuration-box faces, the fold curves,
//! and (CI-2) the seam between the two sheets. Inside each resulting cell
//! feasibility is constant, and a cell is feasible when it contains the
//! image of a feasible configuration.

use nalgebra::Vector3;

use super::axial::{self, Band};
use super::contour::{zero_contours, Grid};
use super::raster::{label, Cell, Raster};
use super::{geometry, BoundaryKind, BoundarySet, SymmetryFrame};
use crate::model::{ConfigClass, StructuralParams};

/// Pixels per disk diameter.
const RASTER: usize = 512;
/// Samples per bending angle for feasible witnesses.
const WITNESS_GRID: usize = 150;
/// Witnesses closer than this many pixels to a barrier are ignored.
const WITNESS_CLEARANCE: usize = 2;
/// Components smaller than this many pixels do not count as regions.
const MIN_REGION_PIXELS: usize = 16;
/// How far a query on a barrier pixel looks for a free pixel.
const QUERY_RADIUS: usize = 6;

enum Membership {
    Cells {
        raster: Raster,
        labels: Vec<Option<u32>>,
        feasible: Vec<bool>,
    },
    Bands(Vec<Band>),
}

/// Boundary curves and a membership test at one position.
pub struct DexterousRegion {
    frame: SymmetryFrame,
    boundaries: BoundarySet,
    membership: Membership,
}

impl DexterousRegion {
    pub fn compute(
        position: &Vector3<f64>,
        class: ConfigClass,
        params: &StructuralParams,
        n_samples: usize,
    ) -> Self {
        let frame = SymmetryFrame::for_position(position);
        let mut boundaries = BoundarySet {
            config_class: class,
            position: [position.x, position.y, position.z],
            gamma: frame.gamma,
            axial: frame.axial,
            curves: Vec::new(),
            disconnected: false,
            regions: Vec::new(),
        };
        if frame.axial {
            let bands = axial::bands(class, frame.p_s.z, params, 0.0);
            boundaries.curves = axial::curves(&bands);
            boundaries.disconnected = bands.len() > 1;
            boundaries.regions = axial::polygons(&bands);
            return Self {
                frame,
                boundaries,
                membership: Membership::Bands(bands),
            };
        }

        let geom = geometry(&frame, class, params);
        boundaries.curves = geom.curves(0.0, n_samples);
        let mut raster = Raster::new(RASTER);
        geom.draw_barriers(&mut raster);
        for curve in &boundaries.curves {
            let pts: Vec<(f64, f64)> = curve.points.iter().map(|b| (b.a_sx, b.a_sz)).collect();
            raster.draw_polyline(&pts);
        }
        let (labels, count) = raster.components();
        let mut feasible = vec![false; count];
        let witnesses = geom.witnesses(WITNESS_GRID);
        // Thin regions can have every witness next to a barrier; then any
        // witness on a free pixel counts.
        for clearance in [WITNESS_CLEARANCE, 0] {
            for &w in &witnesses {
                if let Some((i, j)) = raster.pixel(w) {
                    if raster.clear_around(i, j, clearance) {
                        if let Some(l) = labels[i * raster.n + j] {
                            feasible[l as usize] = true;
                        }
                    }
                }
            }
            if feasible.contains(&true) {
                break;
            }
        }
        let mask = filled_mask(&raster, &labels, &feasible);
        let (region_labels, regions) = label(raster.n, |k| mask[k]);
        let mut sizes = vec![0usize; regions];
        for l in region_labels.iter().flatten() {
            sizes[*l as usize] += 1;
        }
        boundaries.disconnected = sizes.iter().filter(|&&s| s >= MIN_REGION_PIXELS).count() > 1;
        boundaries.regions = outline(&raster, &mask);
        Self {
            frame,
            boundaries,
            membership: Membership::Cells {
                raster,
                labels,
                feasible,
            },
        }
    }

    pub fn frame(&self) -> &SymmetryFrame {
        &self.frame
    }

    pub fn boundaries(&self) -> &BoundarySet {
        &self.boundaries
    }

    pub fn into_boundaries(self) -> BoundarySet {
        self.boundaries
    }

    /// Whether the disk point `(a_sx, a_sz)` is a reachable direction.
    pub fn contains(&self, a_sx: f64, a_sz: f64) -> bool {
        match &self.membership {
            Membership::Bands(bands) => bands.iter().any(|b| b.contains(a_sz)),
            Membership::Cells {
                raster,
                labels,
                feasible,
            } => {
                let Some((i, j)) = raster.pixel((a_sx, a_sz)) else {
                    return false;
                };
                let (i, j) = if raster.at(i, j) == Cell::Free {
                    (i, j)
                } else {
                    match raster.nearest_free(i, j, QUERY_RADIUS) {
                        Some(p) => p,
                        None => return false,
                    }
                };
                labels[i * raster.n + j].is_some_and(|l| feasible[l as usize])
            }
        }
    }

    /// Whether a world-frame pointing direction is reachable.
    pub fn contains_direction(&self, direction: &Vector3<f64>) -> bool {
        let s = self.frame.to_frame(&direction.normalize());
        self.contains(s.x, s.z)
    }

    /// Disk distance from `(a_sx, a_sz)` to the nearest boundary curve.
    pub fn distance_to_boundary(&self, a_sx: f64, a_sz: f64) -> f64 {
        self.boundaries.distance_to_boundary(a_sx, a_sz)
    }

    /// Kinds of boundary present.
    pub fn kinds(&self) -> Vec<BoundaryKind> {
        let mut k: Vec<BoundaryKind> = self.boundaries.curves.iter().map(|c| c.kind).collect();
        k.sort();
        k.dedup();
        k
    }
}

/// Feasibility of every pixel inside the disk; barrier pixels take the
/// value of the nearest free pixel.
fn filled_mask(raster: &Raster, labels: &[Option<u32>], feasible: &[bool]) -> Vec<bool> {
    let n = raster.n;
    let mut value: Vec<Option<bool>> = labels
        .iter()
        .map(|l| l.map(|l| feasible[l as usize]))
        .collect();
    let mut frontier: Vec<usize> = (0..n * n).filter(|&k| value[k].is_some()).collect();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &k in &frontier {
            let (i, j) = (k / n, k % n);
            let v = value[k];
            let nbrs = [
                (i > 0).then(|| k - n),
                (i + 1 < n).then(|| k + n),
                (j > 0).then(|| k - 1),
                (j + 1 < n).then(|| k + 1),
            ];
            for m in nbrs.into_iter().flatten() {
                if value[m].is_none() && raster.cells[m] == Cell::Barrier {
                    value[m] = v;
                    next.push(m);
                }
            }
        }
        frontier = next;
    }
    value.into_iter().map(|v| v == Some(true)).collect()
}

/// Outlines of the feasible pixels as closed polylines.
fn outline(raster: &Raster, mask: &[bool]) -> Vec<Vec<[f64; 2]>> {
    let n = raster.n;
    let axis: Vec<f64> = (0..n).map(|i| raster.center(i, 0).0).collect();
    let values: Vec<Option<f64>> = mask.iter().map(|&m| Some(if m { 1.0 } else { -1.0 })).collect();
    let grid = Grid {
        us: &axis,
        vs: &axis,
        values: &values,
    };
    zero_contours(&grid, &|a, b| Some((0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1))))
        .into_iter()
        .map(|line| line.into_iter().map(|(x, z)| [x, z]).collect())
        .collect()
}
