//! Zero level sets of sampled scalar fields (marching squares).

use std::collections::HashMap;

/// A field sampled on the tensor grid `us × vs`; `None` marks points where
/// the field is undefined. Cells touching an undefined corner are skipped.
pub(crate) struct Grid<'a> {
    pub us: &'a [f64],
    pub vs: &'a [f64],
    /// Row-major: `values[i * vs.len() + j]` is the sample at `(us[i], vs[j])`.
    pub values: &'a [Option<f64>],
}

impl Grid<'_> {
    fn at(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.vs.len() + j]
    }
}

/// Grid edge identified by its lower corner and direction (0: along u, 1: along v).
type EdgeId = (usize, usize, u8);

/// Extracts the zero contour as polylines in `(u, v)`.
///
/// `refine(a, b)` must return the zero crossing between two grid points whose
/// values have opposite signs; pass linear interpolation when no better
/// estimate is available.
pub(crate) fn zero_contours(
    grid: &Grid,
    refine: &dyn Fn((f64, f64), (f64, f64)) -> Option<(f64, f64)>,
) -> Vec<Vec<(f64, f64)>> {
    let (nu, nv) = (grid.us.len(), grid.vs.len());
    if nu < 2 || nv < 2 {
        return Vec::new();
    }
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut edge_point: HashMap<EdgeId, Option<usize>> = HashMap::new();
    let sign = |v: f64| v >= 0.0;

    let mut crossing = |edge: EdgeId, points: &mut Vec<(f64, f64)>| -> Option<usize> {
        *edge_point.entry(edge).or_insert_with(|| {
            let (i, j, dir) = edge;
            let (i2, j2) = if dir == 0 { (i + 1, j) } else { (i, j + 1) };
            let (fa, fb) = (grid.at(i, j)?, grid.at(i2, j2)?);
            if sign(fa) == sign(fb) {
                return None;
            }
            let pa = (grid.us[i], grid.vs[j]);
            let pb = (grid.us[i2], grid.vs[j2]);
            let p = refine(pa, pb)?;
            points.push(p);
            Some(points.len() - 1)
        })
    };

    let mut segments: Vec<(usize, usize)> = Vec::new();
    for i in 0..nu - 1 {
        for j in 0..nv - 1 {
            let corners = [grid.at(i, j), grid.at(i + 1, j), grid.at(i + 1, j + 1), grid.at(i, j + 1)];
            if corners.iter().any(Option::is_none) {
                continue;
            }
            let first = sign(corners[0].unwrap());
            if corners.iter().all(|c| sign(c.unwrap()) == first) {
                continue;
            }
            // Edges in order: bottom (v = j), right (u = i+1), top (v = j+1), left (u = i).
            let edges: [EdgeId; 4] = [(i, j, 0), (i + 1, j, 1), (i, j + 1, 0), (i, j, 1)];
            let hits: Vec<usize> = edges
                .iter()
                .filter_map(|&e| crossing(e, &mut points))
                .collect();
            match hits.len() {
                2 => segments.push((hits[0], hits[1])),
                4 => {
                    // Saddle: pair by the sign of the cell average.
                    let avg: f64 = corners.iter().map(|c| c.unwrap()).sum::<f64>() / 4.0;
                    let c0 = sign(corners[0].unwrap());
                    if sign(avg) == c0 {
                        segments.push((hits[0], hits[1]));
                        segments.push((hits[2], hits[3]));
                    } else {
                        segments.push((hits[0], hits[3]));
                        segments.push((hits[1], hits[2]));
                    }
                }
                _ => {}
            }
        }
    }
    chain(&points, &segments)
}

/// Joins segments sharing endpoints into maximal polylines.
fn chain(points: &[(f64, f64)], segments: &[(usize, usize)]) -> Vec<Vec<(f64, f64)>> {
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); points.len()];
    for (k, &(a, b)) in segments.iter().enumerate() {
        adjacency[a].push(k);
        adjacency[b].push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    let walk = |start: usize, used: &mut Vec<bool>| -> Vec<usize> {
        let mut path = vec![start];
        let mut cur = start;
        while let Some(&k) = adjacency[cur].iter().find(|&&k| !used[k]) {
            used[k] = true;
            let (a, b) = segments[k];
            cur = if a == cur { b } else { a };
            path.push(cur);
        }
        path
    };
    // Open chains first, starting from endpoints, then closed loops.
    let mut order: Vec<usize> = (0..points.len()).filter(|&p| adjacency[p].len() == 1).collect();
    order.extend((0..points.len()).filter(|&p| adjacency[p].len() != 1));
    for start in order {
        if adjacency[start].iter().all(|&k| used[k]) {
            continue;
        }
        let path = walk(start, &mut used);
        if path.len() >= 2 {
            lines.push(path.into_iter().map(|p| points[p]).collect());
        }
    }
    lines
}

/// Bisects along the segment `a → b` for a zero of `f`; `f(a)` and `f(b)`
/// must have opposite signs.
pub(crate) fn bisect_segment(
    f: &dyn Fn(f64, f64) -> Option<f64>,
    a: (f64, f64),
    b: (f64, f64),
    steps: usize,
) -> Option<(f64, f64)> {
    let fa = f(a.0, a.1)?;
    let (mut lo, mut hi) = (0.0, 1.0);
    let lerp = |t: f64| (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        let (u, v) = lerp(mid);
        let fm = f(u, v)?;
        if (fm >= 0.0) == (fa >= 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lerp(0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_contour_is_one_closed_loop() {
        let n = 41;
        let axis: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
        let f = |u: f64, v: f64| Some(u * u + v * v - 0.5);
        let values: Vec<Option<f64>> = axis
            .iter()
            .flat_map(|&u| axis.iter().map(move |&v| f(u, v)))
            .collect();
        let grid = Grid {
            us: &axis,
            vs: &axis,
            values: &values,
        };
        let lines = zero_contours(&grid, &|a, b| bisect_segment(&f, a, b, 50));
        assert_eq!(lines.len(), 1);
        let loop_ = &lines[0];
        assert!(loop_.len() > 20);
        assert_eq!(loop_.first(), loop_.last());
        for &(u, v) in loop_ {
            assert!((u * u + v * v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn undefined_cells_split_lines() {
        let axis: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let values: Vec<Option<f64>> = axis
            .iter()
            .flat_map(|&u| {
                axis.iter()
                    .map(move |&v| if (u - 5.0).abs() < 0.5 { None } else { Some(v - 4.5) })
            })
            .collect();
        let grid = Grid {
            us: &axis,
            vs: &axis,
            values: &values,
        };
        let lines = zero_contours(&grid, &|a, b| Some(((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0)));
        assert_eq!(lines.len(), 2);
    }
}
