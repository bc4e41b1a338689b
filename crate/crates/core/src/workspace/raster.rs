//! Pixel grid over the unit disk used to split it into cells bounded by
//! candidate boundary curves.

use std::collections::VecDeque;

/// Sampled curve points farther apart than this (disk units) are not joined.
const MAX_JOIN: f64 = 0.1;

/// Points outside this box are treated as undefined when drawing.
const DRAW_BOX: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Cell {
    /// Outside the disk, or within one pixel of its rim.
    Wall,
    Barrier,
    Free,
}

pub(crate) struct Raster {
    pub n: usize,
    /// Pixel edge length.
    pub h: f64,
    pub cells: Vec<Cell>,
}

impl Raster {
    pub fn new(n: usize) -> Self {
        let h = 2.0 / n as f64;
        let mut cells = vec![Cell::Wall; n * n];
        for i in 0..n {
            for j in 0..n {
                let (x, z) = Self::center_of(h, i, j);
                if x.hypot(z) < 1.0 - h {
                    cells[i * n + j] = Cell::Free;
                }
            }
        }
        Self { n, h, cells }
    }

    fn center_of(h: f64, i: usize, j: usize) -> (f64, f64) {
        (-1.0 + (i as f64 + 0.5) * h, -1.0 + (j as f64 + 0.5) * h)
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        Self::center_of(self.h, i, j)
    }

    pub fn pixel(&self, p: (f64, f64)) -> Option<(usize, usize)> {
        let i = ((p.0 + 1.0) / self.h).floor();
        let j = ((p.1 + 1.0) / self.h).floor();
        let n = self.n as f64;
        (i >= 0.0 && j >= 0.0 && i < n && j < n).then(|| (i as usize, j as usize))
    }

    pub fn at(&self, i: usize, j: usize) -> Cell {
        self.cells[i * self.n + j]
    }

    fn mark(&mut self, i: i64, j: i64) {
        let n = self.n as i64;
        if i >= 0 && j >= 0 && i < n && j < n {
            let c = &mut self.cells[(i * n + j) as usize];
            if *c == Cell::Free {
                *c = Cell::Barrier;
            }
        }
    }

    /// Marks every pixel the segment passes through (a 4-connected chain).
    pub fn draw_segment(&mut self, a: (f64, f64), b: (f64, f64)) {
        let h = self.h;
        let idx = |v: f64| ((v + 1.0) / h).floor() as i64;
        let (mut i, mut j) = (idx(a.0), idx(a.1));
        let (ie, je) = (idx(b.0), idx(b.1));
        let (dx, dz) = (b.0 - a.0, b.1 - a.1);
        let step_i = if dx > 0.0 { 1 } else { -1 };
        let step_j = if dz > 0.0 { 1 } else { -1 };
        let first_crossing = |cell: i64, step: i64, start: f64, d: f64| {
            if d == 0.0 {
                return f64::INFINITY;
            }
            let edge = if step > 0 { cell + 1 } else { cell } as f64 * h - 1.0;
            (edge - start) / d
        };
        let mut t_x = first_crossing(i, step_i, a.0, dx);
        let mut t_z = first_crossing(j, step_j, a.1, dz);
        let dt_x = if dx != 0.0 { h / dx.abs() } else { f64::INFINITY };
        let dt_z = if dz != 0.0 { h / dz.abs() } else { f64::INFINITY };
        self.mark(i, j);
        for _ in 0..(ie - i).abs() + (je - j).abs() {
            if t_x < t_z {
                t_x += dt_x;
                i += step_i;
            } else {
                t_z += dt_z;
                j += step_j;
            }
            self.mark(i, j);
        }
    }

    /// Joins consecutive points closer than [`MAX_JOIN`].
    pub fn draw_polyline(&mut self, points: &[(f64, f64)]) {
        if let [p] = points {
            self.draw_segment(*p, *p);
        }
        for w in points.windows(2) {
            if dist(w[0], w[1]) < MAX_JOIN {
                self.draw_segment(w[0], w[1]);
            }
        }
    }

    /// Draws the curve `s ↦ f(s)` over `[a, b]`, subdividing until
    /// consecutive points are at most a pixel apart. Where `f` becomes
    /// undefined the curve is followed up to the edge of its domain.
    pub fn draw_parametric(&mut self, f: &dyn Fn(f64) -> Option<(f64, f64)>, a: f64, b: f64, n: usize) {
        let g = |s: f64| {
            f(s).filter(|p| {
                p.0.is_finite() && p.1.is_finite() && p.0.abs() <= DRAW_BOX && p.1.abs() <= DRAW_BOX
            })
        };
        let ss = super::linspace(a, b, n.max(2));
        let vals: Vec<Option<(f64, f64)>> = ss.iter().map(|&s| g(s)).collect();
        if vals.len() == 1 {
            if let Some(p) = vals[0] {
                self.draw_segment(p, p);
            }
        }
        for k in 0..ss.len() - 1 {
            match (vals[k], vals[k + 1]) {
                (Some(p0), Some(p1)) => self.subdivide(&g, ss[k], p0, ss[k + 1], p1, 12),
                (Some(p0), None) => {
                    if let Some((s, p)) = domain_edge(&g, ss[k], ss[k + 1]) {
                        self.subdivide(&g, ss[k], p0, s, p, 12);
                    }
                }
                (None, Some(p1)) => {
                    if let Some((s, p)) = domain_edge(&g, ss[k + 1], ss[k]) {
                        self.subdivide(&g, s, p, ss[k + 1], p1, 12);
                    }
                }
                (None, None) => {}
            }
        }
    }

    fn subdivide(
        &mut self,
        g: &dyn Fn(f64) -> Option<(f64, f64)>,
        s0: f64,
        p0: (f64, f64),
        s1: f64,
        p1: (f64, f64),
        depth: u32,
    ) {
        let d = dist(p0, p1);
        if d <= self.h {
            self.draw_segment(p0, p1);
            return;
        }
        if depth == 0 {
            if d < MAX_JOIN {
                self.draw_segment(p0, p1);
            }
            return;
        }
        let sm = 0.5 * (s0 + s1);
        match g(sm) {
            Some(pm) => {
                self.subdivide(g, s0, p0, sm, pm, depth - 1);
                self.subdivide(g, sm, pm, s1, p1, depth - 1);
            }
            None => {
                if let Some((s, p)) = domain_edge(g, s0, sm) {
                    self.subdivide(g, s0, p0, s, p, depth - 1);
                }
                if let Some((s, p)) = domain_edge(g, s1, sm) {
                    self.subdivide(g, s, p, s1, p1, depth - 1);
                }
            }
        }
    }

    /// Labels 4-connected components of free pixels; `None` elsewhere.
    pub fn components(&self) -> (Vec<Option<u32>>, usize) {
        label(self.n, |k| self.cells[k] == Cell::Free)
    }

    /// Free pixel nearest to `(i, j)` within `radius` pixels.
    pub fn nearest_free(&self, i: usize, j: usize, radius: usize) -> Option<(usize, usize)> {
        let n = self.n as i64;
        let mut best: Option<((usize, usize), i64)> = None;
        for di in -(radius as i64)..=radius as i64 {
            for dj in -(radius as i64)..=radius as i64 {
                let (a, b) = (i as i64 + di, j as i64 + dj);
                if a < 0 || b < 0 || a >= n || b >= n {
                    continue;
                }
                let d2 = di * di + dj * dj;
                if self.at(a as usize, b as usize) == Cell::Free
                    && best.map_or(true, |(_, bd)| d2 < bd)
                {
                    best = Some(((a as usize, b as usize), d2));
                }
            }
        }
        best.map(|(p, _)| p)
    }

    /// True if every pixel within `radius` of `(i, j)` is free.
    pub fn clear_around(&self, i: usize, j: usize, radius: usize) -> bool {
        let n = self.n;
        if i < radius || j < radius || i + radius >= n || j + radius >= n {
            return false;
        }
        (i - radius..=i + radius)
            .all(|a| (j - radius..=j + radius).all(|b| self.at(a, b) == Cell::Free))
    }
}

/// 4-connected component labelling of the pixels selected by `inside`.
pub(crate) fn label(n: usize, inside: impl Fn(usize) -> bool) -> (Vec<Option<u32>>, usize) {
    let mut labels = vec![None; n * n];
    let mut count = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..n * n {
        if labels[start].is_some() || !inside(start) {
            continue;
        }
        labels[start] = Some(count);
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            let (i, j) = (k / n, k % n);
            let mut visit = |m: usize| {
                if labels[m].is_none() && inside(m) {
                    labels[m] = Some(count);
                    queue.push_back(m);
                }
            };
            if i > 0 {
                visit(k - n);
            }
            if i + 1 < n {
                visit(k + n);
            }
            if j > 0 {
                visit(k - 1);
            }
            if j + 1 < n {
                visit(k + 1);
            }
        }
        count += 1;
    }
    (labels, count as usize)
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Last defined point between `inside` (defined) and `outside` (undefined).
fn domain_edge(
    g: &dyn Fn(f64) -> Option<(f64, f64)>,
    inside: f64,
    outside: f64,
) -> Option<(f64, (f64, f64))> {
    let (mut a, mut b) = (inside, outside);
    let mut best = g(a).map(|p| (a, p));
    for _ in 0..40 {
        let m = 0.5 * (a + b);
        match g(m) {
            Some(p) => {
                best = Some((m, p));
                a = m;
            }
            None => b = m,
        }
    }
    best
}
