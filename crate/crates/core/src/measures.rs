//! Discrete weighted measures with a uniform-grid spatial index, plus the
//! ball/density queries, renormalization and the three-ball decomposition.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geometry::{Ball, Point2};
use crate::summation::NeumaierSum;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Bbox {
    pub min: Point2,
    pub max: Point2,
}

impl Bbox {
    pub fn diagonal(&self) -> f64 {
        self.max.dist(&self.min)
    }

    pub fn center(&self) -> Point2 {
        Point2::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }
}

/// Uniform-grid index over the support points, CSR layout.
///
/// Cell size is (bbox diagonal)/ceil(sqrt(N)), clamped below at 1e-9, which
/// gives O(1) expected occupancy on quasi-uniform clouds.
#[derive(Debug, Clone)]
struct GridIndex {
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    starts: Vec<u32>,
    entries: Vec<u32>,
}

impl GridIndex {
    fn build(points: &[Point2], bbox: &Bbox) -> GridIndex {
        let n = points.len();
        let diag = bbox.diagonal();
        let cell = (diag / (n as f64).sqrt().ceil()).max(1e-9);
        let nx = (((bbox.max.x - bbox.min.x) / cell).floor() as usize + 1).max(1);
        let ny = (((bbox.max.y - bbox.min.y) / cell).floor() as usize + 1).max(1);
        let cell_of = |p: &Point2| -> usize {
            let cx = (((p.x - bbox.min.x) / cell).floor() as usize).min(nx - 1);
            let cy = (((p.y - bbox.min.y) / cell).floor() as usize).min(ny - 1);
            cy * nx + cx
        };
        let mut counts = vec![0u32; nx * ny + 1];
        for p in points {
            counts[cell_of(p) + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let starts = counts.clone();
        let mut cursor = counts;
        let mut entries = vec![0u32; n];
        // Points inserted in index order, so each cell's list is sorted.
        for (i, p) in points.iter().enumerate() {
            let c = cell_of(p);
            entries[cursor[c] as usize] = i as u32;
            cursor[c] += 1;
        }
        GridIndex {
            origin: bbox.min,
            cell,
            nx,
            ny,
            starts,
            entries,
        }
    }

    fn cell_range(&self, lo: f64, hi: f64, origin: f64, count: usize) -> (usize, usize) {
        let a = ((lo - origin) / self.cell).floor();
        let b = ((hi - origin) / self.cell).floor();
        let a = (a.max(0.0) as usize).min(count - 1);
        let b = (b.max(0.0) as usize).min(count - 1);
        (a, b)
    }

    /// Visit candidate indices whose grid cell intersects the rectangle,
    /// in ascending index order within each cell row scan.
    fn for_each_in_rect<F: FnMut(u32)>(&self, min: Point2, max: Point2, mut f: F) {
        if max.x < self.origin.x || max.y < self.origin.y {
            return;
        }
        let (cx0, cx1) = self.cell_range(min.x, max.x, self.origin.x, self.nx);
        let (cy0, cy1) = self.cell_range(min.y, max.y, self.origin.y, self.ny);
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                let c = cy * self.nx + cx;
                let s = self.starts[c] as usize;
                let e = self.starts[c + 1] as usize;
                for &idx in &self.entries[s..e] {
                    f(idx);
                }
            }
        }
    }
}

/// A finite positive measure on the plane: weighted points plus the spatial
/// index. Immutable after construction; all queries are read-only.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    points: Vec<Point2>,
    weights: Vec<f64>,
    total_mass: f64,
    bbox: Bbox,
    index: GridIndex,
}

impl DiscreteMeasure {
    /// Build a measure from points and positive weights.
    pub fn build(points: Vec<Point2>, weights: Vec<f64>) -> Result<DiscreteMeasure> {
        if points.is_empty() {
            return Err(CoreError::InvalidInput("empty point cloud".into()));
        }
        if points.len() != weights.len() {
            return Err(CoreError::InvalidInput(
                "points/weights length mismatch".into(),
            ));
        }
        for p in &points {
            if !p.is_finite() {
                return Err(CoreError::InvalidInput("non-finite coordinate".into()));
            }
        }
        for &w in &weights {
            if !(w > 0.0) || !w.is_finite() {
                return Err(CoreError::InvalidInput(
                    "weights must be positive and finite".into(),
                ));
            }
        }
        let mut min = points[0];
        let mut max = points[0];
        for p in &points {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        let bbox = Bbox { min, max };
        let mut acc = NeumaierSum::new();
        for &w in &weights {
            acc.add(w);
        }
        let index = GridIndex::build(&points, &bbox);
        Ok(DiscreteMeasure {
            points,
            weights,
            total_mass: acc.value(),
            bbox,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self, i: usize) -> Point2 {
        self.points[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn bbox(&self) -> Bbox {
        self.bbox
    }

    /// Indices of support points inside the closed ball, ascending.
    pub fn indices_in_ball(&self, ball: &Ball) -> Vec<u32> {
        let r = ball.radius;
        let min = Point2::new(ball.center.x - r, ball.center.y - r);
        let max = Point2::new(ball.center.x + r, ball.center.y + r);
        let r2 = r * r;
        let mut out = Vec::new();
        self.index.for_each_in_rect(min, max, |i| {
            if self.points[i as usize].dist_sq(&ball.center) <= r2 {
                out.push(i);
            }
        });
        out.sort_unstable();
        out
    }

    /// Indices of support points inside the closed axis-aligned rectangle.
    pub fn indices_in_rect(&self, min: Point2, max: Point2) -> Vec<u32> {
        let mut out = Vec::new();
        self.index.for_each_in_rect(min, max, |i| {
            let p = self.points[i as usize];
            if p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y {
                out.push(i);
            }
        });
        out.sort_unstable();
        out
    }

    /// Mass of the closed ball.
    pub fn mass_in_ball(&self, ball: &Ball) -> f64 {
        let r2 = ball.radius * ball.radius;
        let min = Point2::new(ball.center.x - ball.radius, ball.center.y - ball.radius);
        let max = Point2::new(ball.center.x + ball.radius, ball.center.y + ball.radius);
        let mut acc = NeumaierSum::new();
        let mut idx: Vec<u32> = Vec::new();
        self.index.for_each_in_rect(min, max, |i| {
            if self.points[i as usize].dist_sq(&ball.center) <= r2 {
                idx.push(i);
            }
        });
        idx.sort_unstable();
        for i in idx {
            acc.add(self.weights[i as usize]);
        }
        acc.value()
    }

    /// Density `mu(B(x,t)) / t`.
    pub fn density(&self, ball: &Ball) -> f64 {
        self.mass_in_ball(ball) / ball.radius
    }

    /// Empirical linear-growth constant: the maximum of
    /// `mu(B)/diam(B)` over balls centered at every support point with the
    /// given radii. A lower estimate of the best `C0` in
    /// `mu(B) <= C0 diam(B)`.
    pub fn linear_growth_constant(&self, probe_scales: &[f64]) -> Result<f64> {
        if probe_scales.is_empty() {
            return Err(CoreError::InvalidInput("no probe scales".into()));
        }
        let mut best = 0.0f64;
        for &r in probe_scales {
            if !(r > 0.0) {
                return Err(CoreError::InvalidInput("probe scale must be > 0".into()));
            }
            for p in &self.points {
                let m = self.mass_in_ball(&Ball { center: *p, radius: r });
                best = best.max(m / (2.0 * r));
            }
        }
        Ok(best)
    }

    /// Renormalized measure: positions mapped through `(x - x0)/d`, weights
    /// divided by `d`. Permutation sums covary as `p(nu) = p(mu)/d`.
    pub fn renormalize(&self, d: f64, x0: &Point2) -> Result<DiscreteMeasure> {
        if !(d > 0.0) {
            return Err(CoreError::InvalidInput("diameter must be > 0".into()));
        }
        let inv = 1.0 / d;
        let points = self
            .points
            .iter()
            .map(|p| p.sub(x0).scale(inv))
            .collect::<Vec<_>>();
        let weights = self.weights.iter().map(|w| w * inv).collect::<Vec<_>>();
        DiscreteMeasure::build(points, weights)
    }

    /// Restriction of the measure to the closed ball.
    pub fn restrict_to_ball(&self, ball: &Ball) -> Result<DiscreteMeasure> {
        let idx = self.indices_in_ball(ball);
        self.restrict_to_indices(&idx)
    }

    /// Restriction to a subset of support indices.
    pub fn restrict_to_indices(&self, indices: &[u32]) -> Result<DiscreteMeasure> {
        if indices.is_empty() {
            return Err(CoreError::Empty("restriction selects no points".into()));
        }
        let points = indices
            .iter()
            .map(|&i| self.points[i as usize])
            .collect::<Vec<_>>();
        let weights = indices
            .iter()
            .map(|&i| self.weights[i as usize])
            .collect::<Vec<_>>();
        DiscreteMeasure::build(points, weights)
    }

    /// Three-ball decomposition of a dense ball: three balls of radius
    /// `r(B)/C1` centered at support points in `B`, with pairwise center
    /// distances at least `12 r(B)/C1` and mass at least `r(B)/(C1*C1')`
    /// each, with `C1' = C1`. `C1` is searched over the geometric schedule
    /// {4, 8, ..., 1024}; `None` when no admissible `C1` exists.
    pub fn three_ball_decomposition(&self, ball: &Ball, delta: f64) -> Option<[Ball; 3]> {
        if self.density(ball) < delta {
            return None;
        }
        let inside = self.indices_in_ball(ball);
        let mut c1 = 4.0f64;
        while c1 <= 1024.0 {
            let r_small = ball.radius / c1;
            let sep = 12.0 * ball.radius / c1;
            let want_mass = r_small / c1;
            if let Some(balls) = self.pick_three_separated(&inside, r_small, sep, want_mass) {
                return Some(balls);
            }
            c1 *= 2.0;
        }
        None
    }

    fn pick_three_separated(
        &self,
        candidates: &[u32],
        r_small: f64,
        sep: f64,
        want_mass: f64,
    ) -> Option<[Ball; 3]> {
        let mut chosen: Vec<Ball> = Vec::with_capacity(3);
        // Greedy by descending local mass, deterministic tie-break on index.
        let mut scored: Vec<(f64, u32)> = candidates
            .iter()
            .map(|&i| {
                let b = Ball {
                    center: self.points[i as usize],
                    radius: r_small,
                };
                (self.mass_in_ball(&b), i)
            })
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for &(mass, i) in &scored {
            if mass < want_mass {
                break;
            }
            let c = self.points[i as usize];
            if chosen.iter().all(|b| b.center.dist(&c) >= sep) {
                chosen.push(Ball {
                    center: c,
                    radius: r_small,
                });
                if chosen.len() == 3 {
                    return Some([chosen[0], chosen[1], chosen[2]]);
                }
            }
        }
        None
    }
}
