//! Dyadic cube lattice over the support of a measure.
//!
//! Generations are axis-aligned squares of side `2^-j` translated by a
//! seed-derived offset and intersected with the support point set; empty
//! cells are dropped. Every generation partitions the support and children
//! nest exactly, the two properties the corona machinery relies on.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::beta::best_line_of_indices;
use crate::error::{CoreError, Result};
use crate::geometry::{Line, Point2};
use crate::measures::DiscreteMeasure;
use crate::summation::NeumaierSum;

/// One dyadic cube: generation, grid coordinates, member points and the
/// flatness data computed against its 3Q neighborhood.
#[derive(Debug, Clone, Serialize)]
pub struct Cube {
    /// Generation; side length is `2^-j`.
    pub j: i32,
    pub ix: i64,
    pub iy: i64,
    /// Indices into the measure's support, ascending.
    #[serde(skip)]
    pub members: Vec<u32>,
    pub mass: f64,
    /// Index of the parent cube in the lattice, if not at the top generation.
    pub parent: Option<usize>,
    #[serde(skip)]
    pub children: Vec<usize>,
    /// `beta_1(Q)` over the 3Q neighborhood against `line`.
    pub beta1: f64,
    /// Best approximating line `L_Q`.
    pub line: Line,
}

impl Cube {
    pub fn side(&self) -> f64 {
        (2.0f64).powi(-self.j)
    }
}

/// The cube hierarchy of a measure over a range of generations.
#[derive(Debug, Clone)]
pub struct CubeLattice {
    pub j_min: i32,
    pub j_max: i32,
    /// Grid origin; cube (j, ix, iy) covers
    /// `[origin + ix*side, origin + (ix+1)*side) x [...)`.
    pub origin: Point2,
    /// Cubes sorted by (j, ix, iy); generations are contiguous runs.
    pub cubes: Vec<Cube>,
    gen_ranges: Vec<(usize, usize)>,
}

impl CubeLattice {
    pub fn generation(&self, j: i32) -> &[Cube] {
        let (s, e) = self.gen_ranges[(j - self.j_min) as usize];
        &self.cubes[s..e]
    }

    pub fn generation_indices(&self, j: i32) -> std::ops::Range<usize> {
        let (s, e) = self.gen_ranges[(j - self.j_min) as usize];
        s..e
    }

    /// Lower-left corner of a cube.
    pub fn corner(&self, cube: &Cube) -> Point2 {
        let side = cube.side();
        Point2::new(
            self.origin.x + cube.ix as f64 * side,
            self.origin.y + cube.iy as f64 * side,
        )
    }

    /// Distance from a point to the closed cube square.
    pub fn dist_to_cube(&self, cube: &Cube, p: &Point2) -> f64 {
        let c = self.corner(cube);
        let side = cube.side();
        let dx = (c.x - p.x).max(p.x - (c.x + side)).max(0.0);
        let dy = (c.y - p.y).max(p.y - (c.y + side)).max(0.0);
        (dx * dx + dy * dy).sqrt()
    }

    /// Support indices of the `aQ` neighborhood: points within distance
    /// `(a-1) * side` of the cube square.
    pub fn neighborhood(&self, mu: &DiscreteMeasure, cube: &Cube, a: f64) -> Vec<u32> {
        let side = cube.side();
        let reach = (a - 1.0) * side;
        let c = self.corner(cube);
        let min = Point2::new(c.x - reach, c.y - reach);
        let max = Point2::new(c.x + side + reach, c.y + side + reach);
        let mut idx = mu.indices_in_rect(min, max);
        idx.retain(|&i| self.dist_to_cube(cube, &mu.point(i as usize)) <= reach);
        idx
    }
}

/// Build the lattice for generations `j_min..=j_max` with a seed-derived
/// grid offset. Per-cube `beta_1` and best lines are computed over the 3Q
/// neighborhoods.
pub fn build_cubes(
    mu: &DiscreteMeasure,
    j_min: i32,
    j_max: i32,
    offset_seed: u64,
) -> Result<CubeLattice> {
    if j_min > j_max {
        return Err(CoreError::InvalidInput("j_min must be <= j_max".into()));
    }
    if (j_max - j_min) as u32 > 40 {
        return Err(CoreError::ResourceLimit(
            "generation span > 40 rejected".into(),
        ));
    }
    if mu.is_empty() {
        return Err(CoreError::InvalidInput("empty measure".into()));
    }
    let top_side = (2.0f64).powi(-j_min);
    let mut rng = ChaCha8Rng::seed_from_u64(offset_seed);
    let (u, v): (f64, f64) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
    let bbox = mu.bbox();
    let origin = Point2::new(bbox.min.x - u * top_side, bbox.min.y - v * top_side);

    let mut cubes: Vec<Cube> = Vec::new();
    let mut gen_ranges = Vec::new();
    // (j, ix, iy) -> cube index, for parent lookups of the next generation.
    let mut prev_gen: std::collections::HashMap<(i64, i64), usize> = Default::default();
    for j in j_min..=j_max {
        let side = (2.0f64).powi(-j);
        let mut groups: std::collections::BTreeMap<(i64, i64), Vec<u32>> = Default::default();
        for (i, p) in mu.points().iter().enumerate() {
            let ix = ((p.x - origin.x) / side).floor() as i64;
            let iy = ((p.y - origin.y) / side).floor() as i64;
            groups.entry((ix, iy)).or_default().push(i as u32);
        }
        let start = cubes.len();
        let mut this_gen: std::collections::HashMap<(i64, i64), usize> = Default::default();
        for ((ix, iy), members) in groups {
            let mut mass = NeumaierSum::new();
            for &i in &members {
                mass.add(mu.weight(i as usize));
            }
            let parent = if j == j_min {
                None
            } else {
                Some(prev_gen[&(ix.div_euclid(2), iy.div_euclid(2))])
            };
            let idx = cubes.len();
            this_gen.insert((ix, iy), idx);
            if let Some(p) = parent {
                cubes[p].children.push(idx);
            }
            cubes.push(Cube {
                j,
                ix,
                iy,
                members,
                mass: mass.value(),
                parent,
                children: Vec::new(),
                beta1: 0.0,
                line: Line::new(Point2::ORIGIN, 0.0),
            });
        }
        gen_ranges.push((start, cubes.len()));
        prev_gen = this_gen;
    }

    let lattice = CubeLattice {
        j_min,
        j_max,
        origin,
        cubes,
        gen_ranges,
    };
    Ok(compute_flatness(lattice, mu))
}

/// `beta_1(Q)` and `L_Q` for one cube: the beta-2 best line of the 3Q
/// neighborhood, with the beta-1 value reported against it, both normalized
/// by the side length.
pub fn cube_beta1(lattice: &CubeLattice, mu: &DiscreteMeasure, cube: &Cube) -> (f64, Line) {
    let idx = lattice.neighborhood(mu, cube, 3.0);
    let ell = cube.side();
    // 3Q always contains the cube's own members.
    let (line, _) = best_line_of_indices(mu, &idx, ell).expect("3Q contains the cube members");
    let mut acc = NeumaierSum::new();
    for &i in &idx {
        acc.add(line.dist(&mu.point(i as usize)) * mu.weight(i as usize));
    }
    (acc.value() / (ell * ell), line)
}

fn compute_flatness(mut lattice: CubeLattice, mu: &DiscreteMeasure) -> CubeLattice {
    let flat: Vec<(f64, Line)> = lattice
        .cubes
        .par_iter()
        .map(|cube| cube_beta1(&lattice, mu, cube))
        .collect();
    for (cube, (beta1, line)) in lattice.cubes.iter_mut().zip(flat) {
        cube.beta1 = beta1;
        cube.line = line;
    }
    lattice
}

/// Empirical Carleson packing ratio over a root cube:
/// `sum over descendants Q of R (R included) with beta_1(Q) >= eps of mu(Q)`,
/// divided by `mu(R)`.
pub fn weak_geometric_packing(lattice: &CubeLattice, eps: f64, root: usize) -> f64 {
    let mut total = NeumaierSum::new();
    let mut stack = vec![root];
    while let Some(q) = stack.pop() {
        let cube = &lattice.cubes[q];
        if cube.beta1 >= eps {
            total.add(cube.mass);
        }
        stack.extend_from_slice(&cube.children);
    }
    total.value() / lattice.cubes[root].mass
}

/// The packing ratio maximized over every cube as root, computed in one
/// bottom-up pass.
pub fn max_packing_ratio(lattice: &CubeLattice, eps: f64) -> f64 {
    let mut bad_subtree = vec![0.0f64; lattice.cubes.len()];
    for j in (lattice.j_min..=lattice.j_max).rev() {
        for qi in lattice.generation_indices(j) {
            let cube = &lattice.cubes[qi];
            let mut s = if cube.beta1 >= eps { cube.mass } else { 0.0 };
            for &c in &cube.children {
                s += bad_subtree[c];
            }
            bad_subtree[qi] = s;
        }
    }
    lattice
        .cubes
        .iter()
        .enumerate()
        .map(|(i, c)| bad_subtree[i] / c.mass)
        .fold(0.0, f64::max)
}
