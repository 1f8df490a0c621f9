//! Stopping-time regions, the height function `h`, the `Z/F1/F2/F3`
//! partition, the distance functions `d`/`D`, graph extraction and the
//! affine-deviation diagnostic `gamma`.
//!
//! Scales are discretized to the dyadic set `t = 2^-j`. A pair `(x, t)`
//! belongs to `S_total` when the ball is dense (`delta(x,t) >= delta/2`),
//! flat (`beta_1(x,t) < 2 eps`) and admits a flat line within angle `alpha`
//! of the reference line `D0`. The angle clause is an existential over
//! lines, resolved by checking the free best line and the two boundary
//! directions `D0 +- alpha` through the local centroid.

use rayon::prelude::*;

use crate::beta::best_line_of_indices;
use crate::error::{CoreError, Result};
use crate::geometry::{angle_between, angle_to_vertical, Ball, Line, Point2};
use crate::measures::DiscreteMeasure;
use crate::multiscale::params::ParamsLedger;
use crate::summation::NeumaierSum;

/// Which of the partition classes a support point landed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointClass {
    /// `h(x) = 0`: good at every scale.
    Z,
    /// Stopped for low density.
    F1,
    /// Stopped for high beta number.
    F2,
    /// Stopped for line angle against `D0`.
    F3,
}

/// Per-(point, scale) condition table.
struct ScaleTable {
    /// Scales `2^-j` for `j = j_min ..= j_max + 2`.
    scales: Vec<f64>,
    j_min: i32,
    in_s_total: Vec<bool>,
    density: Vec<f64>,
    beta1: Vec<f64>,
    angle_to_d0: Vec<f64>,
}

impl ScaleTable {
    #[inline]
    fn at(&self, point: usize, scale_idx: usize) -> usize {
        point * self.scales.len() + scale_idx
    }

    fn scale_index(&self, j: i32) -> usize {
        (j - self.j_min) as usize
    }
}

/// Output of the stopping-time construction.
pub struct StoppingRegion {
    pub d0: Line,
    pub alpha: f64,
    /// Ball descriptors `(support index, scale)` forming `S`.
    pub s_descriptors: Vec<(u32, f64)>,
    /// Per-point stopping height `h(x)` (zero on `Z`).
    pub h: Vec<f64>,
    pub classes: Vec<PointClass>,
    pub top_scale: f64,
}

impl StoppingRegion {
    pub fn class_indices(&self, class: PointClass) -> Vec<u32> {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == class)
            .map(|(i, _)| i as u32)
            .collect()
    }

    pub fn class_mass(&self, mu: &DiscreteMeasure, class: PointClass) -> f64 {
        let mut acc = NeumaierSum::new();
        for (i, c) in self.classes.iter().enumerate() {
            if *c == class {
                acc.add(mu.weight(i));
            }
        }
        acc.value()
    }

    /// `d(x) = inf over (X,t) in S of (|x - X| + t)`.
    pub fn d_function(&self, mu: &DiscreteMeasure, x: &Point2) -> f64 {
        let mut best = f64::INFINITY;
        for &(i, t) in &self.s_descriptors {
            let v = x.dist(&mu.point(i as usize)) + t;
            if v < best {
                best = v;
            }
        }
        best
    }

    /// `D(p) = inf over (X,t) in S of (|pi(X) - p| + t)` for an abscissa `p`
    /// along `D0`.
    pub fn big_d_function(&self, mu: &DiscreteMeasure, p: f64) -> f64 {
        let mut best = f64::INFINITY;
        for &(i, t) in &self.s_descriptors {
            let v = (self.d0.abscissa(&mu.point(i as usize)) - p).abs() + t;
            if v < best {
                best = v;
            }
        }
        best
    }
}

fn beta1_against(mu: &DiscreteMeasure, idx: &[u32], line: &Line, t: f64) -> f64 {
    let mut acc = NeumaierSum::new();
    for &i in idx {
        acc.add(line.dist(&mu.point(i as usize)) * mu.weight(i as usize));
    }
    acc.value() / (t * t)
}

/// Build the stopping-time region for the scale range `j_min ..= j_max`
/// (conditions are additionally evaluated two generations below `j_max` to
/// resolve the height function near the bottom).
pub fn stopping_time_region(
    mu: &DiscreteMeasure,
    x0: &Point2,
    d0: &Line,
    params: &ParamsLedger,
    j_min: i32,
    j_max: i32,
) -> Result<StoppingRegion> {
    params.validate()?;
    if j_min > j_max {
        return Err(CoreError::InvalidInput("j_min must be <= j_max".into()));
    }
    let top_scale = (2.0f64).powi(-j_min);
    let top_density = mu.density(&Ball {
        center: *x0,
        radius: top_scale,
    });
    if top_density < 0.5 * params.delta {
        return Err(CoreError::Empty(format!(
            "top ball density {top_density:.3e} below delta/2; nothing to build"
        )));
    }
    let alpha = params.alpha_for(angle_to_vertical(d0));
    let eps = params.eps;
    let delta = params.delta;
    let k = params.k_dilate;

    let scales: Vec<f64> = (j_min..=j_max + 2).map(|j| (2.0f64).powi(-j)).collect();
    let n = mu.len();
    let ns = scales.len();

    // Per-(point, scale) conditions, parallel over points.
    let rows: Vec<Vec<(bool, f64, f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = mu.point(i);
            scales
                .iter()
                .map(|&t| {
                    let density = mu.density(&Ball { center: x, radius: t });
                    let idx = mu.indices_in_ball(&Ball {
                        center: x,
                        radius: k * t,
                    });
                    let (line, _) = best_line_of_indices(mu, &idx, t)
                        .expect("dilated ball contains its center point");
                    let beta1 = beta1_against(mu, &idx, &line, t);
                    let angle = angle_between(&line, d0);
                    let density_ok = density >= 0.5 * delta;
                    let beta_ok = beta1 < 2.0 * eps;
                    let mut admissible = angle <= alpha;
                    if density_ok && beta_ok && !admissible {
                        // Existential over lines: try the boundary
                        // directions D0 +- alpha through the local centroid.
                        for sgn in [1.0f64, -1.0] {
                            let cand = Line::new(line.anchor, d0.theta + sgn * alpha);
                            if beta1_against(mu, &idx, &cand, t) <= 2.0 * eps {
                                admissible = true;
                                break;
                            }
                        }
                    }
                    (density_ok && beta_ok && admissible, density, beta1, angle)
                })
                .collect()
        })
        .collect();

    let mut table = ScaleTable {
        scales: scales.clone(),
        j_min,
        in_s_total: vec![false; n * ns],
        density: vec![0.0; n * ns],
        beta1: vec![0.0; n * ns],
        angle_to_d0: vec![0.0; n * ns],
    };
    for (i, row) in rows.iter().enumerate() {
        for (s, &(ok, density, beta1, angle)) in row.iter().enumerate() {
            let at = table.at(i, s);
            table.in_s_total[at] = ok;
            table.density[at] = density;
            table.beta1[at] = beta1;
            table.angle_to_d0[at] = angle;
        }
    }

    // Height function: h(x) is the largest scale t = 2^-j admitting a bad
    // witness (y, t/4) with |y - x| <= (t/4)/3.
    let h: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = mu.point(i);
            let mut h_i = 0.0f64;
            for j in j_min..=j_max {
                let s_idx = table.scale_index(j + 2);
                let s = scales[s_idx];
                let witnesses = mu.indices_in_ball(&Ball {
                    center: x,
                    radius: s / 3.0,
                });
                if witnesses
                    .iter()
                    .any(|&y| !table.in_s_total[table.at(y as usize, s_idx)])
                {
                    h_i = h_i.max((2.0f64).powi(-j));
                }
            }
            h_i
        })
        .collect();

    // S = { (x, t) in S_total : t >= h(x) }, over the lattice scale range.
    let mut s_descriptors = Vec::new();
    for (i, &h_i) in h.iter().enumerate() {
        for j in j_min..=j_max {
            let s_idx = table.scale_index(j);
            let t = scales[s_idx];
            if table.in_s_total[table.at(i, s_idx)] && t >= h_i {
                s_descriptors.push((i as u32, t));
            }
        }
    }

    // First-match partition. The h-witness scale t/4 lies in [h/5, h/2] and
    // its ball B(y, s/3) is inside B(y, s/2), so every non-Z point finds its
    // witness below and lands in exactly one class.
    let classes: Vec<PointClass> = (0..n)
        .into_par_iter()
        .map(|i| {
            if h[i] == 0.0 {
                return Ok(PointClass::Z);
            }
            let x = mu.point(i);
            let j_h = -h[i].log2().round() as i32;
            let mut f1 = false;
            let mut f2 = false;
            let mut f3 = false;
            for js in [j_h + 1, j_h + 2] {
                let s_idx = table.scale_index(js);
                let s = scales[s_idx];
                for &y in &mu.indices_in_ball(&Ball {
                    center: x,
                    radius: s / 2.0,
                }) {
                    let at = table.at(y as usize, s_idx);
                    f1 |= table.density[at] <= delta;
                    f2 |= table.beta1[at] >= eps;
                    f3 |= table.angle_to_d0[at] >= 0.75 * alpha;
                }
            }
            if f1 {
                Ok(PointClass::F1)
            } else if f2 {
                Ok(PointClass::F2)
            } else if f3 {
                Ok(PointClass::F3)
            } else {
                Err(CoreError::Domain(
                    "stopping-time partition incomplete; witness escaped all classes".into(),
                ))
            }
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(StoppingRegion {
        d0: *d0,
        alpha,
        s_descriptors,
        h,
        classes,
        top_scale,
    })
}

/// A piecewise-linear graph function over a base line: exact on its sample
/// abscissae, linearly interpolated between them, constant beyond the hull.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GraphFunction {
    pub base: Line,
    pub abscissae: Vec<f64>,
    pub ordinates: Vec<f64>,
    /// Max slope between consecutive samples.
    pub lipschitz_estimate: f64,
}

impl GraphFunction {
    pub fn eval(&self, u: f64) -> f64 {
        let us = &self.abscissae;
        let vs = &self.ordinates;
        if u <= us[0] {
            return vs[0];
        }
        if u >= us[us.len() - 1] {
            return vs[vs.len() - 1];
        }
        let hi = us.partition_point(|&a| a <= u);
        let (u0, u1) = (us[hi - 1], us[hi]);
        if u == u0 {
            return vs[hi - 1];
        }
        let t = (u - u0) / (u1 - u0);
        vs[hi - 1] + t * (vs[hi] - vs[hi - 1])
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.abscissae[0], self.abscissae[self.abscissae.len() - 1])
    }

    /// The planar point over abscissa `u`.
    pub fn point_at(&self, u: f64) -> Point2 {
        self.base
            .point_at(u)
            .add(&self.base.normal().scale(self.eval(u)))
    }
}

/// Build the graph function from the `Z` points of a stopping region:
/// `A(pi(x)) = pi_perp(x)` on the projections, extended by interpolation.
///
/// Rejects when two `Z` points share an abscissa but differ in ordinate
/// beyond rounding, which signals that `Z` is not a graph over `D0`.
pub fn build_graph_function(
    mu: &DiscreteMeasure,
    z_indices: &[u32],
    d0: &Line,
) -> Result<GraphFunction> {
    if z_indices.is_empty() {
        return Err(CoreError::Empty("no points on the graph set".into()));
    }
    let mut samples: Vec<(f64, f64)> = z_indices
        .iter()
        .map(|&i| {
            let p = mu.point(i as usize);
            (d0.abscissa(&p), d0.ordinate(&p))
        })
        .collect();
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let scale = samples
        .iter()
        .map(|s| s.1.abs())
        .fold(1e-12, f64::max);
    let mut us = Vec::with_capacity(samples.len());
    let mut vs = Vec::with_capacity(samples.len());
    for (u, v) in samples {
        if let Some(&last_u) = us.last() {
            if u == last_u {
                let last_v: f64 = *vs.last().unwrap();
                if (v - last_v).abs() > 1e-9 * scale {
                    return Err(CoreError::Domain(
                        "two graph points share an abscissa with distinct ordinates".into(),
                    ));
                }
                continue;
            }
        }
        us.push(u);
        vs.push(v);
    }
    let mut lip = 0.0f64;
    for i in 1..us.len() {
        lip = lip.max(((vs[i] - vs[i - 1]) / (us[i] - us[i - 1])).abs());
    }
    Ok(GraphFunction {
        base: *d0,
        abscissae: us,
        ordinates: vs,
        lipschitz_estimate: lip,
    })
}

/// Quadrature nodes per gamma window.
const GAMMA_NODES: usize = 512;

/// Affine-deviation functional
/// `gamma(p,t) = inf over affine a of (1/t) integral over the window of
/// |A(u) - a(u)|/t du`, with the infimum taken by a least-squares fit
/// (`gamma_affine`) or refined toward the exact L1 optimum by iterative
/// reweighting (`gamma_affine_l1`).
pub fn gamma_affine(graph: &GraphFunction, p: f64, t: f64) -> Result<f64> {
    gamma_impl(graph, p, t, 0)
}

pub fn gamma_affine_l1(graph: &GraphFunction, p: f64, t: f64, reweight_iters: usize) -> Result<f64> {
    gamma_impl(graph, p, t, reweight_iters)
}

fn gamma_impl(graph: &GraphFunction, p: f64, t: f64, reweight_iters: usize) -> Result<f64> {
    if !(t > 0.0) {
        return Err(CoreError::InvalidInput("gamma needs t > 0".into()));
    }
    let (dom_lo, dom_hi) = graph.domain();
    let lo = (p - t).max(dom_lo);
    let hi = (p + t).min(dom_hi);
    if !(hi > lo) {
        return Err(CoreError::Empty("gamma window misses the graph domain".into()));
    }
    let du = (hi - lo) / GAMMA_NODES as f64;
    let nodes: Vec<(f64, f64)> = (0..GAMMA_NODES)
        .map(|q| {
            let u = lo + (q as f64 + 0.5) * du;
            (u, graph.eval(u))
        })
        .collect();
    // Weighted least-squares affine fit (uniform weights first).
    let fit = |w: &[f64]| -> (f64, f64) {
        let sw: f64 = w.iter().sum();
        let su: f64 = nodes.iter().zip(w).map(|((u, _), w)| u * w).sum();
        let sv: f64 = nodes.iter().zip(w).map(|((_, v), w)| v * w).sum();
        let suu: f64 = nodes.iter().zip(w).map(|((u, _), w)| u * u * w).sum();
        let suv: f64 = nodes.iter().zip(w).map(|((u, v), w)| u * v * w).sum();
        let det = sw * suu - su * su;
        if det.abs() < 1e-30 {
            return (0.0, sv / sw);
        }
        let slope = (sw * suv - su * sv) / det;
        let icept = (sv - slope * su) / sw;
        (slope, icept)
    };
    let l1_of = |slope: f64, icept: f64| -> f64 {
        let mut acc = 0.0;
        for &(u, v) in &nodes {
            acc += (v - (slope * u + icept)).abs();
        }
        acc * du / (t * t)
    };
    let mut w = vec![1.0; GAMMA_NODES];
    let (mut slope, mut icept) = fit(&w);
    let mut best = l1_of(slope, icept);
    let floor = 1e-12 * t;
    for _ in 0..reweight_iters {
        for (wi, &(u, v)) in w.iter_mut().zip(&nodes) {
            *wi = 1.0 / (v - (slope * u + icept)).abs().max(floor);
        }
        let (s2, i2) = fit(&w);
        slope = s2;
        icept = i2;
        best = best.min(l1_of(slope, icept));
    }
    Ok(best)
}

/// One extracted graph piece of the near-vertical pipeline, living on its
/// own ball.
pub struct GraphPiece {
    pub ball: Ball,
    pub graph: GraphFunction,
    pub covered_mass: f64,
}

/// Joined output of the near-vertical pipeline.
pub struct JoinedGraphs {
    pub pieces: Vec<GraphPiece>,
    /// Max of piece Lipschitz estimates and joining-segment slopes, both
    /// measured against the first piece's base line.
    pub joint_lipschitz: f64,
    pub covered_mass: f64,
}

/// Near-vertical case: cover the angle-stopped points with disjoint
/// doubling balls, rerun the pipeline per ball against each ball's own best
/// line, and join the extracted graphs by segments.
///
/// Doubling balls follow the (100,200) rule: the radius is `100^m h(x)`
/// for the smallest `m` with `mu(100 B) <= 200 mu(B)`.
pub fn join_near_vertical(
    mu: &DiscreteMeasure,
    region: &StoppingRegion,
    params: &ParamsLedger,
    j_min: i32,
    j_max: i32,
) -> Result<JoinedGraphs> {
    let f3 = region.class_indices(PointClass::F3);
    if f3.is_empty() {
        return Err(CoreError::Empty("no angle-stopped points to cover".into()));
    }
    // Doubling-ball per candidate.
    let mut balls: Vec<(u32, Ball)> = Vec::new();
    for &i in &f3 {
        let hx = region.h[i as usize];
        if hx <= 0.0 {
            continue;
        }
        let mut radius = hx;
        let mut found = None;
        for _ in 0..12 {
            let b = Ball {
                center: mu.point(i as usize),
                radius,
            };
            if mu.mass_in_ball(&b.dilate(100.0)) <= 200.0 * mu.mass_in_ball(&b) {
                found = Some(b);
                break;
            }
            radius *= 100.0;
        }
        if let Some(b) = found {
            balls.push((i, b));
        }
    }
    // Greedy disjoint family: 20B_i pairwise disjoint, largest balls first.
    balls.sort_by(|a, b| {
        b.1.radius
            .partial_cmp(&a.1.radius)
            .unwrap()
            .then(a.0.cmp(&b.0))
    });
    let mut chosen: Vec<Ball> = Vec::new();
    for (_, b) in &balls {
        let disjoint = chosen
            .iter()
            .all(|c| c.center.dist(&b.center) > 20.0 * (c.radius + b.radius));
        if disjoint {
            chosen.push(*b);
        }
    }

    let mut pieces = Vec::new();
    for ball in &chosen {
        let local = match mu.restrict_to_ball(&ball.dilate(params.k_dilate)) {
            Ok(m) => m,
            Err(_) => continue,
        };
        if local.len() < 8 {
            continue;
        }
        let Some((line, _)) = crate::beta::best_line(&local, ball, params.k_dilate)? else {
            continue;
        };
        if angle_to_vertical(&line) <= params.theta0 {
            continue;
        }
        // Scale range for the local run: from the ball scale down to the
        // same relative depth as the global run.
        let local_j_min = -ball.radius.log2().ceil() as i32;
        let local_j_max = local_j_min + (j_max - j_min);
        let Ok(local_region) =
            stopping_time_region(&local, &ball.center, &line, params, local_j_min, local_j_max)
        else {
            continue;
        };
        let z = local_region.class_indices(PointClass::Z);
        if z.is_empty() {
            continue;
        }
        let graph = build_graph_function(&local, &z, &line)?;
        let covered: f64 = z.iter().map(|&i| local.weight(i as usize)).sum();
        pieces.push(GraphPiece {
            ball: *ball,
            graph,
            covered_mass: covered,
        });
    }
    if pieces.is_empty() {
        return Err(CoreError::Empty(
            "no graph piece extracted from the doubling balls".into(),
        ));
    }
    // Joining-segment slopes against the first piece's frame.
    let frame = pieces[0].graph.base;
    let mut order: Vec<usize> = (0..pieces.len()).collect();
    order.sort_by(|&a, &b| {
        frame
            .abscissa(&pieces[a].ball.center)
            .partial_cmp(&frame.abscissa(&pieces[b].ball.center))
            .unwrap()
    });
    let mut joint = pieces.iter().map(|p| p.graph.lipschitz_estimate).fold(0.0, f64::max);
    for w in order.windows(2) {
        let a = pieces[w[0]].ball.center;
        let b = pieces[w[1]].ball.center;
        let du = (frame.abscissa(&b) - frame.abscissa(&a)).abs();
        let dv = (frame.ordinate(&b) - frame.ordinate(&a)).abs();
        if du > 0.0 {
            joint = joint.max(dv / du);
        }
    }
    let covered = pieces.iter().map(|p| p.covered_mass).sum();
    Ok(JoinedGraphs {
        pieces,
        joint_lipschitz: joint,
        covered_mass: covered,
    })
}
