//! Synthetic measure generators: segments, Lipschitz graphs, circle arcs,
//! four-corner Cantor iterates and arclength-sampled polylines.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geometry::Point2;
use crate::measures::DiscreteMeasure;

/// How point weights are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// Weight proportional to the arclength represented by the sample.
    ArclengthProportional,
    /// Uniform mass per fractal-iterate cell (Cantor generations keep exact
    /// per-cell mass across depths).
    IterateUniform,
}

/// Shape family of a generated measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "params", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Uniform measure on a straight segment.
    Segment { a: Point2, b: Point2 },
    /// Graph of `u -> base*u + amplitude*sin(2*pi*frequency*u + phase)` over
    /// a horizontal domain interval, with `base` chosen so the total slope
    /// never exceeds `slope`; the phase is seed-derived.
    LipschitzGraph {
        u0: f64,
        u1: f64,
        slope: f64,
        frequency: f64,
        amplitude: f64,
    },
    /// Uniform measure on a circular arc.
    CircleArc {
        center: Point2,
        radius: f64,
        theta0: f64,
        span: f64,
    },
    /// Depth-`depth` iterate of the four-corner Cantor construction on the
    /// unit square, each of the `4^depth` squares carrying equal mass.
    CantorFourCorner { depth: u32 },
    /// Arclength-uniform samples along a polyline.
    AdRegularCurve { vertices: Vec<Point2> },
}

/// Full generator specification; `generate` is deterministic in all fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    pub n_points: usize,
    pub seed: u64,
    #[serde(default)]
    pub weight_rule: Option<WeightRule>,
    #[serde(default = "default_total_mass")]
    pub total_mass: f64,
}

fn default_total_mass() -> f64 {
    1.0
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_points == 0 {
            return Err(CoreError::InvalidSpec("n_points must be >= 1".into()));
        }
        if !(self.total_mass > 0.0) || !self.total_mass.is_finite() {
            return Err(CoreError::InvalidSpec("total_mass must be > 0".into()));
        }
        // Cantor iterates carry per-cell mass; the other families are
        // arclength-sampled. A mismatched override is rejected rather than
        // silently reinterpreted.
        if let Some(rule) = self.weight_rule {
            let is_cantor = matches!(self.kind, GeneratorKind::CantorFourCorner { .. });
            let ok = match rule {
                WeightRule::IterateUniform => is_cantor,
                WeightRule::ArclengthProportional => !is_cantor,
            };
            if !ok {
                return Err(CoreError::InvalidSpec(format!(
                    "weight rule {rule:?} does not apply to this variant"
                )));
            }
        }
        match &self.kind {
            GeneratorKind::Segment { a, b } => {
                if !a.is_finite() || !b.is_finite() || a == b {
                    return Err(CoreError::InvalidSpec(
                        "segment needs two distinct finite endpoints".into(),
                    ));
                }
            }
            GeneratorKind::LipschitzGraph {
                u0,
                u1,
                slope,
                frequency,
                amplitude,
            } => {
                if !(u1 > u0) {
                    return Err(CoreError::InvalidSpec("empty graph domain".into()));
                }
                if !(*slope >= 0.0) {
                    return Err(CoreError::InvalidSpec("slope bound must be >= 0".into()));
                }
                if *amplitude < 0.0 || *frequency < 0.0 {
                    return Err(CoreError::InvalidSpec(
                        "amplitude and frequency must be >= 0".into(),
                    ));
                }
                let ripple = amplitude * 2.0 * std::f64::consts::PI * frequency;
                if ripple > *slope {
                    return Err(CoreError::InvalidSpec(format!(
                        "ripple slope {ripple:.4} exceeds the Lipschitz bound {slope}"
                    )));
                }
            }
            GeneratorKind::CircleArc { radius, span, .. } => {
                if !(*radius > 0.0) || !(*span > 0.0) {
                    return Err(CoreError::InvalidSpec(
                        "arc needs radius > 0 and span > 0".into(),
                    ));
                }
            }
            GeneratorKind::CantorFourCorner { depth } => {
                if *depth > 12 {
                    return Err(CoreError::InvalidSpec(
                        "cantor depth > 12 rejected (memory guard)".into(),
                    ));
                }
                if self.n_points < 4usize.pow(*depth) {
                    return Err(CoreError::InvalidSpec(format!(
                        "cantor depth {depth} needs at least 4^{depth} = {} points",
                        4usize.pow(*depth)
                    )));
                }
            }
            GeneratorKind::AdRegularCurve { vertices } => {
                if vertices.len() < 2 {
                    return Err(CoreError::InvalidSpec(
                        "polyline needs at least two vertices".into(),
                    ));
                }
                if vertices.windows(2).any(|w| w[0] == w[1]) {
                    return Err(CoreError::InvalidSpec(
                        "polyline has zero-length edges".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Generate the measure. Identical specs produce byte-identical output.
    pub fn generate(&self) -> Result<DiscreteMeasure> {
        self.validate()?;
        let (points, weights) = match &self.kind {
            GeneratorKind::Segment { a, b } => {
                let verts = vec![*a, *b];
                sample_polyline(&verts, self.n_points, self.total_mass)
            }
            GeneratorKind::LipschitzGraph {
                u0,
                u1,
                slope,
                frequency,
                amplitude,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let phase: f64 = rng.gen_range(0.0..(2.0 * std::f64::consts::PI));
                let omega = 2.0 * std::f64::consts::PI * frequency;
                let base = slope - amplitude * omega;
                let f = |u: f64| base * u + amplitude * (omega * u + phase).sin();
                let n = self.n_points;
                let mut pts = Vec::with_capacity(n);
                for i in 0..n {
                    let u = u0 + (u1 - u0) * (i as f64 + 0.5) / n as f64;
                    pts.push(Point2::new(u, f(u)));
                }
                let weights = arclength_weights(&pts, self.total_mass);
                (pts, weights)
            }
            GeneratorKind::CircleArc {
                center,
                radius,
                theta0,
                span,
            } => {
                let n = self.n_points;
                let mut pts = Vec::with_capacity(n);
                for i in 0..n {
                    let th = theta0 + span * (i as f64 + 0.5) / n as f64;
                    pts.push(Point2::new(
                        center.x + radius * th.cos(),
                        center.y + radius * th.sin(),
                    ));
                }
                let w = self.total_mass / n as f64;
                (pts, vec![w; n])
            }
            GeneratorKind::CantorFourCorner { depth } => cantor_four_corner(
                *depth,
                self.n_points,
                self.total_mass,
            )?,
            GeneratorKind::AdRegularCurve { vertices } => {
                sample_polyline(vertices, self.n_points, self.total_mass)
            }
        };
        DiscreteMeasure::build(points, weights)
    }
}

fn arclength_weights(pts: &[Point2], total: f64) -> Vec<f64> {
    if pts.len() == 1 {
        return vec![total];
    }
    // Each sample represents half of each adjacent gap.
    let n = pts.len();
    let mut w = vec![0.0f64; n];
    for i in 0..(n - 1) {
        let seg = pts[i].dist(&pts[i + 1]);
        w[i] += 0.5 * seg;
        w[i + 1] += 0.5 * seg;
    }
    // Endpoints also carry their outward half-gap so the mass is balanced.
    w[0] += 0.5 * pts[0].dist(&pts[1]);
    w[n - 1] += 0.5 * pts[n - 1].dist(&pts[n - 2]);
    let sum: f64 = w.iter().sum();
    let scale = total / sum;
    for wi in &mut w {
        *wi *= scale;
    }
    w
}

/// Midpoint samples along a polyline, arclength-proportional placement and
/// equal weights (each sample represents an equal arclength slab).
fn sample_polyline(vertices: &[Point2], n: usize, total: f64) -> (Vec<Point2>, Vec<f64>) {
    let mut cum = vec![0.0f64];
    for w in vertices.windows(2) {
        cum.push(cum.last().unwrap() + w[0].dist(&w[1]));
    }
    let length = *cum.last().unwrap();
    let mut pts = Vec::with_capacity(n);
    let mut seg = 0usize;
    for i in 0..n {
        let target = length * (i as f64 + 0.5) / n as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < target {
            seg += 1;
        }
        let t = (target - cum[seg]) / (cum[seg + 1] - cum[seg]);
        let a = vertices[seg];
        let b = vertices[seg + 1];
        pts.push(Point2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
    }
    let w = total / n as f64;
    (pts, vec![w; n])
}

/// Points for the depth-`d` four-corner Cantor iterate. Each of the `4^d`
/// squares receives an equal share of the mass; `n = 4^d` yields exactly
/// the square centers, and with more points each square's share sits on its
/// horizontal midline, so the iterate carries Cantor structure above the
/// cell scale and is rectifiable below it.
fn cantor_four_corner(depth: u32, n: usize, total: f64) -> Result<(Vec<Point2>, Vec<f64>)> {
    let squares = 4usize.pow(depth);
    // Corner offsets of the four sub-squares, in reading order.
    const CORNERS: [(f64, f64); 4] = [(0.0, 0.0), (0.75, 0.0), (0.0, 0.75), (0.75, 0.75)];
    let mut origins = vec![Point2::new(0.0, 0.0)];
    let mut side = 1.0f64;
    for _ in 0..depth {
        let quarter = side * 0.25;
        let mut next = Vec::with_capacity(origins.len() * 4);
        for o in &origins {
            for (cx, cy) in CORNERS {
                next.push(Point2::new(o.x + cx * side, o.y + cy * side));
            }
        }
        origins = next;
        side = quarter;
    }

    // Distribute n points over the squares by largest remainder.
    let base = n / squares;
    let rem = n % squares;
    let mass_per_square = total / squares as f64;
    let mut pts = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (s, o) in origins.iter().enumerate() {
        let count = base + usize::from(s < rem);
        if count == 0 {
            continue;
        }
        let w = mass_per_square / count as f64;
        if count == 1 {
            pts.push(Point2::new(o.x + 0.5 * side, o.y + 0.5 * side));
            weights.push(w);
            continue;
        }
        for i in 0..count {
            pts.push(Point2::new(
                o.x + side * (i as f64 + 0.5) / count as f64,
                o.y + 0.5 * side,
            ));
            weights.push(w);
        }
    }
    if pts.is_empty() {
        return Err(CoreError::InvalidSpec(
            "cantor iterate received fewer points than squares".into(),
        ));
    }
    Ok((pts, weights))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: GeneratorKind, n: usize, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            kind,
            n_points: n,
            seed,
            weight_rule: None,
            total_mass: 1.0,
        }
    }

    #[test]
    fn segment_points_are_collinear() {
        let m = spec(
            GeneratorKind::Segment {
                a: Point2::new(0.0, 0.0),
                b: Point2::new(1.0, 0.0),
            },
            100,
            0,
        )
        .generate()
        .unwrap();
        assert_eq!(m.len(), 100);
        assert!(m.points().iter().all(|p| p.y == 0.0));
    }

    #[test]
    fn cantor_depth_zero_is_single_atom() {
        let m = spec(GeneratorKind::CantorFourCorner { depth: 0 }, 1, 0)
            .generate()
            .unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.total_mass(), 1.0);
    }

    #[test]
    fn cantor_mass_independent_of_depth() {
        for depth in 1..=6u32 {
            let m = spec(GeneratorKind::CantorFourCorner { depth }, 4096, 0)
                .generate()
                .unwrap();
            assert_eq!(m.len(), 4096);
            assert!((m.total_mass() - 1.0).abs() < 1e-12, "depth {depth}");
        }
    }

    #[test]
    fn cantor_centers_when_n_matches_squares() {
        let m = spec(GeneratorKind::CantorFourCorner { depth: 1 }, 4, 0)
            .generate()
            .unwrap();
        let mut xs: Vec<(f64, f64)> = m.points().iter().map(|p| (p.x, p.y)).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            xs,
            vec![(0.125, 0.125), (0.125, 0.875), (0.875, 0.125), (0.875, 0.875)]
        );
    }

    #[test]
    fn cantor_depth_guard() {
        assert!(spec(GeneratorKind::CantorFourCorner { depth: 13 }, 10, 0)
            .generate()
            .is_err());
    }

    #[test]
    fn lipschitz_graph_satisfies_bound() {
        let m = spec(
            GeneratorKind::LipschitzGraph {
                u0: 0.0,
                u1: 1.0,
                slope: 0.5,
                frequency: 2.0,
                amplitude: 0.02,
            },
            400,
            3,
        )
        .generate()
        .unwrap();
        let pts = m.points();
        for w in pts.windows(2) {
            let du = (w[1].x - w[0].x).abs();
            let dv = (w[1].y - w[0].y).abs();
            assert!(dv <= 0.5 * du * (1.0 + 1e-9));
        }
    }

    #[test]
    fn lipschitz_ripple_guard() {
        assert!(spec(
            GeneratorKind::LipschitzGraph {
                u0: 0.0,
                u1: 1.0,
                slope: 0.1,
                frequency: 10.0,
                amplitude: 0.1,
            },
            10,
            0,
        )
        .generate()
        .is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let s = spec(
            GeneratorKind::LipschitzGraph {
                u0: -1.0,
                u1: 2.0,
                slope: 0.3,
                frequency: 1.5,
                amplitude: 0.01,
            },
            256,
            77,
        );
        let a = s.generate().unwrap();
        let b = s.generate().unwrap();
        let bits = |m: &DiscreteMeasure| -> Vec<(u64, u64, u64)> {
            m.points()
                .iter()
                .zip(m.weights())
                .map(|(p, w)| (p.x.to_bits(), p.y.to_bits(), w.to_bits()))
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn arc_lies_on_circle() {
        let m = spec(
            GeneratorKind::CircleArc {
                center: Point2::new(1.0, -1.0),
                radius: 2.0,
                theta0: 0.3,
                span: 1.2,
            },
            64,
            0,
        )
        .generate()
        .unwrap();
        for p in m.points() {
            let r = p.dist(&Point2::new(1.0, -1.0));
            assert!((r - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let s = spec(GeneratorKind::CantorFourCorner { depth: 3 }, 64, 5);
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"variant\":\"cantor_four_corner\""));
        assert!(text.contains("\"params\""));
        let back: GeneratorSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
