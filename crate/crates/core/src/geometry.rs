//! Planar primitives: points, triples, lines and balls.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// A point of the plane, also used for displacement vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn sub(&self, other: &Point2) -> Point2 {
        Point2::new(self.x - other.x, self.y - other.y)
    }

    pub fn add(&self, other: &Point2) -> Point2 {
        Point2::new(self.x + other.x, self.y + other.y)
    }

    pub fn scale(&self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }

    pub fn dot(&self, other: &Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product of the two vectors.
    pub fn cross(&self, other: &Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        self.sub(other).norm()
    }

    pub fn dist_sq(&self, other: &Point2) -> f64 {
        self.sub(other).norm_sq()
    }
}

/// An ordered triple of planar points.
///
/// Pairwise distinctness is a precondition of the kernel-product operations,
/// not of construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub z1: Point2,
    pub z2: Point2,
    pub z3: Point2,
}

impl Triple {
    pub fn new(z1: Point2, z2: Point2, z3: Point2) -> Self {
        Triple { z1, z2, z3 }
    }

    /// Side lengths (|z1-z2|, |z1-z3|, |z2-z3|).
    pub fn side_lengths(&self) -> [f64; 3] {
        [
            self.z1.dist(&self.z2),
            self.z1.dist(&self.z3),
            self.z2.dist(&self.z3),
        ]
    }

    /// Twice the signed triangle area.
    pub fn cross(&self) -> f64 {
        self.z2.sub(&self.z1).cross(&self.z3.sub(&self.z1))
    }

    pub fn area(&self) -> f64 {
        0.5 * self.cross().abs()
    }

    /// 2*area / (longest side)^2, a scale-free degeneracy gauge.
    pub fn normalized_area(&self) -> f64 {
        let sides = self.side_lengths();
        let longest = sides.iter().cloned().fold(0.0f64, f64::max);
        if longest == 0.0 {
            return 0.0;
        }
        self.cross().abs() / (longest * longest)
    }

    /// Numerically collinear per the shared tolerance: normalized area below 1e-12.
    pub fn is_collinear(&self) -> bool {
        self.normalized_area() < 1e-12
    }

    pub fn translate(&self, v: &Point2) -> Triple {
        Triple::new(self.z1.add(v), self.z2.add(v), self.z3.add(v))
    }

    pub fn dilate(&self, lambda: f64) -> Triple {
        Triple::new(
            self.z1.scale(lambda),
            self.z2.scale(lambda),
            self.z3.scale(lambda),
        )
    }
}

/// An (undirected) line: an anchor point plus a direction angle in [0, pi),
/// measured from the positive horizontal axis.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Line {
    pub anchor: Point2,
    pub theta: f64,
}

impl Line {
    pub fn new(anchor: Point2, theta: f64) -> Self {
        Line {
            anchor,
            theta: normalize_direction(theta),
        }
    }

    /// Line through two distinct points.
    pub fn through(a: &Point2, b: &Point2) -> Result<Line> {
        let d = b.sub(a);
        if d.norm_sq() == 0.0 {
            return Err(CoreError::Domain(
                "cannot form a line through coincident points".into(),
            ));
        }
        Ok(Line::new(*a, d.y.atan2(d.x)))
    }

    pub fn direction(&self) -> Point2 {
        Point2::new(self.theta.cos(), self.theta.sin())
    }

    pub fn normal(&self) -> Point2 {
        Point2::new(-self.theta.sin(), self.theta.cos())
    }

    /// Orthogonal distance from a point to the line.
    pub fn dist(&self, p: &Point2) -> f64 {
        self.normal().dot(&p.sub(&self.anchor)).abs()
    }

    /// Signed abscissa of `p` along the line direction (the projection pi).
    pub fn abscissa(&self, p: &Point2) -> f64 {
        self.direction().dot(&p.sub(&self.anchor))
    }

    /// Signed ordinate of `p` along the line normal (the projection pi-perp).
    pub fn ordinate(&self, p: &Point2) -> f64 {
        self.normal().dot(&p.sub(&self.anchor))
    }

    /// Point at given abscissa on the line.
    pub fn point_at(&self, u: f64) -> Point2 {
        self.anchor.add(&self.direction().scale(u))
    }
}

fn normalize_direction(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(std::f64::consts::PI);
    // rem_euclid can return PI itself through rounding.
    if t >= std::f64::consts::PI {
        t -= std::f64::consts::PI;
    }
    t
}

/// Smallest angle between a line and the vertical direction, in [0, pi/2].
pub fn angle_to_vertical(line: &Line) -> f64 {
    (line.theta - std::f64::consts::FRAC_PI_2).abs()
}

/// Smallest angle between two lines, in [0, pi/2].
pub fn angle_between(a: &Line, b: &Line) -> f64 {
    let d = (a.theta - b.theta).abs();
    d.min(std::f64::consts::PI - d)
}

/// A closed ball.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point2,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point2, radius: f64) -> Result<Ball> {
        if !(radius > 0.0) || !radius.is_finite() || !center.is_finite() {
            return Err(CoreError::InvalidInput(
                "ball requires a finite center and radius > 0".into(),
            ));
        }
        Ok(Ball { center, radius })
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.dist_sq(&self.center) <= self.radius * self.radius
    }

    /// The concentric k-dilate kB.
    pub fn dilate(&self, k: f64) -> Ball {
        Ball {
            center: self.center,
            radius: self.radius * k,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

    #[test]
    fn vertical_line_has_zero_vertical_angle() {
        let v = Line::new(Point2::ORIGIN, FRAC_PI_2);
        assert_eq!(angle_to_vertical(&v), 0.0);
    }

    #[test]
    fn horizontal_line_vertical_angle_is_half_pi() {
        let h = Line::new(Point2::ORIGIN, 0.0);
        assert_relative_eq!(angle_to_vertical(&h), FRAC_PI_2);
    }

    #[test]
    fn diagonal_line_vertical_angle() {
        let l = Line::new(Point2::ORIGIN, FRAC_PI_4);
        assert_relative_eq!(angle_to_vertical(&l), FRAC_PI_4);
    }

    #[test]
    fn angle_between_basic_cases() {
        let a = Line::new(Point2::ORIGIN, 0.3);
        assert_eq!(angle_between(&a, &a), 0.0);
        let b = Line::new(Point2::ORIGIN, 0.3 + FRAC_PI_2);
        assert_relative_eq!(angle_between(&a, &b), FRAC_PI_2);
        let c = Line::new(Point2::ORIGIN, 0.0);
        let d = Line::new(Point2::ORIGIN, FRAC_PI_3);
        assert_relative_eq!(angle_between(&c, &d), FRAC_PI_3);
        // Symmetry across the direction wrap.
        let e = Line::new(Point2::ORIGIN, PI - 0.01);
        let f = Line::new(Point2::ORIGIN, 0.01);
        assert_relative_eq!(angle_between(&e, &f), 0.02, epsilon = 1e-12);
    }

    #[test]
    fn line_projections_are_consistent() {
        let l = Line::new(Point2::new(1.0, 2.0), 0.7);
        let p = Point2::new(-0.3, 4.1);
        let u = l.abscissa(&p);
        let v = l.ordinate(&p);
        let back = l.point_at(u).add(&l.normal().scale(v));
        assert_relative_eq!(back.x, p.x, epsilon = 1e-12);
        assert_relative_eq!(back.y, p.y, epsilon = 1e-12);
        assert_relative_eq!(l.dist(&p), v.abs());
    }

    #[test]
    fn closed_ball_boundary() {
        let b = Ball::new(Point2::ORIGIN, 1.0).unwrap();
        assert!(b.contains(&Point2::new(1.0, 0.0)));
        assert!(!b.contains(&Point2::new(1.0 + 1e-12, 0.0)));
    }

    #[test]
    fn normalized_area_flags_collinear() {
        let t = Triple::new(
            Point2::new(0.0, 0.0),
            Point2::new(0.5, 0.5),
            Point2::new(2.0, 2.0),
        );
        assert!(t.is_collinear());
        let s = Triple::new(
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        );
        assert!(!s.is_collinear());
        assert_relative_eq!(s.normalized_area(), 0.5);
    }
}
