//! Beta numbers and best-line fitting.
//!
//! `beta_1` and `beta_2` measure the scale-normalized L1/L2 distance from
//! the measure inside a dilated ball to a line. The exact `beta_2`
//! minimizer is the line through the weighted centroid along the principal
//! eigenvector of the weighted scatter matrix; it doubles as the (documented)
//! surrogate for the `beta_1` infimum, with an optional iteratively
//! reweighted L1 refinement.

use crate::error::{CoreError, Result};
use crate::geometry::{Ball, Line, Point2};
use crate::measures::DiscreteMeasure;
use crate::summation::NeumaierSum;

/// Which beta number to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaOrder {
    One,
    Two,
}

/// Beta number of a ball with respect to a fixed line.
///
/// Order one: `(1/t) * sum_{y in B(x,kt)} (dist(y,D)/t) w(y)`.
/// Order two: the square root of the same sum with the distance squared.
pub fn beta_wrt_line(
    mu: &DiscreteMeasure,
    ball: &Ball,
    line: &Line,
    k_dilate: f64,
    order: BetaOrder,
) -> Result<f64> {
    if !(k_dilate > 1.0) {
        return Err(CoreError::InvalidInput("k_dilate must be > 1".into()));
    }
    let t = ball.radius;
    let dilated = ball.dilate(k_dilate);
    let idx = mu.indices_in_ball(&dilated);
    let mut acc = NeumaierSum::new();
    match order {
        BetaOrder::One => {
            for i in idx {
                let d = line.dist(&mu.point(i as usize));
                acc.add(d * mu.weight(i as usize));
            }
            Ok(acc.value() / (t * t))
        }
        BetaOrder::Two => {
            for i in idx {
                let d = line.dist(&mu.point(i as usize));
                acc.add(d * d * mu.weight(i as usize));
            }
            Ok((acc.value() / (t * t * t)).max(0.0).sqrt())
        }
    }
}

/// Weighted centroid and scatter of a point subset.
fn centroid_and_scatter(mu: &DiscreteMeasure, idx: &[u32]) -> (Point2, [f64; 3], f64) {
    let mut wsum = NeumaierSum::new();
    let mut xsum = NeumaierSum::new();
    let mut ysum = NeumaierSum::new();
    for &i in idx {
        let w = mu.weight(i as usize);
        let p = mu.point(i as usize);
        wsum.add(w);
        xsum.add(w * p.x);
        ysum.add(w * p.y);
    }
    let w = wsum.value();
    let c = Point2::new(xsum.value() / w, ysum.value() / w);
    let (mut sxx, mut sxy, mut syy) = (NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new());
    for &i in idx {
        let wi = mu.weight(i as usize);
        let p = mu.point(i as usize);
        let dx = p.x - c.x;
        let dy = p.y - c.y;
        sxx.add(wi * dx * dx);
        sxy.add(wi * dx * dy);
        syy.add(wi * dy * dy);
    }
    (c, [sxx.value(), sxy.value(), syy.value()], w)
}

/// Principal direction of a 2x2 scatter matrix, as an angle in [0, pi).
/// Isotropic scatter ties break to the smaller direction angle (zero).
fn principal_angle(s: &[f64; 3]) -> f64 {
    let [sxx, sxy, syy] = *s;
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    if theta < 0.0 {
        theta + std::f64::consts::PI
    } else {
        theta
    }
}

/// The exact `beta_2` minimizer over the dilated ball, with the attained
/// `beta_2` value. `None` when the dilated ball contains no support point.
pub fn best_line(
    mu: &DiscreteMeasure,
    ball: &Ball,
    k_dilate: f64,
) -> Result<Option<(Line, f64)>> {
    if !(k_dilate > 1.0) {
        return Err(CoreError::InvalidInput("k_dilate must be > 1".into()));
    }
    let idx = mu.indices_in_ball(&ball.dilate(k_dilate));
    Ok(best_line_of_indices(mu, &idx, ball.radius))
}

/// Same as [`best_line`] but over an explicit index subset; `scale` is the
/// normalizing scale `t` in the beta formula.
pub fn best_line_of_indices(
    mu: &DiscreteMeasure,
    idx: &[u32],
    scale: f64,
) -> Option<(Line, f64)> {
    if idx.is_empty() {
        return None;
    }
    let (c, s, _) = centroid_and_scatter(mu, idx);
    let theta = principal_angle(&s);
    let line = Line::new(c, theta);
    let [sxx, sxy, syy] = s;
    let half_tr = 0.5 * (sxx + syy);
    let det_part = (0.5 * (sxx - syy)).hypot(sxy);
    let lambda_min = (half_tr - det_part).max(0.0);
    let beta2 = (lambda_min / (scale * scale * scale)).sqrt();
    Some((line, beta2))
}

/// `beta_1` of the ball against the `beta_2`-optimal line (the documented
/// surrogate for the `beta_1` infimum). Returns (line, value).
pub fn beta1_surrogate(
    mu: &DiscreteMeasure,
    ball: &Ball,
    k_dilate: f64,
) -> Result<Option<(Line, f64)>> {
    match best_line(mu, ball, k_dilate)? {
        None => Ok(None),
        Some((line, _)) => {
            let b1 = beta_wrt_line(mu, ball, &line, k_dilate, BetaOrder::One)?;
            Ok(Some((line, b1)))
        }
    }
}

/// Iteratively reweighted L1 line fit: refines the `beta_2` line toward the
/// `beta_1` minimizer. Returns the best line found and its `beta_1` value.
pub fn best_line_l1(
    mu: &DiscreteMeasure,
    ball: &Ball,
    k_dilate: f64,
    iterations: usize,
) -> Result<Option<(Line, f64)>> {
    let idx = mu.indices_in_ball(&ball.dilate(k_dilate));
    if idx.is_empty() {
        return Ok(None);
    }
    let (mut line, _) = best_line_of_indices(mu, &idx, ball.radius).unwrap();
    let eval = |l: &Line| -> Result<f64> {
        beta_wrt_line(mu, ball, l, k_dilate, BetaOrder::One)
    };
    let mut best = (line, eval(&line)?);
    let floor = 1e-9 * ball.radius;
    for _ in 0..iterations {
        // Reweighted scatter: weight w / max(dist, floor).
        let mut wsum = 0.0;
        let mut xs = 0.0;
        let mut ys = 0.0;
        for &i in &idx {
            let p = mu.point(i as usize);
            let om = mu.weight(i as usize) / line.dist(&p).max(floor);
            wsum += om;
            xs += om * p.x;
            ys += om * p.y;
        }
        let c = Point2::new(xs / wsum, ys / wsum);
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for &i in &idx {
            let p = mu.point(i as usize);
            let om = mu.weight(i as usize) / line.dist(&p).max(floor);
            let dx = p.x - c.x;
            let dy = p.y - c.y;
            sxx += om * dx * dx;
            sxy += om * dx * dy;
            syy += om * dy * dy;
        }
        line = Line::new(c, principal_angle(&[sxx, sxy, syy]));
        let value = eval(&line)?;
        if value < best.1 {
            best = (line, value);
        }
    }
    Ok(Some(best))
}
