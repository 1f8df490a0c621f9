//! Kernel evaluation, permutation sums, Menger curvature and the
//! comparability predicates.
//!
//! The kernel family is `K_n(z) = x^(2n-1)/|z|^(2n)` for `n >= 1`, plus the
//! Huovinen contrast kernel `x*y^2/|z|^4`. Both are odd and
//! (-1)-homogeneous. The permutation sum of a kernel over a triple is
//!
//! ```text
//! p(z1,z2,z3) = K(z1-z2)K(z1-z3) + K(z2-z1)K(z2-z3) + K(z3-z1)K(z3-z2)
//! ```
//!
//! which for the coordinate-power family is nonnegative and vanishes exactly
//! on collinear triples; the Huovinen kernel takes negative permutation
//! values on some triples, which is the boundary this library exhibits.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geometry::{Line, Point2, Triple};

/// Minimal displacement magnitude below which kernel evaluation is refused.
pub const MIN_KERNEL_DIST: f64 = 1e-300;

/// Identifies one member of the supported kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelId {
    /// `x^(2n-1)/|z|^(2n)`, `n >= 1`; `n = 1` is the real part of the Cauchy kernel.
    CoordinatePower { n: u32 },
    /// `x*y^2/|z|^4`.
    Huovinen,
}

impl KernelId {
    pub fn coordinate_power(n: u32) -> Result<KernelId> {
        if n == 0 {
            return Err(CoreError::InvalidInput(
                "coordinate-power kernel requires n >= 1".into(),
            ));
        }
        Ok(KernelId::CoordinatePower { n })
    }
}

fn check_displacement(z: &Point2) -> Result<f64> {
    let r2 = z.norm_sq();
    if !r2.is_finite() {
        return Err(CoreError::Domain("non-finite displacement".into()));
    }
    if r2.sqrt() < MIN_KERNEL_DIST {
        return Err(CoreError::Domain(
            "kernel evaluated at a (near-)zero displacement".into(),
        ));
    }
    Ok(r2)
}

/// Evaluate the kernel at a nonzero displacement.
pub fn kernel_eval(kernel: KernelId, z: &Point2) -> Result<f64> {
    let r2 = check_displacement(z)?;
    Ok(kernel_eval_unchecked(kernel, z.x, z.y, r2))
}

#[inline]
pub(crate) fn kernel_eval_unchecked(kernel: KernelId, x: f64, y: f64, r2: f64) -> f64 {
    match kernel {
        KernelId::CoordinatePower { n } => {
            let n = n as i32;
            x.powi(2 * n - 1) / r2.powi(n)
        }
        KernelId::Huovinen => x * y * y / (r2 * r2),
    }
}

/// Permutation sum of the kernel over a pairwise-distinct triple.
///
/// Oddness of the kernel collapses the six kernel factors to three:
/// with `Ka = K(z1-z2)`, `Kb = K(z1-z3)`, `Kc = K(z2-z3)` the sum is
/// `Ka*Kb - Ka*Kc + Kb*Kc`.
pub fn permutation_direct(kernel: KernelId, t: &Triple) -> Result<f64> {
    let (p, _) = permutation_direct_with_scale(kernel, t)?;
    Ok(p)
}

/// Permutation sum together with the magnitude of its largest term, the
/// natural scale against which rounding of the sum should be judged.
pub fn permutation_direct_with_scale(kernel: KernelId, t: &Triple) -> Result<(f64, f64)> {
    let a = t.z1.sub(&t.z2);
    let b = t.z1.sub(&t.z3);
    let c = t.z2.sub(&t.z3);
    let ra = check_displacement(&a)?;
    let rb = check_displacement(&b)?;
    let rc = check_displacement(&c)?;
    let ka = kernel_eval_unchecked(kernel, a.x, a.y, ra);
    let kb = kernel_eval_unchecked(kernel, b.x, b.y, rb);
    let kc = kernel_eval_unchecked(kernel, c.x, c.y, rc);
    let t1 = ka * kb;
    let t2 = -ka * kc;
    let t3 = kb * kc;
    let scale = t1.abs().max(t2.abs()).max(t3.abs());
    Ok((t1 + t2 + t3, scale))
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// The nonnegative building block of the factored permutation sum:
/// `F_k(z,w) = x^(2k-1) a^(2k-1) (y-b)^(2k) + x^(2k-1) (x-a)^(2k-1) b^(2k)
/// - a^(2k-1) (x-a)^(2k-1) y^(2k)`.
fn f_term(k: i32, x: f64, y: f64, a: f64, b: f64) -> f64 {
    let xa = x - a;
    let yb = y - b;
    x.powi(2 * k - 1) * a.powi(2 * k - 1) * yb.powi(2 * k)
        + x.powi(2 * k - 1) * xa.powi(2 * k - 1) * b.powi(2 * k)
        - a.powi(2 * k - 1) * xa.powi(2 * k - 1) * y.powi(2 * k)
}

/// Permutation sum `p(0, z, w)` of the coordinate-power kernel, computed
/// through the factored numerator
/// `A(z,w) = sum_k C(n,k) (x a (x-a))^(2(n-k)) F_k(z,w)` divided by
/// `|z|^(2n) |w|^(2n) |z-w|^(2n)`.
pub fn permutation_factored(n: u32, z: &Point2, w: &Point2) -> Result<f64> {
    if n == 0 {
        return Err(CoreError::InvalidInput("n must be >= 1".into()));
    }
    let rz = check_displacement(z)?;
    let rw = check_displacement(w)?;
    let zw = z.sub(w);
    let rzw = check_displacement(&zw)?;
    let (x, y, a, b) = (z.x, z.y, w.x, w.y);
    let mut num = 0.0f64;
    for k in 1..=n {
        let outer = (x * a * (x - a)).powi(2 * (n - k) as i32);
        num += binomial(n, k) * outer * f_term(k as i32, x, y, a, b);
    }
    let ni = n as i32;
    Ok(num / (rz.powi(ni) * rw.powi(ni) * rzw.powi(ni)))
}

/// `f_t^k(s) = t^(2k-1)(s-1)^(2k) + (t-1)^(2k-1) t^(2k-1) - (t-1)^(2k-1) s^(2k)`.
///
/// Nonnegative for all real `s`, `t`; zero exactly on `s = t`.
pub fn f_poly(k: u32, t: f64, s: f64) -> f64 {
    let k = k.max(1) as i32;
    t.powi(2 * k - 1) * (s - 1.0).powi(2 * k) + (t - 1.0).powi(2 * k - 1) * t.powi(2 * k - 1)
        - (t - 1.0).powi(2 * k - 1) * s.powi(2 * k)
}

/// Menger curvature: reciprocal circumradius, `4*area / (product of sides)`.
pub fn menger_curvature(t: &Triple) -> Result<f64> {
    let a = t.z1.dist(&t.z2);
    let b = t.z1.dist(&t.z3);
    let c = t.z2.dist(&t.z3);
    if a < MIN_KERNEL_DIST || b < MIN_KERNEL_DIST || c < MIN_KERNEL_DIST {
        return Err(CoreError::Domain(
            "curvature of a triple with coincident points".into(),
        ));
    }
    Ok(4.0 * t.area() / (a * b * c))
}

/// The six-permutation Cauchy-kernel sum
/// `sum_{s in S3} 1 / ((z_{s2}-z_{s1}) * conj(z_{s3}-z_{s1}))`, expanded in
/// real arithmetic. Returns (real part, imaginary residue); the real part
/// equals the squared Menger curvature and the residue is rounding noise.
pub fn cauchy_permutation_parts(t: &Triple) -> Result<(f64, f64)> {
    let pts = [t.z1, t.z2, t.z3];
    for i in 0..3 {
        for j in (i + 1)..3 {
            if pts[i].dist(&pts[j]) < MIN_KERNEL_DIST {
                return Err(CoreError::Domain(
                    "cauchy permutation sum of coincident points".into(),
                ));
            }
        }
    }
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut re = 0.0f64;
    let mut im = 0.0f64;
    for perm in PERMS {
        let a = pts[perm[1]].sub(&pts[perm[0]]);
        let b = pts[perm[2]].sub(&pts[perm[0]]);
        // a * conj(b)
        let wr = a.x * b.x + a.y * b.y;
        let wi = a.y * b.x - a.x * b.y;
        let m2 = wr * wr + wi * wi;
        re += wr / m2;
        im += -wi / m2;
    }
    Ok((re, im))
}

/// Real part of the six-permutation Cauchy sum; equals `menger_curvature^2`.
pub fn cauchy_permutation_sum(t: &Triple) -> Result<f64> {
    cauchy_permutation_parts(t).map(|(re, _)| re)
}

/// Whether all three side lengths are within a factor `tau` of each other
/// (membership in the comparable-triple family O_tau).
pub fn in_comparable_family(tau: f64, t: &Triple) -> Result<bool> {
    if !(tau >= 1.0) {
        return Err(CoreError::InvalidInput("tau must be >= 1".into()));
    }
    let sides = t.side_lengths();
    let min = sides.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = sides.iter().cloned().fold(0.0f64, f64::max);
    if min < MIN_KERNEL_DIST {
        return Err(CoreError::Domain(
            "comparability of a triple with coincident points".into(),
        ));
    }
    Ok(max <= tau * min)
}

/// Ratio `p_n(triple) / c(triple)^2`; positive and finite on non-collinear
/// triples of the coordinate-power kernels. Ill-conditioned near collinear
/// configurations; callers doing sampling studies should exclude
/// `normalized_area < 1e-6`.
pub fn comparability_ratio(n: u32, t: &Triple) -> Result<f64> {
    if t.is_collinear() {
        return Err(CoreError::Domain(
            "comparability ratio of a (numerically) collinear triple".into(),
        ));
    }
    let c = menger_curvature(t)?;
    let p = permutation_direct(KernelId::coordinate_power(n)?, t)?;
    Ok(p / (c * c))
}

/// Sum of the vertical angles of the three connecting lines of a triple.
pub fn vertical_angle_sum(t: &Triple) -> Result<f64> {
    let l12 = Line::through(&t.z1, &t.z2)?;
    let l13 = Line::through(&t.z1, &t.z3)?;
    let l23 = Line::through(&t.z2, &t.z3)?;
    Ok(crate::geometry::angle_to_vertical(&l12)
        + crate::geometry::angle_to_vertical(&l13)
        + crate::geometry::angle_to_vertical(&l23))
}

/// Random search for a triple on which the Huovinen permutation sum is
/// strictly negative, demonstrating that positivity fails outside the
/// coordinate-power family. Samples triples uniformly in [-1,1]^2 and
/// returns the first whose permutation sum, normalized by its largest term,
/// is at most `-threshold`.
pub fn huovinen_negative_example(
    seed: u64,
    max_samples: u64,
    threshold: f64,
) -> Option<(Triple, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..max_samples {
        let mut coord = || rng.gen_range(-1.0..1.0);
        let t = Triple::new(
            Point2::new(coord(), coord()),
            Point2::new(coord(), coord()),
            Point2::new(coord(), coord()),
        );
        if let Ok((p, scale)) = permutation_direct_with_scale(KernelId::Huovinen, &t) {
            if scale > 0.0 && p / scale <= -threshold {
                return Some((t, p / scale));
            }
        }
    }
    None
}
