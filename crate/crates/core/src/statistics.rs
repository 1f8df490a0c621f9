//! Global integral statistics: truncated transforms, exact and Monte Carlo
//! triple sums, pointwise permutation sums and the Melnikov-Verdera
//! identity residual.
//!
//! Tuple convention: `p(mu)` and `c^2(mu)` run over unordered point triples,
//! each counted once with weight `w1*w2*w3` (the integrands are fully
//! symmetric). The iterated-integral convention of ordered triples is 3! = 6
//! times larger; the Melnikov-Verdera residual below relies on exactly that
//! factor. Tuples with coincident points are skipped, mirroring the atomless
//! continuous setting.
//!
//! Exact sums are data-parallel over the leading index with a fixed-order
//! combination of per-index partials, so results are bit-identical for any
//! worker count. Monte Carlo splits the sample budget into fixed blocks with
//! seed-derived streams, which makes estimates equally thread-count
//! independent.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geometry::{Ball, Point2, Triple};
use crate::kernels::{self, KernelId};
use crate::measures::DiscreteMeasure;
use crate::summation::{deterministic_map_reduce, NeumaierSum};

/// Restriction of a triple sum to a ball at a given scale with its own
/// comparability constant: the local sum `p_lambda(x, t)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LocalWindow {
    pub center: Point2,
    pub scale: f64,
    pub lambda: f64,
}

/// Filters applied to a triple sum.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct TripleSumOptions {
    /// Keep triples whose side lengths are within this factor of each other.
    pub tau_restrict: Option<f64>,
    /// Keep triples with all pairwise separations at least this value.
    pub eps_truncate: Option<f64>,
    /// Keep triples with all three points inside this ball.
    pub region: Option<Ball>,
    /// Local window `p_lambda(x,t)`; mutually exclusive with `region` and
    /// `tau_restrict`.
    pub local_window: Option<LocalWindow>,
    /// Keep triples with all pairwise separations inside [lo, hi]; used to
    /// express the dyadic band of the per-cube localized sums.
    pub sep_range: Option<(f64, f64)>,
}

impl TripleSumOptions {
    pub fn validate(&self) -> Result<()> {
        if self.region.is_some() && self.local_window.is_some() {
            return Err(CoreError::InvalidInput(
                "at most one of region/local_window may be set".into(),
            ));
        }
        if self.local_window.is_some() && self.tau_restrict.is_some() {
            return Err(CoreError::InvalidInput(
                "local_window carries its own comparability constant".into(),
            ));
        }
        if let Some(tau) = self.tau_restrict {
            if !(tau >= 1.0) {
                return Err(CoreError::InvalidInput("tau_restrict must be >= 1".into()));
            }
        }
        if let Some(eps) = self.eps_truncate {
            if !(eps > 0.0) {
                return Err(CoreError::InvalidInput("eps_truncate must be > 0".into()));
            }
        }
        if let Some(w) = &self.local_window {
            if !(w.scale > 0.0) || !(w.lambda >= 1.0) {
                return Err(CoreError::InvalidInput(
                    "local window needs scale > 0 and lambda >= 1".into(),
                ));
            }
        }
        if let Some((lo, hi)) = self.sep_range {
            if !(lo >= 0.0) || !(hi >= lo) {
                return Err(CoreError::InvalidInput("invalid separation band".into()));
            }
        }
        Ok(())
    }
}

/// How a sum estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumMethod {
    Exact,
    Montecarlo,
}

/// Value of a triple sum, with sampling error when estimated.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SumEstimate {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    pub n_terms: u64,
    pub method: SumMethod,
}

#[derive(Clone, Copy)]
struct PrepPoint {
    x: f64,
    y: f64,
    w: f64,
}

struct Prepared {
    pts: Vec<PrepPoint>,
    eps2: f64,
    hi2: f64,
    tau2: f64,
}

fn prepare(mu: &DiscreteMeasure, opts: &TripleSumOptions) -> Result<Prepared> {
    opts.validate()?;
    let select: Vec<u32> = if let Some(ball) = &opts.region {
        mu.indices_in_ball(ball)
    } else if let Some(w) = &opts.local_window {
        mu.indices_in_ball(&Ball {
            center: w.center,
            radius: w.scale,
        })
    } else {
        (0..mu.len() as u32).collect()
    };
    let pts = select
        .iter()
        .map(|&i| PrepPoint {
            x: mu.point(i as usize).x,
            y: mu.point(i as usize).y,
            w: mu.weight(i as usize),
        })
        .collect();
    let mut eps2 = 0.0f64;
    let mut hi2 = f64::INFINITY;
    if let Some(eps) = opts.eps_truncate {
        eps2 = eps * eps;
    }
    if let Some((lo, hi)) = opts.sep_range {
        eps2 = eps2.max(lo * lo);
        hi2 = hi * hi;
    }
    let tau = opts
        .local_window
        .map(|w| w.lambda)
        .or(opts.tau_restrict)
        .unwrap_or(f64::INFINITY);
    let tau2 = if tau.is_finite() { tau * tau } else { f64::INFINITY };
    Ok(Prepared {
        pts,
        eps2,
        hi2,
        tau2,
    })
}

/// Kernel evaluation strategies used inside the triple loops. `k_via_inv`
/// evaluates `K` at a displacement whose squared norm is `r2`, given
/// `inv = 1/(r2 * other_r2)`; this trades the per-evaluation division for a
/// single reciprocal shared by the two inner kernel factors.
trait PairKernel: Sync + Copy {
    fn k_direct(&self, dx: f64, dy: f64, r2: f64) -> f64;
    fn k_via_inv(&self, dx: f64, dy: f64, other_r2: f64, inv: f64) -> f64;
}

#[derive(Clone, Copy)]
struct CauchyReal;

impl PairKernel for CauchyReal {
    #[inline(always)]
    fn k_direct(&self, dx: f64, _dy: f64, r2: f64) -> f64 {
        dx / r2
    }
    #[inline(always)]
    fn k_via_inv(&self, dx: f64, _dy: f64, other_r2: f64, inv: f64) -> f64 {
        dx * other_r2 * inv
    }
}

#[derive(Clone, Copy)]
struct CoordinatePowerK {
    n: i32,
}

impl PairKernel for CoordinatePowerK {
    #[inline(always)]
    fn k_direct(&self, dx: f64, _dy: f64, r2: f64) -> f64 {
        dx.powi(2 * self.n - 1) / r2.powi(self.n)
    }
    #[inline(always)]
    fn k_via_inv(&self, dx: f64, _dy: f64, other_r2: f64, inv: f64) -> f64 {
        dx.powi(2 * self.n - 1) * (other_r2 * inv).powi(self.n)
    }
}

#[derive(Clone, Copy)]
struct HuovinenK;

impl PairKernel for HuovinenK {
    #[inline(always)]
    fn k_direct(&self, dx: f64, dy: f64, r2: f64) -> f64 {
        dx * dy * dy / (r2 * r2)
    }
    #[inline(always)]
    fn k_via_inv(&self, dx: f64, dy: f64, other_r2: f64, inv: f64) -> f64 {
        let im = other_r2 * inv;
        dx * dy * dy * im * im
    }
}

/// Integrand over a triple, producing up to two values per accepted tuple
/// (the second slot backs the fused permutation+curvature pass).
///
/// `eval` receives `inv = 1/(r13_2 * r23_2)` from the engine (guarded
/// against degenerate tuples) and must be branch-free so the inner loop
/// vectorizes.
trait TripleIntegrand: Sync {
    type PairState: Copy + Send;
    fn pair(&self, dx12: f64, dy12: f64, r12_2: f64) -> Self::PairState;
    #[allow(clippy::too_many_arguments)]
    fn eval(
        &self,
        ps: &Self::PairState,
        dx13: f64,
        dy13: f64,
        r13_2: f64,
        dx23: f64,
        dy23: f64,
        r23_2: f64,
        inv: f64,
    ) -> (f64, f64);
}

struct PermIntegrand<K: PairKernel>(K);

impl<K: PairKernel> TripleIntegrand for PermIntegrand<K> {
    type PairState = f64;
    #[inline(always)]
    fn pair(&self, dx12: f64, dy12: f64, r12_2: f64) -> f64 {
        self.0.k_direct(dx12, dy12, r12_2)
    }
    #[inline(always)]
    fn eval(
        &self,
        &k12: &f64,
        dx13: f64,
        dy13: f64,
        r13_2: f64,
        dx23: f64,
        dy23: f64,
        _r23_2: f64,
        inv: f64,
    ) -> (f64, f64) {
        let k13 = self.0.k_via_inv(dx13, dy13, _r23_2, inv);
        let k23 = self.0.k_via_inv(dx23, dy23, r13_2, inv);
        (k12 * (k13 - k23) + k13 * k23, 0.0)
    }
}

struct CurvIntegrand;

#[derive(Clone, Copy)]
struct CurvPair {
    dx12: f64,
    dy12: f64,
    inv12: f64,
}

impl TripleIntegrand for CurvIntegrand {
    type PairState = CurvPair;
    #[inline(always)]
    fn pair(&self, dx12: f64, dy12: f64, r12_2: f64) -> CurvPair {
        CurvPair {
            dx12,
            dy12,
            inv12: 1.0 / r12_2,
        }
    }
    #[inline(always)]
    fn eval(
        &self,
        ps: &CurvPair,
        dx13: f64,
        dy13: f64,
        _r13_2: f64,
        _dx23: f64,
        _dy23: f64,
        _r23_2: f64,
        inv: f64,
    ) -> (f64, f64) {
        let cross = ps.dx12 * dy13 - ps.dy12 * dx13;
        (4.0 * cross * cross * inv * ps.inv12, 0.0)
    }
}

struct PermCurvIntegrand<K: PairKernel>(K);

#[derive(Clone, Copy)]
struct PermCurvPair {
    k12: f64,
    dx12: f64,
    dy12: f64,
    inv12: f64,
}

impl<K: PairKernel> TripleIntegrand for PermCurvIntegrand<K> {
    type PairState = PermCurvPair;
    #[inline(always)]
    fn pair(&self, dx12: f64, dy12: f64, r12_2: f64) -> PermCurvPair {
        PermCurvPair {
            k12: self.0.k_direct(dx12, dy12, r12_2),
            dx12,
            dy12,
            inv12: 1.0 / r12_2,
        }
    }
    #[inline(always)]
    fn eval(
        &self,
        ps: &PermCurvPair,
        dx13: f64,
        dy13: f64,
        r13_2: f64,
        dx23: f64,
        dy23: f64,
        r23_2: f64,
        inv: f64,
    ) -> (f64, f64) {
        let k13 = self.0.k_via_inv(dx13, dy13, r23_2, inv);
        let k23 = self.0.k_via_inv(dx23, dy23, r13_2, inv);
        let cross = ps.dx12 * dy13 - ps.dy12 * dx13;
        (
            ps.k12 * (k13 - k23) + k13 * k23,
            4.0 * cross * cross * inv * ps.inv12,
        )
    }
}

/// Accumulation lanes of the innermost loop. Lane-split accumulation has a
/// fixed association order, so the result stays deterministic while the
/// loop vectorizes.
const LANES: usize = 8;

/// Fixed-shape pairwise reduction of the lane accumulators.
#[inline]
fn fold_lanes(lanes: &[f64; LANES]) -> f64 {
    let s0 = (lanes[0] + lanes[4]) + (lanes[2] + lanes[6]);
    let s1 = (lanes[1] + lanes[5]) + (lanes[3] + lanes[7]);
    s0 + s1
}

/// Exact sum over unordered index triples, deterministic for any worker
/// count: per-leading-index partials are sequential and combined in index
/// order.
fn triple_engine<I: TripleIntegrand, const FILTERED: bool>(
    prep: &Prepared,
    integrand: &I,
) -> (f64, f64, u64) {
    let pts = &prep.pts;
    let n = pts.len();
    if n < 3 {
        return (0.0, 0.0, 0);
    }
    let eps2 = prep.eps2;
    let hi2 = prep.hi2;
    let tau2 = prep.tau2;
    let has_tau = tau2.is_finite();
    let task = |i: usize| -> (f64, f64, u64) {
        let pi = pts[i];
        let mut sum_a = NeumaierSum::new();
        let mut sum_b = NeumaierSum::new();
        let mut count = 0u64;
        for j in (i + 1)..n {
            let pj = pts[j];
            let dx12 = pi.x - pj.x;
            let dy12 = pi.y - pj.y;
            let r12_2 = dx12 * dx12 + dy12 * dy12;
            if r12_2 <= 0.0 {
                continue;
            }
            if FILTERED && (r12_2 < eps2 || r12_2 > hi2) {
                continue;
            }
            let ps = integrand.pair(dx12, dy12, r12_2);
            let wij = pi.w * pj.w;
            let mut lanes_a = [0.0f64; LANES];
            let mut lanes_b = [0.0f64; LANES];
            // Branch-free body: rejected tuples contribute a zero weight and
            // degenerate denominators are replaced by 1 before the
            // reciprocal, so every lane stays finite.
            let body = |pk: &PrepPoint| -> (f64, f64, u64) {
                let dx13 = pi.x - pk.x;
                let dy13 = pi.y - pk.y;
                let r13_2 = dx13 * dx13 + dy13 * dy13;
                let dx23 = pj.x - pk.x;
                let dy23 = pj.y - pk.y;
                let r23_2 = dx23 * dx23 + dy23 * dy23;
                let mut ok = (r13_2 > 0.0) & (r23_2 > 0.0);
                if FILTERED {
                    ok &= (r13_2 >= eps2) & (r23_2 >= eps2) & (r13_2 <= hi2) & (r23_2 <= hi2);
                    if has_tau {
                        let max2 = r12_2.max(r13_2).max(r23_2);
                        let min2 = r12_2.min(r13_2).min(r23_2);
                        ok &= max2 <= tau2 * min2;
                    }
                }
                let den = r13_2 * r23_2;
                let safe_den = if den > 0.0 { den } else { 1.0 };
                let inv = 1.0 / safe_den;
                let (a, b) = integrand.eval(&ps, dx13, dy13, r13_2, dx23, dy23, r23_2, inv);
                let wk = if ok { wij * pk.w } else { 0.0 };
                (a * wk, b * wk, ok as u64)
            };
            let tail = &pts[(j + 1)..n];
            let mut chunks = tail.chunks_exact(LANES);
            for chunk in &mut chunks {
                for l in 0..LANES {
                    let (a, b, c) = body(&chunk[l]);
                    lanes_a[l] += a;
                    lanes_b[l] += b;
                    count += c;
                }
            }
            let mut rest_a = 0.0f64;
            let mut rest_b = 0.0f64;
            for pk in chunks.remainder() {
                let (a, b, c) = body(pk);
                rest_a += a;
                rest_b += b;
                count += c;
            }
            sum_a.add(fold_lanes(&lanes_a) + rest_a);
            sum_b.add(fold_lanes(&lanes_b) + rest_b);
        }
        (sum_a.value(), sum_b.value(), count)
    };
    let (a, b, count) = deterministic_map_reduce(
        n - 2,
        task,
        (NeumaierSum::new(), NeumaierSum::new(), 0u64),
        |(mut a, mut b, c), (pa, pb, pc)| {
            a.add(pa);
            b.add(pb);
            (a, b, c + pc)
        },
    );
    (a.value(), b.value(), count)
}

/// Dispatch on the presence of filters so the common unfiltered pass pays
/// nothing for them.
fn run_engine<I: TripleIntegrand>(prep: &Prepared, integrand: &I) -> (f64, f64, u64) {
    let filtered = prep.eps2 > 0.0 || prep.hi2.is_finite() || prep.tau2.is_finite();
    if filtered {
        triple_engine::<I, true>(prep, integrand)
    } else {
        triple_engine::<I, false>(prep, integrand)
    }
}

fn dispatch_perm(prep: &Prepared, kernel: KernelId) -> (f64, u64) {
    let (v, _, c) = match kernel {
        KernelId::CoordinatePower { n: 1 } => run_engine(prep, &PermIntegrand(CauchyReal)),
        KernelId::CoordinatePower { n } => {
            run_engine(prep, &PermIntegrand(CoordinatePowerK { n: n as i32 }))
        }
        KernelId::Huovinen => run_engine(prep, &PermIntegrand(HuovinenK)),
    };
    (v, c)
}

/// Exact permutation triple sum `p(mu)` under the given filters.
pub fn triple_sum(kernel: KernelId, mu: &DiscreteMeasure, opts: &TripleSumOptions) -> Result<SumEstimate> {
    let prep = prepare(mu, opts)?;
    let (value, n_terms) = dispatch_perm(&prep, kernel);
    Ok(SumEstimate {
        value,
        stderr: None,
        n_terms,
        method: SumMethod::Exact,
    })
}

/// Exact curvature triple sum `c^2(mu)` under the given filters.
pub fn curvature_triple_sum(mu: &DiscreteMeasure, opts: &TripleSumOptions) -> Result<SumEstimate> {
    let prep = prepare(mu, opts)?;
    let (value, _, n_terms) = run_engine(&prep, &CurvIntegrand);
    Ok(SumEstimate {
        value,
        stderr: None,
        n_terms,
        method: SumMethod::Exact,
    })
}

/// Fused exact pass computing the permutation and curvature sums together;
/// one traversal of the O(N^3) tuple space instead of two.
pub fn permutation_and_curvature_sums(
    kernel: KernelId,
    mu: &DiscreteMeasure,
    opts: &TripleSumOptions,
) -> Result<(SumEstimate, SumEstimate)> {
    let prep = prepare(mu, opts)?;
    let (p, c2, n_terms) = match kernel {
        KernelId::CoordinatePower { n: 1 } => run_engine(&prep, &PermCurvIntegrand(CauchyReal)),
        KernelId::CoordinatePower { n } => {
            run_engine(&prep, &PermCurvIntegrand(CoordinatePowerK { n: n as i32 }))
        }
        KernelId::Huovinen => run_engine(&prep, &PermCurvIntegrand(HuovinenK)),
    };
    let mk = |value| SumEstimate {
        value,
        stderr: None,
        n_terms,
        method: SumMethod::Exact,
    };
    Ok((mk(p), mk(c2)))
}

/// Uniform Monte Carlo estimator over unordered index triples.
///
/// Index triples are drawn uniformly with replacement (tuples with repeated
/// indices are re-drawn, preserving uniformity over distinct triples); each
/// sample contributes `integrand * w_i w_j w_k * C(m,3)`. Filtered or
/// coincident tuples contribute zero, matching the exact sum they estimate.
/// The sample budget is split into fixed blocks with per-block seed-derived
/// streams, so the estimate is identical for any worker count.
pub fn triple_sum_montecarlo(
    kernel: KernelId,
    mu: &DiscreteMeasure,
    opts: &TripleSumOptions,
    n_samples: u64,
    seed: u64,
) -> Result<SumEstimate> {
    mc_driver(mu, opts, n_samples, seed, move |prep, i, j, k| {
        sample_value(prep, kernel, i, j, k)
    })
}

/// Monte Carlo estimator of the curvature triple sum, same sampling scheme
/// as [`triple_sum_montecarlo`].
pub fn curvature_mc(mu: &DiscreteMeasure, n_samples: u64, seed: u64) -> Result<SumEstimate> {
    mc_driver(
        mu,
        &TripleSumOptions::default(),
        n_samples,
        seed,
        sample_curvature,
    )
}

fn mc_driver<F>(
    mu: &DiscreteMeasure,
    opts: &TripleSumOptions,
    n_samples: u64,
    seed: u64,
    value_of: F,
) -> Result<SumEstimate>
where
    F: Fn(&Prepared, usize, usize, usize) -> f64 + Sync + Send,
{
    if n_samples == 0 {
        return Err(CoreError::InvalidInput("n_samples must be >= 1".into()));
    }
    let prep = prepare(mu, opts)?;
    let m = prep.pts.len() as u64;
    if m < 3 {
        return Ok(SumEstimate {
            value: 0.0,
            stderr: Some(0.0),
            n_terms: n_samples,
            method: SumMethod::Montecarlo,
        });
    }
    let total_triples = (m * (m - 1) * (m - 2)) as f64 / 6.0;

    const BLOCK: u64 = 4096;
    let n_blocks = n_samples.div_ceil(BLOCK);
    #[derive(Clone, Copy)]
    struct Moments {
        count: f64,
        mean: f64,
        m2: f64,
    }
    let block_task = |b: usize| -> Moments {
        let b = b as u64;
        let count = BLOCK.min(n_samples - b * BLOCK);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b + 1);
        let mut mom = Moments {
            count: 0.0,
            mean: 0.0,
            m2: 0.0,
        };
        for _ in 0..count {
            let (i, j, k) = loop {
                let i = rng.gen_range(0..m) as usize;
                let j = rng.gen_range(0..m) as usize;
                let k = rng.gen_range(0..m) as usize;
                if i != j && j != k && i != k {
                    break (i, j, k);
                }
            };
            let value = value_of(&prep, i, j, k) * total_triples;
            // Welford update.
            mom.count += 1.0;
            let delta = value - mom.mean;
            mom.mean += delta / mom.count;
            mom.m2 += delta * (value - mom.mean);
        }
        mom
    };
    let merged = deterministic_map_reduce(
        n_blocks as usize,
        block_task,
        Moments {
            count: 0.0,
            mean: 0.0,
            m2: 0.0,
        },
        |a, b| {
            if b.count == 0.0 {
                return a;
            }
            if a.count == 0.0 {
                return b;
            }
            let count = a.count + b.count;
            let delta = b.mean - a.mean;
            Moments {
                count,
                mean: a.mean + delta * b.count / count,
                m2: a.m2 + b.m2 + delta * delta * a.count * b.count / count,
            }
        },
    );
    let mtot = merged.count;
    let stderr = if mtot > 1.0 {
        (merged.m2 / (mtot - 1.0) / mtot).max(0.0).sqrt()
    } else {
        0.0
    };
    Ok(SumEstimate {
        value: merged.mean,
        stderr: Some(stderr),
        n_terms: n_samples,
        method: SumMethod::Montecarlo,
    })
}

struct SampleGeom {
    d12: (f64, f64),
    d13: (f64, f64),
    d23: (f64, f64),
    r12_2: f64,
    r13_2: f64,
    r23_2: f64,
    w: f64,
}

fn sample_geom(prep: &Prepared, i: usize, j: usize, k: usize) -> Option<SampleGeom> {
    let pi = prep.pts[i];
    let pj = prep.pts[j];
    let pk = prep.pts[k];
    let d12 = (pi.x - pj.x, pi.y - pj.y);
    let d13 = (pi.x - pk.x, pi.y - pk.y);
    let d23 = (pj.x - pk.x, pj.y - pk.y);
    let r12_2 = d12.0 * d12.0 + d12.1 * d12.1;
    let r13_2 = d13.0 * d13.0 + d13.1 * d13.1;
    let r23_2 = d23.0 * d23.0 + d23.1 * d23.1;
    if r12_2 <= 0.0 || r13_2 <= 0.0 || r23_2 <= 0.0 {
        return None;
    }
    let eps2 = prep.eps2;
    if r12_2 < eps2 || r13_2 < eps2 || r23_2 < eps2 {
        return None;
    }
    let hi2 = prep.hi2;
    if r12_2 > hi2 || r13_2 > hi2 || r23_2 > hi2 {
        return None;
    }
    if prep.tau2.is_finite() {
        let max2 = r12_2.max(r13_2).max(r23_2);
        let min2 = r12_2.min(r13_2).min(r23_2);
        if max2 > prep.tau2 * min2 {
            return None;
        }
    }
    Some(SampleGeom {
        d12,
        d13,
        d23,
        r12_2,
        r13_2,
        r23_2,
        w: pi.w * pj.w * pk.w,
    })
}

fn sample_value(prep: &Prepared, kernel: KernelId, i: usize, j: usize, k: usize) -> f64 {
    let Some(g) = sample_geom(prep, i, j, k) else {
        return 0.0;
    };
    let k12 = kernels::kernel_eval_unchecked(kernel, g.d12.0, g.d12.1, g.r12_2);
    let k13 = kernels::kernel_eval_unchecked(kernel, g.d13.0, g.d13.1, g.r13_2);
    let k23 = kernels::kernel_eval_unchecked(kernel, g.d23.0, g.d23.1, g.r23_2);
    (k12 * (k13 - k23) + k13 * k23) * g.w
}

fn sample_curvature(prep: &Prepared, i: usize, j: usize, k: usize) -> f64 {
    let Some(g) = sample_geom(prep, i, j, k) else {
        return 0.0;
    };
    let cross = g.d12.0 * g.d13.1 - g.d12.1 * g.d13.0;
    4.0 * cross * cross / (g.r12_2 * g.r13_2 * g.r23_2) * g.w
}

/// Render a parameter sweep as CSV with columns `parameter,value,stderr`
/// (empty stderr for exact entries).
pub fn sweep_to_csv(rows: &[(f64, SumEstimate)]) -> String {
    let mut out = String::from("parameter,value,stderr\n");
    for (param, est) in rows {
        match est.stderr {
            Some(se) => out.push_str(&format!("{param},{},{se}\n", est.value)),
            None => out.push_str(&format!("{param},{},\n", est.value)),
        }
    }
    out
}

/// `p_mu(z1)`: the ordered double sum over support pairs.
pub fn pointwise_permutation(kernel: KernelId, mu: &DiscreteMeasure, z1: &Point2) -> f64 {
    let n = mu.len();
    let task = |i: usize| -> f64 {
        let pi = mu.point(i);
        if pi.dist_sq(z1) <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0f64;
        for j in (i + 1)..n {
            let pj = mu.point(j);
            if pj.dist_sq(z1) <= 0.0 || pj.dist_sq(&pi) <= 0.0 {
                continue;
            }
            let t = Triple::new(*z1, pi, pj);
            if let Ok(p) = kernels::permutation_direct(kernel, &t) {
                acc += p * mu.weight(i) * mu.weight(j);
            }
        }
        acc
    };
    // Ordered pairs double the unordered sum.
    2.0 * deterministic_map_reduce(n, task, NeumaierSum::new(), |mut s, v| {
        s.add(v);
        s
    })
    .value()
}

/// `p_mu(z1, z2)`: the single sum over support points.
pub fn pair_permutation(kernel: KernelId, mu: &DiscreteMeasure, z1: &Point2, z2: &Point2) -> f64 {
    let mut acc = NeumaierSum::new();
    for i in 0..mu.len() {
        let p = mu.point(i);
        let t = Triple::new(*z1, *z2, p);
        if let Ok(v) = kernels::permutation_direct(kernel, &t) {
            acc.add(v * mu.weight(i));
        }
    }
    acc.value()
}

/// Truncated singular transform: sum of `K(z - w) f(w) w(w)` over support
/// points with `|z - w| > eps`.
pub fn truncated_transform(
    kernel: KernelId,
    mu: &DiscreteMeasure,
    f_values: &[f64],
    z: &Point2,
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(CoreError::InvalidInput("eps must be > 0".into()));
    }
    if f_values.len() != mu.len() {
        return Err(CoreError::InvalidInput(
            "f must assign one value per support point".into(),
        ));
    }
    let eps2 = eps * eps;
    let mut acc = NeumaierSum::new();
    for (i, f) in f_values.iter().enumerate() {
        let d = z.sub(&mu.point(i));
        let r2 = d.norm_sq();
        if r2 > eps2 {
            acc.add(kernels::kernel_eval_unchecked(kernel, d.x, d.y, r2) * f * mu.weight(i));
        }
    }
    Ok(acc.value())
}

/// Outcome of the Melnikov-Verdera comparison
/// `||C_eps 1||^2 = (1/6) c^2_eps(mu) + O(mu(C))`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MvResidual {
    /// `sum_z |truncated Cauchy transform of 1 at z|^2 w(z)`.
    pub lhs: f64,
    /// `c^2_eps(mu) / 6` in the ordered convention, i.e. the unordered sum.
    pub rhs: f64,
    pub residual: f64,
}

/// Left and right side of the Melnikov-Verdera identity at truncation `eps`,
/// using the full complex Cauchy kernel expanded in real components.
pub fn mv_identity_residual(mu: &DiscreteMeasure, eps: f64) -> Result<MvResidual> {
    if !(eps > 0.0) {
        return Err(CoreError::InvalidInput("eps must be > 0".into()));
    }
    let eps2 = eps * eps;
    let n = mu.len();
    let task = |i: usize| -> f64 {
        let zi = mu.point(i);
        let mut re = NeumaierSum::new();
        let mut im = NeumaierSum::new();
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = zi.sub(&mu.point(j));
            let r2 = d.norm_sq();
            if r2 > eps2 {
                let w = mu.weight(j);
                // 1/(z-w) = conj(z-w)/|z-w|^2.
                re.add(w * d.x / r2);
                im.add(-w * d.y / r2);
            }
        }
        let (re, im) = (re.value(), im.value());
        (re * re + im * im) * mu.weight(i)
    };
    let lhs = deterministic_map_reduce(n, task, NeumaierSum::new(), |mut s, v| {
        s.add(v);
        s
    })
    .value();
    let rhs = curvature_triple_sum(
        mu,
        &TripleSumOptions {
            eps_truncate: Some(eps),
            ..Default::default()
        },
    )?
    .value;
    Ok(MvResidual {
        lhs,
        rhs,
        residual: lhs - rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{GeneratorKind, GeneratorSpec};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn triangle_measure() -> DiscreteMeasure {
        DiscreteMeasure::build(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
            ],
            vec![1.0; 3],
        )
        .unwrap()
    }

    fn random_cloud(n: usize, seed: u64) -> DiscreteMeasure {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Point2> = (0..n)
            .map(|_| Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let ws: Vec<f64> = (0..n).map(|_| rng.gen_range(0.4..1.6)).collect();
        DiscreteMeasure::build(pts, ws).unwrap()
    }

    /// Test-side brute force, independent of the engine's algebra.
    fn brute_force_sum(
        mu: &DiscreteMeasure,
        opts: &TripleSumOptions,
        f: impl Fn(&Triple) -> f64,
    ) -> f64 {
        let n = mu.len();
        let mut total = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    let t = Triple::new(mu.point(i), mu.point(j), mu.point(k));
                    let sides = t.side_lengths();
                    if sides.contains(&0.0) {
                        continue;
                    }
                    if let Some(eps) = opts.eps_truncate {
                        if sides.iter().any(|&s| s < eps) {
                            continue;
                        }
                    }
                    if let Some((lo, hi)) = opts.sep_range {
                        if sides.iter().any(|&s| s < lo || s > hi) {
                            continue;
                        }
                    }
                    if let Some(tau) = opts.tau_restrict {
                        let mx = sides.iter().cloned().fold(0.0f64, f64::max);
                        let mn = sides.iter().cloned().fold(f64::INFINITY, f64::min);
                        if mx > tau * mn {
                            continue;
                        }
                    }
                    if let Some(b) = &opts.region {
                        if !(b.contains(&t.z1) && b.contains(&t.z2) && b.contains(&t.z3)) {
                            continue;
                        }
                    }
                    total += f(&t) * mu.weight(i) * mu.weight(j) * mu.weight(k);
                }
            }
        }
        total
    }

    #[test]
    fn triangle_reference_values() {
        let mu = triangle_measure();
        let k1 = KernelId::coordinate_power(1).unwrap();
        let p = triple_sum(k1, &mu, &Default::default()).unwrap();
        assert_relative_eq!(p.value, 0.5, max_relative = 1e-12);
        assert_eq!(p.n_terms, 1);
        let c2 = curvature_triple_sum(&mu, &Default::default()).unwrap();
        assert_relative_eq!(c2.value, 2.0, max_relative = 1e-12);

        // tau = 1.2 excludes the (1,1,sqrt 2) triangle.
        let filtered = triple_sum(
            k1,
            &mu,
            &TripleSumOptions {
                tau_restrict: Some(1.2),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(filtered.value, 0.0);
        assert_eq!(filtered.n_terms, 0);
    }

    #[test]
    fn collinear_cloud_sums_vanish() {
        let mu = GeneratorSpec {
            kind: GeneratorKind::Segment {
                a: Point2::new(-1.0, -0.5),
                b: Point2::new(2.0, 1.0),
            },
            n_points: 40,
            seed: 0,
            weight_rule: None,
            total_mass: 1.0,
        }
        .generate()
        .unwrap();
        let k1 = KernelId::coordinate_power(1).unwrap();
        let p = triple_sum(k1, &mu, &Default::default()).unwrap();
        let n3 = mu.len().pow(3) as f64;
        assert!(p.value.abs() <= 1e-12 * n3);
        let c2 = curvature_triple_sum(&mu, &Default::default()).unwrap();
        assert!(c2.value.abs() <= 1e-12 * n3);
    }

    #[test]
    fn engine_matches_brute_force_with_filters() {
        let mu = random_cloud(24, 5);
        let k2 = KernelId::coordinate_power(2).unwrap();
        let cases = [
            TripleSumOptions::default(),
            TripleSumOptions {
                tau_restrict: Some(3.0),
                ..Default::default()
            },
            TripleSumOptions {
                eps_truncate: Some(0.4),
                ..Default::default()
            },
            TripleSumOptions {
                sep_range: Some((0.2, 1.1)),
                ..Default::default()
            },
            TripleSumOptions {
                region: Some(Ball {
                    center: Point2::ORIGIN,
                    radius: 0.7,
                }),
                ..Default::default()
            },
        ];
        for opts in cases {
            let engine = triple_sum(k2, &mu, &opts).unwrap().value;
            let brute = brute_force_sum(&mu, &opts, |t| {
                kernels::permutation_direct(k2, t).unwrap()
            });
            assert_relative_eq!(engine, brute, max_relative = 1e-10, epsilon = 1e-13);

            let engine_c = curvature_triple_sum(&mu, &opts).unwrap().value;
            let brute_c = brute_force_sum(&mu, &opts, |t| {
                let c = kernels::menger_curvature(t).unwrap();
                c * c
            });
            assert_relative_eq!(engine_c, brute_c, max_relative = 1e-10, epsilon = 1e-13);
        }
    }

    #[test]
    fn fused_pass_matches_separate_passes() {
        let mu = random_cloud(40, 6);
        let k1 = KernelId::coordinate_power(1).unwrap();
        let (p, c2) = permutation_and_curvature_sums(k1, &mu, &Default::default()).unwrap();
        let p_ref = triple_sum(k1, &mu, &Default::default()).unwrap();
        let c2_ref = curvature_triple_sum(&mu, &Default::default()).unwrap();
        assert_eq!(p.value.to_bits(), p_ref.value.to_bits());
        assert_eq!(c2.value.to_bits(), c2_ref.value.to_bits());
    }

    #[test]
    fn filter_monotonicity() {
        let mu = random_cloud(30, 7);
        let k1 = KernelId::coordinate_power(1).unwrap();
        let p_of_tau = |tau: f64| {
            triple_sum(
                k1,
                &mu,
                &TripleSumOptions {
                    tau_restrict: Some(tau),
                    ..Default::default()
                },
            )
            .unwrap()
            .value
        };
        let mut last = 0.0;
        for tau in [1.5, 2.0, 4.0, 8.0, 64.0] {
            let v = p_of_tau(tau);
            assert!(v >= last - 1e-15);
            last = v;
        }
        let unfiltered = triple_sum(k1, &mu, &Default::default()).unwrap().value;
        assert_eq!(p_of_tau(1e12).to_bits(), unfiltered.to_bits());

        let p_of_eps = |eps: f64| {
            triple_sum(
                k1,
                &mu,
                &TripleSumOptions {
                    eps_truncate: Some(eps),
                    ..Default::default()
                },
            )
            .unwrap()
            .value
        };
        let mut last = f64::INFINITY;
        for eps in [0.05, 0.1, 0.2, 0.4] {
            let v = p_of_eps(eps);
            assert!(v <= last + 1e-15);
            last = v;
        }
        assert_eq!(p_of_eps(1e-15).to_bits(), unfiltered.to_bits());
    }

    #[test]
    fn localization_consistency() {
        let mu = random_cloud(60, 8);
        let ball = Ball {
            center: Point2::new(0.1, -0.2),
            radius: 0.6,
        };
        let k1 = KernelId::coordinate_power(1).unwrap();
        let with_region = triple_sum(
            k1,
            &mu,
            &TripleSumOptions {
                region: Some(ball),
                ..Default::default()
            },
        )
        .unwrap();
        let restricted = mu.restrict_to_ball(&ball).unwrap();
        let on_restricted = triple_sum(k1, &restricted, &Default::default()).unwrap();
        assert_eq!(with_region.value.to_bits(), on_restricted.value.to_bits());
        assert_eq!(with_region.n_terms, on_restricted.n_terms);
    }

    #[test]
    fn local_window_is_region_plus_comparability() {
        let mu = random_cloud(50, 9);
        let k1 = KernelId::coordinate_power(1).unwrap();
        let w = LocalWindow {
            center: Point2::new(0.0, 0.0),
            scale: 0.8,
            lambda: 4.0,
        };
        let local = triple_sum(
            k1,
            &mu,
            &TripleSumOptions {
                local_window: Some(w),
                ..Default::default()
            },
        )
        .unwrap();
        let manual = triple_sum(
            k1,
            &mu.restrict_to_ball(&Ball {
                center: w.center,
                radius: w.scale,
            })
            .unwrap(),
            &TripleSumOptions {
                tau_restrict: Some(w.lambda),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(local.value.to_bits(), manual.value.to_bits());
    }

    #[test]
    fn montecarlo_exhaustive_agreement_on_small_cloud() {
        let mu = random_cloud(10, 10);
        let k1 = KernelId::coordinate_power(1).unwrap();
        let exact = triple_sum(k1, &mu, &Default::default()).unwrap().value;
        let mc = triple_sum_montecarlo(k1, &mu, &Default::default(), 200_000, 3).unwrap();
        let stderr = mc.stderr.unwrap();
        assert!(
            (mc.value - exact).abs() <= 3.0 * stderr,
            "mc={} exact={} stderr={}",
            mc.value,
            exact,
            stderr
        );
    }

    #[test]
    fn montecarlo_on_collinear_cloud_is_exactly_zero() {
        let mu = GeneratorSpec {
            kind: GeneratorKind::Segment {
                a: Point2::new(0.0, 0.0),
                b: Point2::new(1.0, 0.0),
            },
            n_points: 50,
            seed: 0,
            weight_rule: None,
            total_mass: 1.0,
        }
        .generate()
        .unwrap();
        let mc =
            triple_sum_montecarlo(KernelId::Huovinen, &mu, &Default::default(), 5_000, 1).unwrap();
        assert_eq!(mc.value, 0.0);
        assert_eq!(mc.stderr, Some(0.0));
    }

    #[test]
    fn montecarlo_deterministic_given_seed() {
        let mu = random_cloud(80, 11);
        let k1 = KernelId::coordinate_power(1).unwrap();
        let a = triple_sum_montecarlo(k1, &mu, &Default::default(), 10_000, 7).unwrap();
        let b = triple_sum_montecarlo(k1, &mu, &Default::default(), 10_000, 7).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.stderr.unwrap().to_bits(), b.stderr.unwrap().to_bits());
        let c = triple_sum_montecarlo(k1, &mu, &Default::default(), 10_000, 8).unwrap();
        assert_ne!(a.value.to_bits(), c.value.to_bits());
    }

    #[test]
    fn pointwise_permutation_bookkeeping() {
        let k1 = KernelId::coordinate_power(1).unwrap();
        let two_atoms = DiscreteMeasure::build(
            vec![Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
            vec![1.0; 2],
        )
        .unwrap();
        let z1 = Point2::new(0.0, 0.0);
        // Ordered pairs (A,B) and (B,A) each contribute 0.5.
        assert_relative_eq!(
            pointwise_permutation(k1, &two_atoms, &z1),
            1.0,
            max_relative = 1e-12
        );

        // z1 on the line of a collinear cloud.
        let collinear = DiscreteMeasure::build(
            vec![Point2::new(1.0, 1.0), Point2::new(2.0, 2.0), Point2::new(-1.0, -1.0)],
            vec![1.0; 3],
        )
        .unwrap();
        assert!(pointwise_permutation(k1, &collinear, &Point2::new(0.5, 0.5)).abs() < 1e-12);

        // Weighted aggregation over the support recovers the ordered triple
        // sum: sum_i p_mu(z_i) w_i = 6 * (unordered p).
        let mu = triangle_measure();
        let total: f64 = (0..3)
            .map(|i| pointwise_permutation(k1, &mu, &mu.point(i)) * mu.weight(i))
            .sum();
        let unordered = triple_sum(k1, &mu, &Default::default()).unwrap().value;
        assert_relative_eq!(total, 6.0 * unordered, max_relative = 1e-12);

        // Pair version: integrating once more closes the bookkeeping.
        let pp = pair_permutation(k1, &mu, &mu.point(0), &mu.point(1));
        assert_relative_eq!(pp, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn truncated_transform_reference_cases() {
        let k1 = KernelId::coordinate_power(1).unwrap();
        let mu = random_cloud(20, 12);
        let zeros = vec![0.0; mu.len()];
        let z = Point2::new(3.0, 3.0);
        assert_eq!(truncated_transform(k1, &mu, &zeros, &z, 0.1).unwrap(), 0.0);

        let atom = DiscreteMeasure::build(vec![Point2::new(0.5, 0.5)], vec![1.0]).unwrap();
        let f = vec![1.0];
        let z = Point2::new(2.0, 1.0);
        let expect = kernels::kernel_eval(k1, &z.sub(&Point2::new(0.5, 0.5))).unwrap();
        assert_relative_eq!(
            truncated_transform(k1, &atom, &f, &z, 0.3).unwrap(),
            expect
        );

        // Antisymmetry cancels the symmetric two-atom configuration.
        let sym = DiscreteMeasure::build(
            vec![Point2::new(-1.0, 0.0), Point2::new(1.0, 0.0)],
            vec![1.0; 2],
        )
        .unwrap();
        let f2 = vec![1.0, 1.0];
        let v = truncated_transform(k1, &sym, &f2, &Point2::new(0.0, 0.37), 0.5).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn sweep_csv_format() {
        let mu = random_cloud(12, 3);
        let k1 = KernelId::coordinate_power(1).unwrap();
        let rows = vec![
            (0.1, triple_sum(k1, &mu, &Default::default()).unwrap()),
            (
                0.2,
                triple_sum_montecarlo(k1, &mu, &Default::default(), 500, 1).unwrap(),
            ),
        ];
        let text = sweep_to_csv(&rows);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("parameter,value,stderr"));
        let exact_row = lines.next().unwrap();
        assert!(exact_row.starts_with("0.1,") && exact_row.ends_with(','));
        let mc_row = lines.next().unwrap();
        assert_eq!(mc_row.split(',').count(), 3);
        assert!(!mc_row.ends_with(','));
    }

    #[test]
    fn mv_residual_trivial_cases() {
        let atom = DiscreteMeasure::build(vec![Point2::ORIGIN], vec![1.0]).unwrap();
        let r = mv_identity_residual(&atom, 0.1).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs, 0.0);
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn mv_residual_bounded_over_eps_sweep() {
        let mu = GeneratorSpec {
            kind: GeneratorKind::Segment {
                a: Point2::new(0.0, 0.0),
                b: Point2::new(1.0, 0.0),
            },
            n_points: 400,
            seed: 0,
            weight_rule: None,
            total_mass: 1.0,
        }
        .generate()
        .unwrap();
        for eps in [2.0 / 400.0, 4.0 / 400.0, 8.0 / 400.0, 16.0 / 400.0] {
            let r = mv_identity_residual(&mu, eps).unwrap();
            assert!(
                r.residual.abs() <= 5.0 * mu.total_mass(),
                "eps={eps}: residual {}",
                r.residual
            );
        }
    }
}
