//! Compensated summation and deterministic parallel reduction.
//!
//! Triple sums accumulate up to billions of terms; naive accumulation loses
//! digits and naive parallel reduction loses determinism. The contract here:
//! per-task partials are computed sequentially, then combined in a fixed
//! order, so results are bit-identical for any worker count.

use rayon::prelude::*;

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Compensated sum of a slice.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}

/// Map every index of `0..n` through `task` in parallel, then combine the
/// per-index outputs with `fold` sequentially in index order.
///
/// The per-index outputs do not depend on scheduling and the fold order is
/// fixed, so the result is independent of the thread count.
pub fn deterministic_map_reduce<T, FMap, FFold, Acc>(
    n: usize,
    task: FMap,
    init: Acc,
    mut fold: FFold,
) -> Acc
where
    T: Send,
    FMap: Fn(usize) -> T + Sync + Send,
    FFold: FnMut(Acc, T) -> Acc,
{
    let partials: Vec<T> = (0..n).into_par_iter().map(task).collect();
    let mut acc = init;
    for p in partials {
        acc = fold(acc, p);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_beats_naive_summation() {
        // 1 followed by many tiny values that naive summation drops entirely.
        let mut values = vec![1.0f64];
        values.extend(std::iter::repeat_n(1e-16, 10_000));
        let naive: f64 = values.iter().sum();
        let comp = compensated_sum(&values);
        let exact = 1.0 + 1e-16 * 10_000.0;
        assert_eq!(naive, 1.0);
        assert_eq!(comp, exact);
    }

    #[test]
    fn map_reduce_matches_sequential() {
        let vals: Vec<f64> = (0..10_000).map(|i| (i as f64 * 0.37).sin()).collect();
        let par = deterministic_map_reduce(
            vals.len(),
            |i| vals[i],
            NeumaierSum::new(),
            |mut acc, v| {
                acc.add(v);
                acc
            },
        )
        .value();
        assert_eq!(par, compensated_sum(&vals));
    }
}
