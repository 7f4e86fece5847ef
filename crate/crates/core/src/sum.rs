//! Compensated accumulation and scheduling-independent parallel reduction.
//!
//! Every lattice sum in the crate is split into a fixed list of work items
//! (for example one item per value of the matrix entry `c`). Each item is
//! accumulated sequentially with Neumaier's compensated summation, and the
//! per-item results are then combined by a pairwise tree whose shape depends
//! only on the number of items. The result is therefore bit-identical no
//! matter how many threads rayon schedules the items on.

use std::ops::Add;

use num_complex::Complex64;
use rayon::prelude::*;

/// Neumaier-compensated accumulator for one real stream.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated accumulator for complex values.
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexSum {
    re: KahanSum,
    im: KahanSum,
}

impl ComplexSum {
    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Pairwise reduction with a shape fixed by `items.len()` alone.
pub fn tree_reduce<T: Copy + Add<Output = T>>(items: &[T], zero: T) -> T {
    match items.len() {
        0 => zero,
        1 => items[0],
        n => {
            let (l, r) = items.split_at(n / 2);
            tree_reduce(l, zero) + tree_reduce(r, zero)
        }
    }
}

/// Evaluates `item(i)` for `i in 0..n` in parallel and tree-reduces the results.
pub fn par_tree_sum<T, F>(n: usize, zero: T, item: F) -> T
where
    T: Copy + Send + Add<Output = T>,
    F: Fn(usize) -> T + Sync + Send,
{
    let parts: Vec<T> = (0..n).into_par_iter().map(item).collect();
    tree_reduce(&parts, zero)
}

/// Several complex sums carried through one reduction, e.g. a truncated sum
/// together with its half-height sub-sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lanes<const K: usize>(pub [Complex64; K]);

impl<const K: usize> Lanes<K> {
    pub const ZERO: Self = Self([Complex64::new(0.0, 0.0); K]);
}

impl<const K: usize> Add for Lanes<K> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0) {
            *o += r;
        }
        Self(out)
    }
}

/// Compensated accumulators for [`Lanes`].
#[derive(Debug, Clone, Copy)]
pub struct LaneSums<const K: usize>(pub [ComplexSum; K]);

impl<const K: usize> Default for LaneSums<K> {
    fn default() -> Self {
        Self([ComplexSum::default(); K])
    }
}

impl<const K: usize> LaneSums<K> {
    pub fn value(&self) -> Lanes<K> {
        let mut out = [Complex64::new(0.0, 0.0); K];
        for (o, s) in out.iter_mut().zip(&self.0) {
            *o = s.value();
        }
        Lanes(out)
    }
}

/// Runs `f` on a dedicated pool with `workers` threads (or the ambient pool).
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match workers {
        Some(w) if w >= 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .expect("thread pool")
            .install(f),
        _ => f(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_small_terms() {
        let mut s = KahanSum::default();
        s.add(1.0);
        for _ in 0..1000 {
            s.add(1e-16);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-13).abs() < 1e-20);
    }

    #[test]
    fn tree_sum_independent_of_worker_count() {
        let f = |i: usize| Complex64::new((i as f64).sin() * 1e-3, 1.0 / (1.0 + i as f64));
        let one = with_workers(Some(1), || par_tree_sum(1001, Complex64::new(0.0, 0.0), f));
        let many = with_workers(Some(8), || par_tree_sum(1001, Complex64::new(0.0, 0.0), f));
        assert_eq!(one.re.to_bits(), many.re.to_bits());
        assert_eq!(one.im.to_bits(), many.im.to_bits());
    }
}
