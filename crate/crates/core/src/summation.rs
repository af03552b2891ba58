//! Pairwise (cascade) summation.
//!
//! Every per-sample reduction in the crate goes through these helpers so that
//! results do not depend on the order in which a caller happens to iterate.

use num_complex::Complex64;

const BLOCK: usize = 32;

/// Sums `term(i)` for `i in 0..len` by recursive halving.
pub fn pairwise_sum<F>(len: usize, term: F) -> f64
where
    F: Fn(usize) -> f64,
{
    fn rec<F: Fn(usize) -> f64>(lo: usize, hi: usize, term: &F) -> f64 {
        if hi - lo <= BLOCK {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += term(i);
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, term) + rec(mid, hi, term)
        }
    }
    rec(0, len, &term)
}

/// Complex counterpart of [`pairwise_sum`].
pub fn pairwise_sum_c<F>(len: usize, term: F) -> Complex64
where
    F: Fn(usize) -> Complex64,
{
    fn rec<F: Fn(usize) -> Complex64>(lo: usize, hi: usize, term: &F) -> Complex64 {
        if hi - lo <= BLOCK {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in lo..hi {
                acc += term(i);
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, term) + rec(mid, hi, term)
        }
    }
    rec(0, len, &term)
}

pub fn sum_slice(values: &[f64]) -> f64 {
    pairwise_sum(values.len(), |i| values[i])
}

pub fn norm_sqr(values: &[Complex64]) -> f64 {
    pairwise_sum(values.len(), |i| values[i].norm_sqr())
}

/// `Σ conj(u_i) v_i`
pub fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    debug_assert_eq!(u.len(), v.len());
    pairwise_sum_c(u.len(), |i| u[i].conj() * v[i])
}
