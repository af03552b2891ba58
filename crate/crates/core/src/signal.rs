//! Shared domain types, phase-invariant metrics and top-k selection.

use std::cmp::Ordering;
use std::ops::Index;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{check_dim, Result, SprError};
use crate::summation::{inner, norm_sqr, pairwise_sum};

/// Default NMSE below which a recovery counts as exact.
pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 1e-6;

/// Dense vector of finite complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal(Vec<Complex64>);

impl ComplexSignal {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() {
            return Err(SprError::Argument("signal must have length >= 1".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SprError::Argument(format!("non-finite entry at index {i}")));
        }
        Ok(Self(values))
    }

    /// Skips the finiteness scan; callers guarantee the invariant.
    pub(crate) fn from_vec_unchecked(values: Vec<Complex64>) -> Self {
        debug_assert!(!values.is_empty());
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "signal length must be >= 1");
        Self(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.0.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self(self.0.iter().map(|v| v * c).collect())
    }

    pub fn conj(&self) -> Self {
        Self(self.0.iter().map(|v| v.conj()).collect())
    }

    /// `Σ conj(self_i) other_i`, i.e. `self* other`.
    pub fn inner(&self, other: &ComplexSignal) -> Result<Complex64> {
        check_dim(self.len(), other.len())?;
        Ok(inner(&self.0, &other.0))
    }

    /// Indices of nonzero entries.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != Complex64::new(0.0, 0.0))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count_nonzero(&self) -> usize {
        self.0.iter().filter(|v| **v != Complex64::new(0.0, 0.0)).count()
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.norm()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Index<usize> for ComplexSignal {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

/// Strictly increasing set of indices into a vector of length `ambient_dim`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SupportSet {
    indices: Vec<usize>,
    ambient_dim: usize,
}

impl SupportSet {
    /// Builds a support from arbitrary indices; duplicates are merged.
    pub fn new(mut indices: Vec<usize>, ambient_dim: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last >= ambient_dim {
                return Err(SprError::Argument(format!(
                    "index {last} out of range for dimension {ambient_dim}"
                )));
            }
        }
        Ok(Self {
            indices,
            ambient_dim,
        })
    }

    pub fn empty(ambient_dim: usize) -> Self {
        Self {
            indices: Vec::new(),
            ambient_dim,
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Self {
            indices: (0..ambient_dim).collect(),
            ambient_dim,
        }
    }

    pub fn range(range: std::ops::Range<usize>, ambient_dim: usize) -> Result<Self> {
        Self::new(range.collect(), ambient_dim)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn union(&self, other: &SupportSet) -> Result<SupportSet> {
        check_dim(self.ambient_dim, other.ambient_dim)?;
        let mut merged = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (self.indices.iter().peekable(), other.indices.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&i), Some(&&j)) => match i.cmp(&j) {
                    Ordering::Less => {
                        merged.push(i);
                        a.next();
                    }
                    Ordering::Greater => {
                        merged.push(j);
                        b.next();
                    }
                    Ordering::Equal => {
                        merged.push(i);
                        a.next();
                        b.next();
                    }
                },
                (Some(&&i), None) => {
                    merged.push(i);
                    a.next();
                }
                (None, Some(&&j)) => {
                    merged.push(j);
                    b.next();
                }
                (None, None) => break,
            }
        }
        Ok(SupportSet {
            indices: merged,
            ambient_dim: self.ambient_dim,
        })
    }

    pub fn intersection_len(&self, other: &SupportSet) -> usize {
        self.indices.iter().filter(|&&i| other.contains(i)).count()
    }

    pub fn is_superset_of(&self, indices: &[usize]) -> bool {
        indices.iter().all(|&i| self.contains(i))
    }
}

/// Nonnegative magnitude samples `y_i = |a_i* x|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations(Vec<f64>);

impl Observations {
    pub fn new(magnitudes: Vec<f64>) -> Result<Self> {
        if let Some(i) = magnitudes.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(SprError::Argument(format!(
                "observation {i} is negative or non-finite"
            )));
        }
        Ok(Self(magnitudes))
    }

    pub(crate) fn from_vec_unchecked(magnitudes: Vec<f64>) -> Self {
        Self(magnitudes)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn squares(&self) -> Vec<f64> {
        self.0.iter().map(|v| v * v).collect()
    }

    /// `(1/m) Σ y_i²`, an unbiased proxy for `‖x‖²` under Gaussian sampling.
    pub fn mean_square(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        crate::summation::pairwise_sum(self.0.len(), |i| self.0[i] * self.0[i]) / self.0.len() as f64
    }

    pub fn select(&self, range: std::ops::Range<usize>) -> Observations {
        Observations(self.0[range].to_vec())
    }
}

/// Outcome of a full recovery run.
#[derive(Debug, Clone)]
pub struct RecoveryReport {
    pub estimate: ComplexSignal,
    /// Present only when a ground-truth signal was supplied.
    pub nmse: Option<f64>,
    pub dist: Option<f64>,
    pub final_loss: f64,
    pub loss_trace: Vec<f64>,
    pub iterations: usize,
    pub success: bool,
    /// Pruned supports `S^0, S^1, ...`.
    pub support_history: Vec<SupportSet>,
    /// Matched (pre-pruning) supports for iterations `1, 2, ...`.
    pub matched_history: Vec<SupportSet>,
    pub elapsed: std::time::Duration,
    /// Set when the run stopped on a numeric failure.
    pub diagnostics: Option<String>,
}

/// `min_φ ‖z − x e^{jφ}‖`.
///
/// The minimising phase is `arg(x* z)`; the residual is formed explicitly
/// rather than through `‖z‖² + ‖x‖² − 2|x* z|`, which cancels badly near zero.
pub fn phase_dist(z: &ComplexSignal, x: &ComplexSignal) -> Result<f64> {
    check_dim(x.len(), z.len())?;
    let cross = inner(x.as_slice(), z.as_slice());
    let rot = if cross.norm() > 0.0 {
        cross / cross.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let d2 = pairwise_sum(z.len(), |i| (z[i] - x[i] * rot).norm_sqr());
    Ok(d2.sqrt())
}

/// Phase-invariant distance normalised by `‖x‖`.
pub fn nmse(z: &ComplexSignal, x: &ComplexSignal) -> Result<f64> {
    check_dim(x.len(), z.len())?;
    let xn = x.norm();
    if xn == 0.0 {
        return Err(SprError::DegenerateReference);
    }
    Ok(phase_dist(z, x)? / xn)
}

/// Indices of the `k` largest-modulus entries; ties go to the smaller index.
pub fn top_k_indices(v: &ComplexSignal, k: usize) -> Result<SupportSet> {
    top_k_by(&v.moduli(), k)
}

/// [`top_k_indices`] over precomputed nonnegative scores.
pub fn top_k_by(scores: &[f64], k: usize) -> Result<SupportSet> {
    let n = scores.len();
    if k == 0 {
        return Err(SprError::Argument("k must be >= 1".into()));
    }
    if k > n {
        return Err(SprError::Capacity {
            requested: k,
            available: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let by_score = |a: &usize, b: &usize| {
        scores[*b]
            .partial_cmp(&scores[*a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(b))
    };
    if k < n {
        order.select_nth_unstable_by(k - 1, by_score);
        order.truncate(k);
    }
    SupportSet::new(order, n)
}

/// Keeps the entries of `z` on `support`, zeroing the rest.
pub fn restrict(z: &ComplexSignal, support: &SupportSet) -> Result<ComplexSignal> {
    check_dim(support.ambient_dim(), z.len())?;
    let mut out = vec![Complex64::new(0.0, 0.0); z.len()];
    for &i in support.indices() {
        out[i] = z[i];
    }
    Ok(ComplexSignal(out))
}

/// Fraction of `x`'s energy captured on `support`.
pub fn captured_energy(x: &ComplexSignal, support: &SupportSet) -> Result<f64> {
    let total = x.norm_sqr();
    if total == 0.0 {
        return Err(SprError::DegenerateReference);
    }
    Ok(restrict(x, support)?.norm_sqr() / total)
}
