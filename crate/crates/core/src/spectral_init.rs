//! Support initialisation from envelope correlations `Z_j = (1/m) Σ y_i |a_ij|`.

use std::f64::consts::PI;

use crate::error::{check_dim, Result, SprError};
use crate::sampling::Sampling;
use crate::signal::{top_k_by, ComplexSignal, Observations, SupportSet};

/// Relative tail tolerance for the hypergeometric series.
const SERIES_TOL: f64 = 1e-14;
const SERIES_MAX_TERMS: usize = 100_000_000;

/// `Z_j = (1/m) Σ_i y_i |a_ij|` for every column.
pub fn spectral_scores(op: &dyn Sampling, y: &Observations) -> Result<Vec<f64>> {
    check_dim(op.num_samples(), y.len())?;
    let m = op.num_samples() as f64;
    Ok(op
        .column_scores(y.as_slice())
        .into_iter()
        .map(|s| s / m)
        .collect())
}

/// The `k` columns with the largest scores (ties to the smaller index).
pub fn init_support(op: &dyn Sampling, y: &Observations, k: usize) -> Result<SupportSet> {
    top_k_by(&spectral_scores(op, y)?, k)
}

/// `E[y_i |a_ij|] = (π/4) ‖x‖ F(−½, −½; 1; |x_j|²/‖x‖²)`.
pub fn expected_score(x: &ComplexSignal, j: usize) -> Result<f64> {
    if j >= x.len() {
        return Err(SprError::Argument(format!(
            "index {j} out of range for length {}",
            x.len()
        )));
    }
    let xx = x.norm_sqr();
    if xx == 0.0 {
        return Err(SprError::DegenerateReference);
    }
    let t = (x[j].norm_sqr() / xx).min(1.0);
    Ok(PI / 4.0 * xx.sqrt() * hypergeometric_f(-0.5, -0.5, 1.0, t)?)
}

/// Gauss hypergeometric series `Σ (a)_i (b)_i / (c)_i · tⁱ / i!` on `[0, 1]`.
///
/// Summation stops once an estimate of the remaining tail drops below
/// `1e-14` of the partial sum. Terms eventually behave like
/// `K i^{a+b−c−1} tⁱ`, so the tail after term `T_i` is bounded by the smaller
/// of the geometric estimate `T_i t/(1−t)` and the algebraic estimate
/// `T_i i/(c−a−b)`.
pub fn hypergeometric_f(a: f64, b: f64, c: f64, t: f64) -> Result<f64> {
    if c <= 0.0 && c.fract() == 0.0 {
        return Err(SprError::Argument(format!(
            "c = {c} must not be a nonpositive integer"
        )));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(SprError::Argument(format!("t = {t} outside [0, 1]")));
    }
    let excess = c - a - b;
    if t == 1.0 && excess <= 0.0 {
        return Err(SprError::Argument(format!(
            "series diverges at t = 1 when c − a − b = {excess} <= 0"
        )));
    }
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    // Neumaier compensation: near t = 1 the series needs millions of terms
    let mut carry = 0.0_f64;
    for i in 0..SERIES_MAX_TERMS {
        let fi = i as f64;
        term *= (a + fi) * (b + fi) / ((c + fi) * (fi + 1.0)) * t;
        if term == 0.0 {
            return Ok(sum + carry);
        }
        let next = sum + term;
        carry += if sum.abs() >= term.abs() {
            (sum - next) + term
        } else {
            (term - next) + sum
        };
        sum = next;
        let idx = fi + 1.0;
        let geometric = if t < 1.0 { t / (1.0 - t) } else { f64::INFINITY };
        let algebraic = if excess > 0.0 { idx / excess } else { f64::INFINITY };
        let tail = term.abs() * geometric.min(algebraic).max(1.0);
        if tail < SERIES_TOL * sum.abs() {
            return Ok(sum + carry);
        }
    }
    Err(SprError::Argument(format!(
        "series did not converge within {SERIES_MAX_TERMS} terms"
    )))
}
