//! Quartic intensity loss with its Wirtinger gradient and Hessian.
//!
//! For `f(z) = (1/2m) Σ (y_i² − |a_i* z|²)²` the gradient pair is
//! `∇₁f = (∂f/∂z)* = (1/m) Σ (|a_i* z|² − y_i²) a_i a_i* z` and `∇₂f = conj(∇₁f)`.
//! Moving `z` against `∇₁f` is steepest descent in the underlying real
//! coordinates.

use num_complex::Complex64;

use crate::error::{check_dim, Result};
use crate::sampling::{Fourier2DOperator, GaussianOperator, Sampling};
use crate::signal::{restrict, ComplexSignal, Observations, SupportSet};
use crate::summation::{pairwise_sum, pairwise_sum_c};

/// Both components `[∇₁f, ∇₂f]` of the Wirtinger gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct WirtingerGradient {
    pub d_z: ComplexSignal,
    pub d_zbar: ComplexSignal,
}

/// Wirtinger Hessian as four `n × n` row-major blocks
/// `[[B11, B12], [B21, B22]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WirtingerHessian {
    n: usize,
    pub b11: Vec<Complex64>,
    pub b12: Vec<Complex64>,
    pub b21: Vec<Complex64>,
    pub b22: Vec<Complex64>,
}

impl WirtingerHessian {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// The `2n × 2n` matrix, row-major.
    pub fn assembled(&self) -> Vec<Complex64> {
        let n = self.n;
        let mut out = vec![Complex64::new(0.0, 0.0); 4 * n * n];
        for p in 0..n {
            for q in 0..n {
                out[p * 2 * n + q] = self.b11[p * n + q];
                out[p * 2 * n + n + q] = self.b12[p * n + q];
                out[(n + p) * 2 * n + q] = self.b21[p * n + q];
                out[(n + p) * 2 * n + n + q] = self.b22[p * n + q];
            }
        }
        out
    }

    /// `[δ; δ̄]* H [δ; δ̄]`, the second derivative of `t ↦ f(z + tδ)` at 0.
    pub fn quadratic_form(&self, delta: &ComplexSignal) -> Result<f64> {
        check_dim(self.n, delta.len())?;
        let n = self.n;
        let d = delta.as_slice();
        let mut acc = Complex64::new(0.0, 0.0);
        for p in 0..n {
            let mut row = Complex64::new(0.0, 0.0);
            for q in 0..n {
                row += self.b11[p * n + q] * d[q] + self.b12[p * n + q] * d[q].conj();
            }
            acc += d[p].conj() * row;
            let mut row = Complex64::new(0.0, 0.0);
            for q in 0..n {
                row += self.b21[p * n + q] * d[q] + self.b22[p * n + q] * d[q].conj();
            }
            acc += d[p] * row;
        }
        Ok(acc.re)
    }

    /// Keeps rows and columns indexed by `support`, zeroing the rest.
    pub fn restricted(&self, support: &SupportSet) -> Result<WirtingerHessian> {
        check_dim(self.n, support.ambient_dim())?;
        let n = self.n;
        let mask = |b: &[Complex64]| {
            let mut out = vec![Complex64::new(0.0, 0.0); n * n];
            for &p in support.indices() {
                for &q in support.indices() {
                    out[p * n + q] = b[p * n + q];
                }
            }
            out
        };
        Ok(WirtingerHessian {
            n,
            b11: mask(&self.b11),
            b12: mask(&self.b12),
            b21: mask(&self.b21),
            b22: mask(&self.b22),
        })
    }
}

/// Loss and (optionally) `∇₁f` in whatever coordinates `op` acts on.
pub(crate) fn evaluate(
    op: &dyn Sampling,
    ysq: &[f64],
    z: &[Complex64],
    want_grad: bool,
) -> (f64, Option<Vec<Complex64>>) {
    let m = op.num_samples();
    let w = op.forward(z);
    let resid: Vec<f64> = w.iter().zip(ysq).map(|(wi, yi)| wi.norm_sqr() - yi).collect();
    let loss = pairwise_sum(m, |i| resid[i] * resid[i]) / (2.0 * m as f64);
    let grad = want_grad.then(|| {
        let weighted: Vec<Complex64> = w.iter().zip(&resid).map(|(wi, r)| wi * *r).collect();
        let inv_m = 1.0 / m as f64;
        op.adjoint(&weighted).into_iter().map(|g| g * inv_m).collect()
    });
    (loss, grad)
}

fn check_problem(op: &dyn Sampling, y: &Observations, z: &ComplexSignal) -> Result<()> {
    check_dim(op.num_samples(), y.len())?;
    check_dim(op.dim(), z.len())
}

/// `(1/2m) Σ (y_i² − |a_i* z|²)²`.
pub fn loss(op: &dyn Sampling, y: &Observations, z: &ComplexSignal) -> Result<f64> {
    check_problem(op, y, z)?;
    Ok(evaluate(op, &y.squares(), z.as_slice(), false).0)
}

/// `∇₁f(z) = (1/m) Σ (|a_i* z|² − y_i²) a_i a_i* z`.
pub fn grad1(op: &dyn Sampling, y: &Observations, z: &ComplexSignal) -> Result<ComplexSignal> {
    check_problem(op, y, z)?;
    let (_, g) = evaluate(op, &y.squares(), z.as_slice(), true);
    Ok(ComplexSignal::from_vec_unchecked(g.expect("gradient requested")))
}

/// `∇₁f(z)` with entries outside `support` zeroed.
pub fn grad1_restricted(
    op: &dyn Sampling,
    y: &Observations,
    z: &ComplexSignal,
    support: &SupportSet,
) -> Result<ComplexSignal> {
    check_dim(op.dim(), support.ambient_dim())?;
    restrict(&grad1(op, y, z)?, support)
}

/// Both Wirtinger gradient components, each from its own formula.
pub fn wirtinger_gradient(
    op: &dyn Sampling,
    y: &Observations,
    z: &ComplexSignal,
) -> Result<WirtingerGradient> {
    check_problem(op, y, z)?;
    let m = op.num_samples() as f64;
    let w = op.forward(z.as_slice());
    let weighted: Vec<Complex64> = w
        .iter()
        .zip(y.as_slice())
        .map(|(wi, yi)| wi * (wi.norm_sqr() - yi * yi))
        .collect();
    let d_z: Vec<Complex64> = op.adjoint(&weighted).into_iter().map(|g| g / m).collect();
    // ∇₂f = (1/m) Σ c_i ā_i with c_i = (|w_i|² − y_i²) w̄_i, and
    // Σ c_i ā_i = conj(Σ c̄_i a_i)
    let c: Vec<Complex64> = w
        .iter()
        .zip(y.as_slice())
        .map(|(wi, yi)| wi.conj() * (wi.norm_sqr() - yi * yi))
        .collect();
    let c_bar: Vec<Complex64> = c.iter().map(|v| v.conj()).collect();
    let d_zbar: Vec<Complex64> = op.adjoint(&c_bar).into_iter().map(|g| g.conj() / m).collect();
    Ok(WirtingerGradient {
        d_z: ComplexSignal::from_vec_unchecked(d_z),
        d_zbar: ComplexSignal::from_vec_unchecked(d_zbar),
    })
}

/// Dense empirical Hessian; meant for verification at small `n`.
pub fn hessian(a: &GaussianOperator, y: &Observations, z: &ComplexSignal) -> Result<WirtingerHessian> {
    check_problem(a, y, z)?;
    let (m, n) = (a.rows(), a.cols());
    let w = a.forward(z.as_slice());
    let inv_m = 1.0 / m as f64;
    let c1: Vec<f64> = w
        .iter()
        .zip(y.as_slice())
        .map(|(wi, yi)| (2.0 * wi.norm_sqr() - yi * yi) * inv_m)
        .collect();
    let c2: Vec<Complex64> = w.iter().map(|wi| wi * wi * inv_m).collect();
    let mut b11 = vec![Complex64::new(0.0, 0.0); n * n];
    let mut b12 = vec![Complex64::new(0.0, 0.0); n * n];
    for p in 0..n {
        let ap = a.column(p);
        for q in 0..n {
            let aq = a.column(q);
            b11[p * n + q] = pairwise_sum_c(m, |i| ap[i] * aq[i].conj() * c1[i]);
            b12[p * n + q] = pairwise_sum_c(m, |i| c2[i] * ap[i] * aq[i]);
        }
    }
    let b21 = b12.iter().map(|v| v.conj()).collect();
    let b22 = b11.iter().map(|v| v.conj()).collect();
    Ok(WirtingerHessian {
        n,
        b11,
        b12,
        b21,
        b22,
    })
}

/// `E f(z) = ‖x‖⁴ + ‖z‖⁴ − ‖x‖²‖z‖² − |x* z|²` under standard complex Gaussian rows.
pub fn expected_loss(x: &ComplexSignal, z: &ComplexSignal) -> Result<f64> {
    let cross = x.inner(z)?.norm_sqr();
    let (xx, zz) = (x.norm_sqr(), z.norm_sqr());
    Ok(xx * xx + zz * zz - xx * zz - cross)
}

/// `∇₁ E f(z) = ((2‖z‖² − ‖x‖²) I − x x*) z`.
pub fn expected_grad1(x: &ComplexSignal, z: &ComplexSignal) -> Result<ComplexSignal> {
    let cross = x.inner(z)?;
    let scale = 2.0 * z.norm_sqr() - x.norm_sqr();
    Ok(ComplexSignal::from_vec_unchecked(
        z.iter()
            .zip(x.iter())
            .map(|(zi, xi)| zi * scale - xi * cross)
            .collect(),
    ))
}

/// Closed-form Hessian of `E f` at `z`.
pub fn expected_hessian(x: &ComplexSignal, z: &ComplexSignal) -> Result<WirtingerHessian> {
    check_dim(x.len(), z.len())?;
    let n = x.len();
    let diag = 2.0 * z.norm_sqr() - x.norm_sqr();
    let (xs, zs) = (x.as_slice(), z.as_slice());
    let mut b11 = vec![Complex64::new(0.0, 0.0); n * n];
    let mut b12 = vec![Complex64::new(0.0, 0.0); n * n];
    for p in 0..n {
        for q in 0..n {
            let mut v = zs[p] * zs[q].conj() * 2.0 - xs[p] * xs[q].conj();
            if p == q {
                v += diag;
            }
            b11[p * n + q] = v;
            b12[p * n + q] = zs[p] * zs[q] * 2.0;
        }
    }
    let b21 = b12.iter().map(|v| v.conj()).collect();
    let b22 = b11.iter().map(|v| v.conj()).collect();
    Ok(WirtingerHessian {
        n,
        b11,
        b12,
        b21,
        b22,
    })
}

/// `∇₁f` for the 2D Fourier model via two FFTs.
///
/// With `Z = DFT(z)` and `u_i = (|Z_i|² − y_i²) Z_i` the gradient is
/// `(1/m) Σ u_i a_i`, i.e. the unnormalised inverse DFT of `u` divided by `m`.
pub fn grad1_fourier2d(
    op: &Fourier2DOperator,
    y: &Observations,
    z: &ComplexSignal,
) -> Result<ComplexSignal> {
    check_problem(op, y, z)?;
    let spectrum = op.forward(z.as_slice());
    let u: Vec<Complex64> = spectrum
        .iter()
        .zip(y.as_slice())
        .map(|(s, yi)| s * (s.norm_sqr() - yi * yi))
        .collect();
    let m = op.num_samples() as f64;
    Ok(ComplexSignal::from_vec_unchecked(
        op.adjoint(&u).into_iter().map(|g| g / m).collect(),
    ))
}
