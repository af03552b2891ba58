//! Sampling operators, test-signal generation and phaseless observations.
//!
//! An operator is described by its rows `a_i`; the sample it produces from `z`
//! is the conjugated inner product `a_i* z`, and the magnitude `|a_i* z|` is
//! what gets observed.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_dim, Result, SprError};
use crate::signal::{ComplexSignal, Observations, SupportSet};
use crate::summation::{pairwise_sum, pairwise_sum_c};

/// Seed for every random draw in the crate; there is no global generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Derives an independent child seed (splitmix64 finaliser).
    pub fn derive(self, stream: u64) -> RngSeed {
        let mut z = self
            .0
            .wrapping_add(0x9E37_79B9_7F4A_7C15_u64.wrapping_mul(stream.wrapping_add(1)));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl fmt::Display for RngSeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Draws one standard complex Gaussian `N(0, 1/2) + j N(0, 1/2)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// A linear sampling model `z ↦ (a_i* z)_i`.
pub trait Sampling: Send + Sync {
    /// Number of samples `m`.
    fn num_samples(&self) -> usize;

    /// Signal dimension `n`.
    fn dim(&self) -> usize;

    /// `(a_i* z)_{i=1..m}`.
    fn forward(&self, z: &[Complex64]) -> Vec<Complex64>;

    /// `Σ_i r_i a_i`.
    fn adjoint(&self, r: &[Complex64]) -> Vec<Complex64>;

    /// `Σ_i y_i |a_ij|` for every column `j`.
    fn column_scores(&self, y: &[f64]) -> Vec<f64>;

    /// The same model acting on the coordinates in `support` only.
    fn restrict<'a>(&'a self, support: &SupportSet) -> Box<dyn Sampling + 'a>;
}

/// Dense `m × n` matrix of i.i.d. standard complex Gaussian rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianOperator {
    m: usize,
    n: usize,
    /// Column-major: entry `(i, j)` lives at `j * m + i`.
    entries: Vec<Complex64>,
}

impl GaussianOperator {
    /// Builds an operator from row vectors `a_i`.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(SprError::Argument("operator needs at least one row".into()));
        }
        let n = rows[0].len();
        if n == 0 {
            return Err(SprError::Argument("operator needs at least one column".into()));
        }
        let mut entries = vec![Complex64::new(0.0, 0.0); m * n];
        for (i, row) in rows.iter().enumerate() {
            check_dim(n, row.len())?;
            for (j, a) in row.iter().enumerate() {
                if !a.is_finite() {
                    return Err(SprError::Argument(format!("non-finite entry ({i}, {j})")));
                }
                entries[j * m + i] = *a;
            }
        }
        Ok(Self { m, n, entries })
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    /// Entry `a_ij` of row `i`.
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.entries[j * self.m + i]
    }

    pub fn column(&self, j: usize) -> &[Complex64] {
        &self.entries[j * self.m..(j + 1) * self.m]
    }

    pub fn row(&self, i: usize) -> Vec<Complex64> {
        (0..self.n).map(|j| self.entry(i, j)).collect()
    }

    /// Contiguous block of rows as a standalone operator.
    pub fn row_block(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.m {
            return Err(SprError::Argument(format!(
                "row block {range:?} invalid for {} rows",
                self.m
            )));
        }
        let m = range.end - range.start;
        let mut entries = Vec::with_capacity(m * self.n);
        for j in 0..self.n {
            entries.extend_from_slice(&self.column(j)[range.clone()]);
        }
        Ok(Self {
            m,
            n: self.n,
            entries,
        })
    }
}

/// Draws an `m × n` standard complex Gaussian operator.
///
/// Entries are drawn row by row, so the operator for `m` rows is a prefix of
/// the one for any larger `m` under the same seed.
pub fn gen_gaussian_operator(m: usize, n: usize, seed: RngSeed) -> Result<GaussianOperator> {
    if m == 0 || n == 0 {
        return Err(SprError::Argument(format!(
            "operator dimensions must be positive, got {m} x {n}"
        )));
    }
    let mut rng = seed.rng();
    let mut entries = vec![Complex64::new(0.0, 0.0); m * n];
    for i in 0..m {
        for j in 0..n {
            entries[j * m + i] = complex_normal(&mut rng);
        }
    }
    Ok(GaussianOperator { m, n, entries })
}

impl Sampling for GaussianOperator {
    fn num_samples(&self) -> usize {
        self.m
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn forward(&self, z: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(z.len(), self.n, "forward: signal length mismatch");
        let mut out = vec![Complex64::new(0.0, 0.0); self.m];
        for (j, &zj) in z.iter().enumerate() {
            if zj == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.column(j)) {
                *o += a.conj() * zj;
            }
        }
        out
    }

    fn adjoint(&self, r: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(r.len(), self.m, "adjoint: residual length mismatch");
        (0..self.n)
            .map(|j| {
                let col = self.column(j);
                pairwise_sum_c(self.m, |i| r[i] * col[i])
            })
            .collect()
    }

    fn column_scores(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.m, "column_scores: observation length mismatch");
        (0..self.n)
            .map(|j| {
                let col = self.column(j);
                pairwise_sum(self.m, |i| y[i] * col[i].norm())
            })
            .collect()
    }

    fn restrict<'a>(&'a self, support: &SupportSet) -> Box<dyn Sampling + 'a> {
        assert_eq!(support.ambient_dim(), self.n, "restrict: ambient mismatch");
        Box::new(GaussianColumns {
            parent: self,
            cols: support.indices().to_vec(),
        })
    }
}

/// Column subset of a [`GaussianOperator`], in compressed coordinates.
struct GaussianColumns<'a> {
    parent: &'a GaussianOperator,
    cols: Vec<usize>,
}

impl Sampling for GaussianColumns<'_> {
    fn num_samples(&self) -> usize {
        self.parent.m
    }

    fn dim(&self) -> usize {
        self.cols.len()
    }

    fn forward(&self, z: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(z.len(), self.cols.len());
        let mut out = vec![Complex64::new(0.0, 0.0); self.parent.m];
        for (&j, &zj) in self.cols.iter().zip(z) {
            if zj == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.parent.column(j)) {
                *o += a.conj() * zj;
            }
        }
        out
    }

    fn adjoint(&self, r: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(r.len(), self.parent.m);
        self.cols
            .iter()
            .map(|&j| {
                let col = self.parent.column(j);
                pairwise_sum_c(r.len(), |i| r[i] * col[i])
            })
            .collect()
    }

    fn column_scores(&self, y: &[f64]) -> Vec<f64> {
        self.cols
            .iter()
            .map(|&j| {
                let col = self.parent.column(j);
                pairwise_sum(y.len(), |i| y[i] * col[i].norm())
            })
            .collect()
    }

    fn restrict<'b>(&'b self, support: &SupportSet) -> Box<dyn Sampling + 'b> {
        Box::new(GaussianColumns {
            parent: self.parent,
            cols: support.indices().iter().map(|&l| self.cols[l]).collect(),
        })
    }
}

/// How a [`Fourier2DOperator`] evaluates its transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DftMode {
    Fft,
    Naive,
}

/// Unnormalised 2D DFT of a `height × width` image, flattened row-major.
#[derive(Clone)]
pub struct Fourier2DOperator {
    height: usize,
    width: usize,
    mode: DftMode,
    plans: Option<FftPlans>,
}

#[derive(Clone)]
struct FftPlans {
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fourier2DOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fourier2DOperator")
            .field("height", &self.height)
            .field("width", &self.width)
            .field("mode", &self.mode)
            .finish()
    }
}

impl Fourier2DOperator {
    /// FFT for power-of-two sides, direct summation otherwise.
    pub fn new(height: usize, width: usize) -> Result<Self> {
        let mode = if height.is_power_of_two() && width.is_power_of_two() {
            DftMode::Fft
        } else {
            DftMode::Naive
        };
        Self::with_mode(height, width, mode)
    }

    pub fn with_mode(height: usize, width: usize, mode: DftMode) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(SprError::Argument(format!(
                "image dimensions must be positive, got {height} x {width}"
            )));
        }
        let plans = match mode {
            DftMode::Fft => {
                let mut planner = FftPlanner::new();
                Some(FftPlans {
                    row_fwd: planner.plan_fft_forward(width),
                    row_inv: planner.plan_fft_inverse(width),
                    col_fwd: planner.plan_fft_forward(height),
                    col_inv: planner.plan_fft_inverse(height),
                })
            }
            DftMode::Naive => None,
        };
        Ok(Self {
            height,
            width,
            mode,
            plans,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn mode(&self) -> DftMode {
        self.mode
    }

    /// Forward DFT, or the unnormalised inverse when `inverse` is set.
    fn transform(&self, data: &[Complex64], inverse: bool) -> Vec<Complex64> {
        let (h, w) = (self.height, self.width);
        assert_eq!(data.len(), h * w, "image size mismatch");
        let mut buf = data.to_vec();
        match &self.plans {
            Some(p) => {
                let (row, col) = if inverse {
                    (&p.row_inv, &p.col_inv)
                } else {
                    (&p.row_fwd, &p.col_fwd)
                };
                row.process(&mut buf);
                let mut column = vec![Complex64::new(0.0, 0.0); h];
                for c in 0..w {
                    for r in 0..h {
                        column[r] = buf[r * w + c];
                    }
                    col.process(&mut column);
                    for r in 0..h {
                        buf[r * w + c] = column[r];
                    }
                }
                buf
            }
            None => {
                let sign = if inverse { 1.0 } else { -1.0 };
                let tw_w = twiddles(w, sign);
                let tw_h = twiddles(h, sign);
                let mut rows = vec![Complex64::new(0.0, 0.0); h * w];
                for r in 0..h {
                    for k in 0..w {
                        rows[r * w + k] =
                            pairwise_sum_c(w, |c| buf[r * w + c] * tw_w[(k * c) % w]);
                    }
                }
                for c in 0..w {
                    for k in 0..h {
                        buf[k * w + c] = pairwise_sum_c(h, |r| rows[r * w + c] * tw_h[(k * r) % h]);
                    }
                }
                buf
            }
        }
    }
}

fn twiddles(len: usize, sign: f64) -> Vec<Complex64> {
    (0..len)
        .map(|t| Complex64::from_polar(1.0, sign * 2.0 * std::f64::consts::PI * t as f64 / len as f64))
        .collect()
}

impl Sampling for Fourier2DOperator {
    fn num_samples(&self) -> usize {
        self.height * self.width
    }

    fn dim(&self) -> usize {
        self.height * self.width
    }

    fn forward(&self, z: &[Complex64]) -> Vec<Complex64> {
        self.transform(z, false)
    }

    fn adjoint(&self, r: &[Complex64]) -> Vec<Complex64> {
        self.transform(r, true)
    }

    fn column_scores(&self, y: &[f64]) -> Vec<f64> {
        let total = crate::summation::sum_slice(y);
        vec![total; self.dim()]
    }

    fn restrict<'a>(&'a self, support: &SupportSet) -> Box<dyn Sampling + 'a> {
        assert_eq!(support.ambient_dim(), self.dim(), "restrict: ambient mismatch");
        Box::new(EmbeddedSupport {
            parent: self,
            cols: support.indices().to_vec(),
        })
    }
}

/// Generic support restriction: scatter into the full space, apply, gather.
struct EmbeddedSupport<'a> {
    parent: &'a dyn Sampling,
    cols: Vec<usize>,
}

impl Sampling for EmbeddedSupport<'_> {
    fn num_samples(&self) -> usize {
        self.parent.num_samples()
    }

    fn dim(&self) -> usize {
        self.cols.len()
    }

    fn forward(&self, z: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(z.len(), self.cols.len());
        let mut full = vec![Complex64::new(0.0, 0.0); self.parent.dim()];
        for (&j, &v) in self.cols.iter().zip(z) {
            full[j] = v;
        }
        self.parent.forward(&full)
    }

    fn adjoint(&self, r: &[Complex64]) -> Vec<Complex64> {
        let full = self.parent.adjoint(r);
        self.cols.iter().map(|&j| full[j]).collect()
    }

    fn column_scores(&self, y: &[f64]) -> Vec<f64> {
        let full = self.parent.column_scores(y);
        self.cols.iter().map(|&j| full[j]).collect()
    }

    fn restrict<'b>(&'b self, support: &SupportSet) -> Box<dyn Sampling + 'b> {
        Box::new(EmbeddedSupport {
            parent: self.parent,
            cols: support.indices().iter().map(|&l| self.cols[l]).collect(),
        })
    }
}

/// Distribution of the nonzero entries of a generated sparse signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalFlavor {
    /// i.i.d. standard complex Gaussian.
    Gaussian,
    /// Unit modulus with uniform random phase.
    Flat,
    /// All ones.
    Unit,
}

impl std::str::FromStr for SignalFlavor {
    type Err = SprError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "flat" => Ok(Self::Flat),
            "unit" => Ok(Self::Unit),
            other => Err(SprError::Argument(format!("unknown signal flavor '{other}'"))),
        }
    }
}

/// A `k`-sparse signal on a uniformly random support.
pub fn gen_sparse_signal(
    n: usize,
    k: usize,
    flavor: SignalFlavor,
    seed: RngSeed,
) -> Result<ComplexSignal> {
    if k == 0 || k > n {
        return Err(SprError::Argument(format!(
            "sparsity must satisfy 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    let mut rng = seed.rng();
    let mut support = sample_indices(&mut rng, n, k).into_vec();
    support.sort_unstable();
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    for &j in &support {
        values[j] = loop {
            let v = match flavor {
                SignalFlavor::Gaussian => complex_normal(&mut rng),
                SignalFlavor::Flat => {
                    Complex64::from_polar(1.0, rng.random::<f64>() * 2.0 * std::f64::consts::PI)
                }
                SignalFlavor::Unit => Complex64::new(1.0, 0.0),
            };
            // exactly-zero Gaussian draws would break the sparsity count
            if v != Complex64::new(0.0, 0.0) {
                break v;
            }
        };
    }
    Ok(ComplexSignal::from_vec_unchecked(values))
}

/// `n`-dimensional signal whose first `k` entries are one.
pub fn unit_prefix_signal(n: usize, k: usize) -> Result<ComplexSignal> {
    if k == 0 || k > n {
        return Err(SprError::Argument(format!(
            "sparsity must satisfy 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    values[..k].fill(Complex64::new(1.0, 0.0));
    Ok(ComplexSignal::from_vec_unchecked(values))
}

/// `y_i = |a_i* x|`.
pub fn observe(op: &dyn Sampling, x: &ComplexSignal) -> Result<Observations> {
    check_dim(op.dim(), x.len())?;
    Ok(Observations::from_vec_unchecked(
        op.forward(x.as_slice()).iter().map(|w| w.norm()).collect(),
    ))
}

/// Moduli of the unnormalised 2D DFT of a row-major image.
pub fn observe_fourier2d(op: &Fourier2DOperator, image: &ComplexSignal) -> Result<Observations> {
    observe(op, image)
}
