//! Numerical checks of the landscape and initialisation theory: stationary
//! points of the expected loss on a subspace, clustering of subspace
//! minimisers, gradient concentration, captured energy and the expected
//! spectral score.
//!
//! Trials run on the current rayon pool; results come back in trial order so
//! every table is reproducible from its seed.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SprError};
use crate::objective::{expected_grad1, expected_hessian, grad1};
use crate::sampling::{
    complex_normal, gen_gaussian_operator, gen_sparse_signal, observe, unit_prefix_signal,
    RngSeed, SignalFlavor,
};
use crate::signal::{captured_energy, phase_dist, restrict, ComplexSignal, SupportSet};
use crate::spectral_init::{expected_score, init_support};
use crate::subspace_solver::{default_z0, solve_on_support, SolverConfig};

/// Runs `f(trial)` for every trial in parallel, keeping trial order.
pub fn run_trials<T, F>(trials: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..trials).into_par_iter().map(f).collect()
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// `|ω_T| = sqrt((‖x‖² + ‖x_T‖²) / (2‖x_T‖²))`.
pub fn omega_modulus(x: &ComplexSignal, t: &SupportSet) -> Result<f64> {
    let xt = restrict(x, t)?.norm_sqr();
    if xt == 0.0 {
        return Err(SprError::Precondition(
            "the subspace must overlap the signal support".into(),
        ));
    }
    Ok(((x.norm_sqr() + xt) / (2.0 * xt)).sqrt())
}

/// The nonzero stationary point `ω_T x_T` of the expected loss on `C^T`.
pub fn expected_optimum(x: &ComplexSignal, t: &SupportSet) -> Result<ComplexSignal> {
    let w = omega_modulus(x, t)?;
    Ok(restrict(x, t)?.scale(Complex64::new(w, 0.0)))
}

#[derive(Debug, Clone)]
pub struct StationaryReport {
    pub omega_modulus: f64,
    pub saddle_norm: f64,
    /// `‖(∇₁E f)_T‖ / ‖x‖³` at each candidate stationary point.
    pub checks: Vec<(String, f64)>,
    /// Second-order terms `[δ; δ̄]* ∇²E f [δ; δ̄]` at the named points.
    pub curvature: Vec<(String, f64)>,
    /// A point of `C^T` with `x* z = 0` and `‖z‖ = ‖x‖/√2`; absent when
    /// `C^T` is spanned by `x_T`.
    pub saddle: Option<ComplexSignal>,
}

/// Unit vector in `C^T` orthogonal to `x_T`, by Gram–Schmidt on the
/// coordinate vector that survives projection best.
fn orthogonal_direction(x: &ComplexSignal, t: &SupportSet) -> Result<Option<ComplexSignal>> {
    let xt = restrict(x, t)?;
    let xx = xt.norm_sqr();
    let best = t
        .indices()
        .iter()
        .map(|&j| (j, 1.0 - xt[j].norm_sqr() / xx))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    let Some((j, remaining)) = best else {
        return Ok(None);
    };
    if remaining < 1e-12 {
        return Ok(None);
    }
    // e_j − x_T (x_T* e_j)/‖x_T‖²
    let coef = xt[j].conj() / xx;
    let mut v: Vec<Complex64> = xt.iter().map(|xi| -xi * coef).collect();
    v[j] += 1.0;
    let nrm = crate::summation::norm_sqr(&v).sqrt();
    v.iter_mut().for_each(|c| *c /= nrm);
    Ok(Some(ComplexSignal::from_vec_unchecked(v)))
}

/// Evaluates the three families of stationary points of `E f` restricted to
/// `C^T`, together with the curvature signs that classify them.
pub fn stationary_classes(x: &ComplexSignal, t: &SupportSet) -> Result<StationaryReport> {
    crate::error::check_dim(x.len(), t.ambient_dim())?;
    let omega = omega_modulus(x, t)?;
    let xn = x.norm();
    let scale = xn * xn * xn;
    let xt = restrict(x, t)?;
    let xt2 = xt.norm_sqr();
    let residual = |z: &ComplexSignal| -> Result<f64> {
        Ok(restrict(&expected_grad1(x, z)?, t)?.norm() / scale)
    };

    let zero = ComplexSignal::zeros(x.len());
    let opt = xt.scale(Complex64::new(omega, 0.0));
    let mut checks = vec![
        ("zero".to_string(), residual(&zero)?),
        ("omega_x_T".to_string(), residual(&opt)?),
    ];
    let mut curvature = vec![(
        "zero_along_x_T".to_string(),
        expected_hessian(x, &zero)?.quadratic_form(&xt)?,
    )];

    let saddle_norm = xn / std::f64::consts::SQRT_2;
    let u = orthogonal_direction(x, t)?;
    let saddle = u.as_ref().map(|u| u.scale(Complex64::new(saddle_norm, 0.0)));
    if let (Some(u), Some(s)) = (&u, &saddle) {
        checks.push(("saddle".to_string(), residual(s)?));
        let h_opt = expected_hessian(x, &opt)?;
        curvature.push(("omega_x_T_along_saddle_direction".to_string(), h_opt.quadratic_form(u)?));
        let h_s = expected_hessian(x, s)?;
        let tilted = xt.scale(Complex64::from_polar(1.0, 0.7));
        curvature.push(("saddle_along_x_T".to_string(), h_s.quadratic_form(&tilted)?));
        curvature.push(("saddle_along_z".to_string(), h_s.quadratic_form(s)?));
    }
    curvature.push(("reference_minus_2_norm_x_T_4".to_string(), -2.0 * xt2 * xt2));

    Ok(StationaryReport {
        omega_modulus: omega,
        saddle_norm,
        checks,
        curvature,
        saddle,
    })
}

/// Subspace used by the clustering experiment: the first `overlap` support
/// indices of a unit-prefix signal plus `2k − overlap` indices off the support.
pub fn geometry_support(n: usize, k: usize, overlap: usize) -> Result<SupportSet> {
    if overlap == 0 || overlap > k {
        return Err(SprError::Precondition(format!(
            "overlap must satisfy 1 <= overlap <= k, got {overlap}"
        )));
    }
    let extra = 2 * k - overlap;
    if k + extra > n {
        return Err(SprError::Argument(format!(
            "n = {n} too small for a subspace of size {}",
            2 * k
        )));
    }
    SupportSet::new((0..overlap).chain(k..k + extra).collect(), n)
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryRow {
    pub trial: usize,
    /// `phase_dist(ẑ, ω_T x_T) / ‖x‖`.
    pub distance: f64,
    pub final_loss: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryTable {
    pub rows: Vec<GeometryRow>,
    pub median: f64,
}

/// How far subspace minimisers land from `ω_T x_T`.
pub fn geometry_experiment(
    n: usize,
    m: usize,
    k: usize,
    overlap: usize,
    trials: usize,
    seed: RngSeed,
) -> Result<GeometryTable> {
    let t = geometry_support(n, k, overlap)?;
    let x = unit_prefix_signal(n, k)?;
    let target = expected_optimum(&x, &t)?;
    let rows = run_trials(trials, |trial| {
        let s = seed.derive(trial as u64);
        let a = gen_gaussian_operator(m, n, s.derive(0))?;
        let y = observe(&a, &x)?;
        let z0 = default_z0(&a, &y, &t, s.derive(1))?;
        let cfg = SolverConfig {
            seed: s.derive(2),
            ..SolverConfig::default()
        };
        let out = solve_on_support(&a, &y, &t, Some(&z0), &cfg)?;
        Ok(GeometryRow {
            trial,
            distance: phase_dist(&out.minimizer, &target)? / x.norm(),
            final_loss: out.final_loss,
            converged: out.converged,
        })
    })?;
    let median = median(&rows.iter().map(|r| r.distance).collect::<Vec<_>>());
    Ok(GeometryTable { rows, median })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    /// `max_l |∇₁f(z)_l − ∇₁E f(z)_l| / (‖x‖² |x_min|)` per trial.
    pub max_deviation_over_l: Vec<f64>,
    pub bound: f64,
}

/// Elementwise gap between the empirical and expected gradient at `ω_T x_T`
/// for a flat signal and a `T` holding 90% of its energy.
pub fn concentration_experiment(
    n: usize,
    k: usize,
    m: usize,
    trials: usize,
    seed: RngSeed,
) -> Result<ConcentrationReport> {
    let keep = (9 * k).div_ceil(10);
    let max_dev = run_trials(trials, |trial| {
        let s = seed.derive(trial as u64);
        let x = gen_sparse_signal(n, k, SignalFlavor::Flat, s.derive(0))?;
        let supp = x.support();
        let t = SupportSet::new(supp[..keep].to_vec(), n)?;
        let z = expected_optimum(&x, &t)?;
        let a = gen_gaussian_operator(m, n, s.derive(1))?;
        let y = observe(&a, &x)?;
        let g = grad1(&a, &y, &z)?;
        let e = expected_grad1(&x, &z)?;
        let x_min = supp.iter().map(|&j| x[j].norm()).fold(f64::INFINITY, f64::min);
        let worst = g
            .iter()
            .zip(e.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        Ok(worst / (x.norm_sqr() * x_min))
    })?;
    Ok(ConcentrationReport {
        max_deviation_over_l: max_dev,
        bound: 0.3,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitEnergyRow {
    pub m: usize,
    pub trials: usize,
    /// Trials with `‖x_{S⁰}‖² / ‖x‖² > 0.9`.
    pub captures: usize,
    pub frequency: f64,
    pub mean_ratio: f64,
}

/// Frequency with which the spectral support holds 90% of the energy.
///
/// Trial `i` uses the same signal and the same leading rows for every `m`.
pub fn init_energy_experiment(
    n: usize,
    k: usize,
    m_list: &[usize],
    trials: usize,
    seed: RngSeed,
) -> Result<Vec<InitEnergyRow>> {
    m_list
        .iter()
        .map(|&m| {
            let ratios = run_trials(trials, |trial| {
                let s = seed.derive(trial as u64);
                let x = gen_sparse_signal(n, k, SignalFlavor::Gaussian, s.derive(0))?;
                let a = gen_gaussian_operator(m, n, s.derive(1))?;
                let y = observe(&a, &x)?;
                captured_energy(&x, &init_support(&a, &y, k)?)
            })?;
            let captures = ratios.iter().filter(|&&r| r > 0.9).count();
            Ok(InitEnergyRow {
                m,
                trials,
                captures,
                frequency: captures as f64 / trials.max(1) as f64,
                mean_ratio: ratios.iter().sum::<f64>() / trials.max(1) as f64,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpectationRow {
    pub column: usize,
    pub on_support: bool,
    pub monte_carlo: f64,
    pub expected: f64,
    pub relative_gap: f64,
}

/// Monte-Carlo mean of `y_i |a_ij|` against its closed form for every column.
///
/// Rows are streamed in blocks so `m` can be large without storing `A`.
pub fn verify_expectation(
    n: usize,
    k: usize,
    m: usize,
    seed: RngSeed,
) -> Result<Vec<ExpectationRow>> {
    if m == 0 {
        return Err(SprError::Argument("m must be positive".into()));
    }
    const BLOCK: usize = 4096;
    let x = gen_sparse_signal(n, k, SignalFlavor::Gaussian, seed.derive(0))?;
    let blocks = m.div_ceil(BLOCK);
    let partials = run_trials(blocks, |b| {
        let rows = BLOCK.min(m - b * BLOCK);
        let mut rng = seed.derive(1).derive(b as u64).rng();
        let mut acc = vec![0.0; n];
        let mut row = vec![Complex64::new(0.0, 0.0); n];
        for _ in 0..rows {
            row.iter_mut().for_each(|a| *a = complex_normal(&mut rng));
            let w: Complex64 = row.iter().zip(x.iter()).map(|(a, xj)| a.conj() * xj).sum();
            let yi = w.norm();
            for (s, a) in acc.iter_mut().zip(&row) {
                *s += yi * a.norm();
            }
        }
        Ok(acc)
    })?;
    let mut totals = vec![0.0; n];
    for p in &partials {
        for (t, v) in totals.iter_mut().zip(p) {
            *t += v;
        }
    }
    (0..n)
        .map(|j| {
            let mc = totals[j] / m as f64;
            let expected = expected_score(&x, j)?;
            Ok(ExpectationRow {
                column: j,
                on_support: x[j] != Complex64::new(0.0, 0.0),
                monte_carlo: mc,
                expected,
                relative_gap: (mc - expected).abs() / expected,
            })
        })
        .collect()
}
