//! Estimation on a fixed support: minimise `f(z)` over `supp(z) ⊆ S`.
//!
//! Barzilai–Borwein gradient descent in the conjugate Wirtinger coordinate,
//! globalised with a nonmonotone Armijo test. All work happens in the
//! compressed coordinates of `S`, so entries outside the support stay exactly
//! zero.

use std::collections::VecDeque;

use num_complex::Complex64;

use crate::error::{check_dim, Result, SprError};
use crate::objective::evaluate;
use crate::sampling::{complex_normal, RngSeed, Sampling};
use crate::signal::{ComplexSignal, Observations, SupportSet};
use crate::summation::{inner, norm_sqr};

/// Losses below `LOSS_FLOOR · λ̂²` are indistinguishable from an exact fit.
const LOSS_FLOOR: f64 = 1e-28;
const ARMIJO_C: f64 = 1e-4;
const NONMONOTONE_WINDOW: usize = 10;
const MAX_BACKTRACKS: usize = 60;

/// Step-size knobs are expressed in units of `1/λ̂`, where `λ̂ = (1/m) Σ y_i²`
/// estimates `‖x‖²`; this keeps them invariant to the signal scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once `‖∇₁f‖ ≤ grad_tol · λ̂^{3/2}` on the support.
    pub grad_tol: f64,
    pub initial_step: f64,
    pub step_min: f64,
    pub step_max: f64,
    /// Fresh random starts allowed after an unconverged attempt.
    pub restarts: usize,
    pub seed: RngSeed,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-9,
            initial_step: 0.1,
            step_min: 1e-6,
            step_max: 1e3,
            restarts: 1,
            seed: RngSeed(0),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(SprError::Argument("max_iters must be >= 1".into()));
        }
        if !(self.step_min > 0.0 && self.step_min <= self.step_max) {
            return Err(SprError::Argument(format!(
                "step bounds must satisfy 0 < min <= max, got ({}, {})",
                self.step_min, self.step_max
            )));
        }
        if !(self.initial_step > 0.0 && self.grad_tol >= 0.0) {
            return Err(SprError::Argument(
                "initial_step must be positive and grad_tol nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolverOutcome {
    pub minimizer: ComplexSignal,
    pub final_loss: f64,
    pub iters_used: usize,
    pub converged: bool,
}

/// Random standard complex Gaussian start on `support`, scaled so that
/// `‖z0‖² = (1/m) Σ y_i²`.
pub fn default_z0(
    op: &dyn Sampling,
    y: &Observations,
    support: &SupportSet,
    seed: RngSeed,
) -> Result<ComplexSignal> {
    check_dim(op.dim(), support.ambient_dim())?;
    check_dim(op.num_samples(), y.len())?;
    if support.is_empty() {
        return Err(SprError::Argument("support must not be empty".into()));
    }
    let compressed = random_start(support.len(), y.mean_square(), seed);
    Ok(scatter(&compressed, support))
}

fn random_start(len: usize, energy: f64, seed: RngSeed) -> Vec<Complex64> {
    let mut rng = seed.rng();
    let mut v: Vec<Complex64> = (0..len).map(|_| complex_normal(&mut rng)).collect();
    let nrm = norm_sqr(&v).sqrt();
    let scale = if nrm > 0.0 { energy.sqrt() / nrm } else { 0.0 };
    v.iter_mut().for_each(|c| *c *= scale);
    v
}

fn scatter(compressed: &[Complex64], support: &SupportSet) -> ComplexSignal {
    let mut full = vec![Complex64::new(0.0, 0.0); support.ambient_dim()];
    for (&j, &v) in support.indices().iter().zip(compressed) {
        full[j] = v;
    }
    ComplexSignal::from_vec_unchecked(full)
}

/// Minimises `f` over signals supported in `support`.
///
/// `z0` must already vanish outside `support`; without it the start is
/// [`default_z0`] with the configured seed.
pub fn solve_on_support(
    op: &dyn Sampling,
    y: &Observations,
    support: &SupportSet,
    z0: Option<&ComplexSignal>,
    cfg: &SolverConfig,
) -> Result<SolverOutcome> {
    cfg.validate()?;
    check_dim(op.dim(), support.ambient_dim())?;
    check_dim(op.num_samples(), y.len())?;
    if support.is_empty() {
        return Err(SprError::Argument("support must not be empty".into()));
    }
    let scale = y.mean_square();
    let start: Vec<Complex64> = match z0 {
        Some(z) => {
            check_dim(op.dim(), z.len())?;
            if let Some(j) = z.support().into_iter().find(|&j| !support.contains(j)) {
                return Err(SprError::Precondition(format!(
                    "start point has a nonzero entry at {j}, outside the support"
                )));
            }
            support.indices().iter().map(|&j| z[j]).collect()
        }
        None => random_start(support.len(), scale, cfg.seed),
    };
    if scale == 0.0 {
        return Ok(SolverOutcome {
            minimizer: ComplexSignal::zeros(op.dim()),
            final_loss: 0.0,
            iters_used: 0,
            converged: true,
        });
    }

    let sub = op.restrict(support);
    let ysq = y.squares();
    let mut best: Option<Attempt> = None;
    let mut iters = 0;
    let mut next_start = Some(start);
    let mut attempt = 0;
    while let Some(z) = next_start.take() {
        let run = descend(sub.as_ref(), &ysq, z, scale, cfg)?;
        iters += run.iters;
        let converged = run.converged;
        if best.as_ref().is_none_or(|b| run.loss < b.loss) {
            best = Some(run);
        }
        if !converged && attempt < cfg.restarts {
            attempt += 1;
            next_start = Some(random_start(
                support.len(),
                scale,
                cfg.seed.derive(attempt as u64),
            ));
        }
    }
    let best = best.expect("at least one attempt runs");
    Ok(SolverOutcome {
        minimizer: scatter(&best.z, support),
        final_loss: best.loss,
        iters_used: iters,
        converged: best.converged,
    })
}

struct Attempt {
    z: Vec<Complex64>,
    loss: f64,
    iters: usize,
    converged: bool,
}

fn descend(
    op: &dyn Sampling,
    ysq: &[f64],
    mut z: Vec<Complex64>,
    scale: f64,
    cfg: &SolverConfig,
) -> Result<Attempt> {
    let (mut loss, g) = evaluate(op, ysq, &z, true);
    let mut g = g.expect("gradient requested");
    if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(SprError::NumericFailure {
            iteration: 0,
            last_finite: ComplexSignal::from_vec_unchecked(z),
        });
    }
    let grad_stop = cfg.grad_tol * scale.powf(1.5);
    let loss_stop = LOSS_FLOOR * scale * scale;
    let (step_min, step_max) = (cfg.step_min / scale, cfg.step_max / scale);
    let mut step = (cfg.initial_step / scale).clamp(step_min, step_max);
    let mut history: VecDeque<f64> = VecDeque::with_capacity(NONMONOTONE_WINDOW);
    history.push_back(loss);

    let mut best_z = z.clone();
    let mut best_loss = loss;
    let mut converged = false;
    let mut iter = 0;
    while iter < cfg.max_iters {
        let gnorm2 = norm_sqr(&g);
        if loss <= loss_stop || gnorm2.sqrt() <= grad_stop {
            converged = true;
            break;
        }
        iter += 1;
        let reference = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut trial_step = step;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<Complex64> = z.iter().zip(&g).map(|(zi, gi)| zi - gi * trial_step).collect();
            let (trial_loss, _) = evaluate(op, ysq, &trial, false);
            // directional derivative of f along −g is −2‖g‖²
            if trial_loss.is_finite() && trial_loss <= reference - ARMIJO_C * trial_step * 2.0 * gnorm2 {
                accepted = Some((trial, trial_loss));
                break;
            }
            trial_step *= 0.5;
        }
        let Some((z_new, loss_new)) = accepted else {
            // no decrease at any step length: numerically stationary
            break;
        };
        let (_, g_new) = evaluate(op, ysq, &z_new, true);
        let g_new = g_new.expect("gradient requested");
        if g_new.iter().any(|v| !v.is_finite()) {
            return Err(SprError::NumericFailure {
                iteration: iter,
                last_finite: ComplexSignal::from_vec_unchecked(best_z),
            });
        }
        let dz: Vec<Complex64> = z_new.iter().zip(&z).map(|(a, b)| a - b).collect();
        let dg: Vec<Complex64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let curvature = inner(&dz, &dg).re;
        step = if curvature > 0.0 {
            let bb = norm_sqr(&dz) / curvature;
            if (step_min..=step_max).contains(&bb) {
                bb
            } else {
                cfg.initial_step / scale
            }
        } else {
            cfg.initial_step / scale
        };
        z = z_new;
        g = g_new;
        loss = loss_new;
        if loss < best_loss {
            best_loss = loss;
            best_z.clone_from(&z);
        }
        if history.len() == NONMONOTONE_WINDOW {
            history.pop_front();
        }
        history.push_back(loss);
    }
    if !converged {
        let gnorm = norm_sqr(&g).sqrt();
        converged = loss <= loss_stop || gnorm <= grad_stop;
    }
    Ok(Attempt {
        z: best_z,
        loss: best_loss,
        iters: iter,
        converged,
    })
}
