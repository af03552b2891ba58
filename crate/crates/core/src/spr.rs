//! Alternating matching / estimation / pruning, plus the single-pass variant
//! that draws every stage from its own block of measurements.

use std::time::Instant;

use crate::error::{check_dim, Result, SprError};
use crate::objective::{grad1, loss};
use crate::sampling::{GaussianOperator, Sampling};
use crate::signal::{
    nmse, phase_dist, restrict, top_k_indices, ComplexSignal, Observations, RecoveryReport,
    SupportSet, DEFAULT_SUCCESS_THRESHOLD,
};
use crate::spectral_init::init_support;
use crate::subspace_solver::{default_z0, solve_on_support, SolverConfig};

/// Relative size below which a warm start is treated as zero.
const WARM_START_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SprConfig {
    pub k: usize,
    /// Loss tolerance; `None` means `1e-14 · (mean y²)²`.
    pub delta: Option<f64>,
    pub t_max: usize,
    pub solver: SolverConfig,
    pub success_threshold: f64,
}

impl SprConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            delta: None,
            t_max: 50,
            solver: SolverConfig::default(),
            success_threshold: DEFAULT_SUCCESS_THRESHOLD,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k > n {
            return Err(SprError::Argument(format!(
                "sparsity must satisfy 1 <= k <= n, got k = {}, n = {n}",
                self.k
            )));
        }
        if self.t_max == 0 {
            return Err(SprError::Argument("t_max must be >= 1".into()));
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0) {
                return Err(SprError::Argument(format!("delta must be >= 0, got {d}")));
            }
        }
        self.solver.validate()
    }

    fn delta_for(&self, y: &Observations) -> f64 {
        self.delta.unwrap_or_else(|| {
            let s = y.mean_square();
            1e-14 * s * s
        })
    }
}

/// Indices of the `k` largest entries of `|∇₁f(z)|`.
pub fn matching_indices(
    op: &dyn Sampling,
    y: &Observations,
    z: &ComplexSignal,
    k: usize,
) -> Result<SupportSet> {
    top_k_indices(&grad1(op, y, z)?, k)
}

struct Tracker {
    best: ComplexSignal,
    best_loss: f64,
    trace: Vec<f64>,
}

impl Tracker {
    fn new(x: &ComplexSignal, f: f64) -> Self {
        Self {
            best: x.clone(),
            best_loss: f,
            trace: vec![f],
        }
    }

    fn record(&mut self, x: &ComplexSignal, f: f64) {
        self.trace.push(f);
        if f < self.best_loss {
            self.best_loss = f;
            self.best = x.clone();
        }
    }
}

struct Histories {
    supports: Vec<SupportSet>,
    matched: Vec<SupportSet>,
    iterations: usize,
}

fn finish(
    tracker: Tracker,
    hist: Histories,
    x_truth: Option<&ComplexSignal>,
    threshold: f64,
    started: Instant,
    diagnostics: Option<String>,
) -> Result<RecoveryReport> {
    let (err, dist) = match x_truth {
        Some(x) => (Some(nmse(&tracker.best, x)?), Some(phase_dist(&tracker.best, x)?)),
        None => (None, None),
    };
    let success = diagnostics.is_none() && err.is_some_and(|e| e < threshold);
    Ok(RecoveryReport {
        estimate: tracker.best,
        nmse: err,
        dist,
        final_loss: tracker.best_loss,
        loss_trace: tracker.trace,
        iterations: hist.iterations,
        success,
        support_history: hist.supports,
        matched_history: hist.matched,
        elapsed: started.elapsed(),
        diagnostics,
    })
}

fn check_truth(op: &dyn Sampling, x_truth: Option<&ComplexSignal>) -> Result<()> {
    if let Some(x) = x_truth {
        check_dim(op.dim(), x.len())?;
    }
    Ok(())
}

/// Runs the full alternating recovery.
///
/// A numeric failure inside a solve ends the run early; the report then keeps
/// the best finite iterate, `success = false` and a diagnostic message.
pub fn run_spr(
    op: &dyn Sampling,
    y: &Observations,
    cfg: &SprConfig,
    x_truth: Option<&ComplexSignal>,
) -> Result<RecoveryReport> {
    let started = Instant::now();
    check_dim(op.num_samples(), y.len())?;
    check_truth(op, x_truth)?;
    cfg.validate(op.dim())?;
    let delta = cfg.delta_for(y);
    let warm_floor = WARM_START_FLOOR * y.mean_square().sqrt();
    let seed = cfg.solver.seed;

    let mut support = init_support(op, y, cfg.k)?;
    let mut hist = Histories {
        supports: vec![support.clone()],
        matched: Vec::new(),
        iterations: 0,
    };
    let first = match solve_on_support(op, y, &support, None, &cfg.solver) {
        Ok(out) => out,
        Err(SprError::NumericFailure { iteration, last_finite }) => {
            let f = loss(op, y, &last_finite).unwrap_or(f64::INFINITY);
            let tracker = Tracker::new(&last_finite, f);
            let msg = format!("numeric failure in initial estimation at iteration {iteration}");
            return finish(tracker, hist, x_truth, cfg.success_threshold, started, Some(msg));
        }
        Err(e) => return Err(e),
    };
    let mut x = first.minimizer;
    let mut f = first.final_loss;
    let mut tracker = Tracker::new(&x, f);
    let mut diagnostics = None;

    for t in 1..=cfg.t_max {
        if f < delta {
            break;
        }
        hist.iterations = t;
        let matched = support.union(&matching_indices(op, y, &x, cfg.k)?)?;
        debug_assert!(matched.len() <= 2 * cfg.k);
        let solver_cfg = SolverConfig {
            seed: seed.derive(t as u64),
            ..cfg.solver.clone()
        };
        let warm = restrict(&x, &matched)?;
        let warm = if warm.norm() < warm_floor {
            default_z0(op, y, &matched, solver_cfg.seed)?
        } else {
            warm
        };
        let out = match solve_on_support(op, y, &matched, Some(&warm), &solver_cfg) {
            Ok(out) => out,
            Err(SprError::NumericFailure { iteration, .. }) => {
                diagnostics = Some(format!(
                    "numeric failure in estimation step {t} at solver iteration {iteration}"
                ));
                hist.matched.push(matched);
                break;
            }
            Err(e) => return Err(e),
        };
        hist.matched.push(matched);
        support = top_k_indices(&out.minimizer, cfg.k)?;
        x = restrict(&out.minimizer, &support)?;
        f = loss(op, y, &x)?;
        hist.supports.push(support.clone());
        tracker.record(&x, f);
    }
    finish(tracker, hist, x_truth, cfg.success_threshold, started, diagnostics)
}

/// Splits `0..m` into four contiguous, nonempty blocks sized by `fractions`.
pub fn partition_rows(m: usize, fractions: [f64; 4]) -> Result<[std::ops::Range<usize>; 4]> {
    if fractions.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(SprError::Argument(format!(
            "partition fractions must be positive, got {fractions:?}"
        )));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(SprError::Argument(format!(
            "partition fractions must sum to 1, got {total}"
        )));
    }
    let mut bounds = [0usize; 5];
    let mut acc = 0.0;
    for (i, p) in fractions.iter().enumerate() {
        acc += p;
        bounds[i + 1] = if i == 3 { m } else { (acc * m as f64).round() as usize };
    }
    let ranges = [0, 1, 2, 3].map(|i| bounds[i]..bounds[i + 1]);
    if let Some(i) = ranges.iter().position(|r| r.is_empty()) {
        return Err(SprError::Argument(format!(
            "partition block {} is empty for m = {m}",
            i + 1
        )));
    }
    Ok(ranges)
}

/// One pass with independent measurement blocks: support initialisation on
/// the first, estimation on the second, matching on the third and the final
/// estimate on the fourth. No pruning follows the final estimate.
///
/// Each stage's stopping loss is evaluated on that stage's estimation block.
pub fn run_spr_partitioned(
    a: &GaussianOperator,
    y: &Observations,
    cfg: &SprConfig,
    fractions: [f64; 4],
    x_truth: Option<&ComplexSignal>,
) -> Result<RecoveryReport> {
    let started = Instant::now();
    check_dim(a.rows(), y.len())?;
    check_truth(a, x_truth)?;
    cfg.validate(a.cols())?;
    let [r1, r2, r3, r4] = partition_rows(a.rows(), fractions)?;
    let block = |r: std::ops::Range<usize>| -> Result<(GaussianOperator, Observations)> {
        Ok((a.row_block(r.clone())?, y.select(r)))
    };
    let (a1, y1) = block(r1)?;
    let (a2, y2) = block(r2)?;
    let (a3, y3) = block(r3)?;
    let (a4, y4) = block(r4)?;

    let s0 = init_support(&a1, &y1, cfg.k)?;
    let mut hist = Histories {
        supports: vec![s0.clone()],
        matched: Vec::new(),
        iterations: 0,
    };
    let numeric = |stage: &str, iteration: usize| {
        format!("numeric failure in {stage} at solver iteration {iteration}")
    };
    let x0 = match solve_on_support(&a2, &y2, &s0, None, &cfg.solver) {
        Ok(out) => out,
        Err(SprError::NumericFailure { iteration, last_finite }) => {
            let f = loss(&a2, &y2, &last_finite).unwrap_or(f64::INFINITY);
            let msg = numeric("first estimation", iteration);
            return finish(Tracker::new(&last_finite, f), hist, x_truth, cfg.success_threshold, started, Some(msg));
        }
        Err(e) => return Err(e),
    };
    let mut tracker = Tracker::new(&x0.minimizer, x0.final_loss);
    if x0.final_loss < cfg.delta_for(&y2) {
        return finish(tracker, hist, x_truth, cfg.success_threshold, started, None);
    }

    hist.iterations = 1;
    let s1 = s0.union(&matching_indices(&a3, &y3, &x0.minimizer, cfg.k)?)?;
    hist.matched.push(s1.clone());
    let warm = restrict(&x0.minimizer, &s1)?;
    let solver_cfg = SolverConfig {
        seed: cfg.solver.seed.derive(1),
        ..cfg.solver.clone()
    };
    let warm = if warm.norm() < WARM_START_FLOOR * y4.mean_square().sqrt() {
        default_z0(&a4, &y4, &s1, solver_cfg.seed)?
    } else {
        warm
    };
    let mut diagnostics = None;
    match solve_on_support(&a4, &y4, &s1, Some(&warm), &solver_cfg) {
        Ok(out) => {
            // losses on different blocks are not comparable: the final stage wins
            tracker.trace.push(out.final_loss);
            tracker.best = out.minimizer;
            tracker.best_loss = out.final_loss;
        }
        Err(SprError::NumericFailure { iteration, .. }) => {
            diagnostics = Some(numeric("final estimation", iteration));
        }
        Err(e) => return Err(e),
    }
    finish(tracker, hist, x_truth, cfg.success_threshold, started, diagnostics)
}
