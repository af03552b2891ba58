//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! By default the process exits successfully even when a criterion fails, so
//! that shortfalls are reported without breaking the workspace build; set
//! `SPR_ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero exit.

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use subspace_pr::analysis::{geometry_experiment, stationary_classes, verify_expectation};
use subspace_pr::imaging::{recover_image, synthetic_image};
use subspace_pr::objective::{
    expected_grad1, expected_hessian, expected_loss, grad1, grad1_fourier2d, hessian, loss,
    wirtinger_gradient,
};
use subspace_pr::sampling::complex_normal;
use subspace_pr::spectral_init::{hypergeometric_f, init_support};
use subspace_pr::{
    captured_energy, gen_gaussian_operator, gen_sparse_signal, observe, phase_dist, restrict,
    run_spr, top_k_by, ComplexSignal, Fourier2DOperator, GaussianOperator, RngSeed,
    SignalFlavor, SprConfig, SupportSet,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_signal(n: usize, seed: RngSeed) -> ComplexSignal {
    let mut rng = seed.rng();
    ComplexSignal::new((0..n).map(|_| complex_normal(&mut rng)).collect()).unwrap()
}

fn spr_binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spr"))
}

// 1. Phase transition through the CLI: frequency >= 0.95 for m >= 340 and
// <= 0.05 at m = 100.
fn criterion_1() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pt.csv");
    let status = spr_binary()
        .args(["phase-transition", "--n", "1000", "--k", "10", "--m-start", "100", "--m-end", "400"])
        .args(["--m-step", "10", "--trials", "100", "--seed", "0", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    if !status.success() {
        return outcome(false, format!("phase-transition exited with {status}"));
    }
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<(usize, f64)> = text
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    let low = rows.iter().find(|r| r.0 == 100).map(|r| r.1).unwrap_or(f64::NAN);
    let high: Vec<&(usize, f64)> = rows.iter().filter(|r| r.0 >= 340).collect();
    let worst_high = high.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let curve: Vec<String> = rows.iter().map(|(m, f)| format!("{m}:{f:.2}")).collect();
    outcome(
        rows.len() == 31 && low <= 0.05 && worst_high >= 0.95,
        format!(
            "rows={} freq(m=100)={low:.2} min freq(m>=340)={worst_high:.2} curve=[{}]",
            rows.len(),
            curve.join(" ")
        ),
    )
}

// 2. Single instance n=1000, k=10, m=400 recovered to NMSE < 1e-6 in <= 5 s.
fn criterion_2() -> Outcome {
    let seed = RngSeed(7);
    let a = gen_gaussian_operator(400, 1000, seed.derive(1)).unwrap();
    let x = gen_sparse_signal(1000, 10, SignalFlavor::Gaussian, seed.derive(2)).unwrap();
    let y = observe(&a, &x).unwrap();
    let mut cfg = SprConfig::new(10);
    cfg.solver.seed = seed.derive(3);
    let started = Instant::now();
    let r = run_spr(&a, &y, &cfg, Some(&x)).unwrap();
    let elapsed = started.elapsed();
    let err = r.nmse.unwrap();
    outcome(
        err < 1e-6 && r.iterations <= 50 && elapsed <= Duration::from_secs(5),
        format!("nmse={err:.3e} iterations={} elapsed={elapsed:?}", r.iterations),
    )
}

/// `d/dt f(z + tδ)` and `d²/dt²` at 0 from five-point stencils; both are exact
/// for quartic polynomials up to rounding.
fn directional_derivatives(f: &dyn Fn(&ComplexSignal) -> f64, z: &ComplexSignal, d: &ComplexSignal, h: f64) -> (f64, f64) {
    let at = |t: f64| {
        let p: Vec<Complex64> = z.iter().zip(d.iter()).map(|(a, b)| a + b * t).collect();
        f(&ComplexSignal::new(p).unwrap())
    };
    let (m2, m1, f0, p1, p2) = (at(-2.0 * h), at(-h), at(0.0), at(h), at(2.0 * h));
    let first = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
    let second = (-m2 + 16.0 * m1 - 30.0 * f0 + 16.0 * p1 - p2) / (12.0 * h * h);
    (first, second)
}

// 3. Wirtinger gradient and Hessian against finite differences.
fn criterion_3() -> Outcome {
    let mut worst_grad: f64 = 0.0;
    let mut worst_hess: f64 = 0.0;
    let mut worst_conj: f64 = 0.0;
    for inst in 0..50u64 {
        let seed = RngSeed(3000 + inst);
        let mut rng = seed.derive(9).rng();
        let n = rng.random_range(2..=40);
        let m = rng.random_range(n..=400);
        let a = gen_gaussian_operator(m, n, seed.derive(0)).unwrap();
        let x = random_signal(n, seed.derive(1));
        let y = observe(&a, &x).unwrap();
        let z = random_signal(n, seed.derive(2));
        let f = |p: &ComplexSignal| loss(&a, &y, p).unwrap();
        let g = grad1(&a, &y, &z).unwrap();
        let h = 1e-3 * z.norm();
        // ∇₁f_j = ½(∂f/∂u_j + i ∂f/∂v_j)
        let mut fd = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = vec![c(0.0, 0.0); n];
            e[j] = c(1.0, 0.0);
            let du = directional_derivatives(&f, &z, &ComplexSignal::new(e.clone()).unwrap(), h).0;
            e[j] = c(0.0, 1.0);
            let dv = directional_derivatives(&f, &z, &ComplexSignal::new(e).unwrap(), h).0;
            fd.push(c(0.5 * du, 0.5 * dv));
        }
        let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        worst_grad = worst_grad.max(diff / g.norm());

        let hess = hessian(&a, &y, &z).unwrap();
        for dir in 0..3u64 {
            let d = random_signal(n, seed.derive(10 + dir));
            let q = hess.quadratic_form(&d).unwrap();
            let (_, second) = directional_derivatives(&f, &z, &d, 1e-2 * z.norm() / d.norm());
            worst_hess = worst_hess.max((q - second).abs() / second.abs().max(q.abs()));
        }

        let wg = wirtinger_gradient(&a, &y, &z).unwrap();
        let conj_err = wg
            .d_z
            .iter()
            .zip(wg.d_zbar.iter())
            .map(|(u, v)| (u.conj() - v).norm())
            .fold(0.0, f64::max)
            / wg.d_z.iter().map(|u| u.norm()).fold(0.0, f64::max);
        worst_conj = worst_conj.max(conj_err);
    }
    outcome(
        worst_grad < 1e-6 && worst_hess < 1e-4 && worst_conj <= 1e-14,
        format!("max rel grad err={worst_grad:.2e} max rel hessian err={worst_hess:.2e} max conj err={worst_conj:.2e}"),
    )
}

fn hermitian_spectral_norm(entries: &[Complex64], dim: usize) -> f64 {
    let mat = DMatrix::from_row_slice(dim, dim, entries);
    mat.symmetric_eigenvalues().iter().map(|v| v.abs()).fold(0.0, f64::max)
}

// 4. Empirical loss, gradient and Hessian from m = 1e5 fresh rows versus the
// closed-form expectations.
fn criterion_4() -> Outcome {
    let started = Instant::now();
    let n = 6;
    let m = 100_000;
    let mut worst = [0.0f64; 3];
    for pair in 0..5u64 {
        let seed = RngSeed(4000 + pair);
        let x = random_signal(n, seed.derive(0));
        let z = random_signal(n, seed.derive(1));
        let a = gen_gaussian_operator(m, n, seed.derive(2)).unwrap();
        let y = observe(&a, &x).unwrap();
        let lf = loss(&a, &y, &z).unwrap();
        let le = expected_loss(&x, &z).unwrap();
        worst[0] = worst[0].max((lf - le).abs() / le.abs());
        let g = grad1(&a, &y, &z).unwrap();
        let ge = expected_grad1(&x, &z).unwrap();
        let gd: f64 = g.iter().zip(ge.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        worst[1] = worst[1].max(gd / ge.norm());
        let h = hessian(&a, &y, &z).unwrap().assembled();
        let he = expected_hessian(&x, &z).unwrap().assembled();
        let diff: Vec<Complex64> = h.iter().zip(&he).map(|(a, b)| a - b).collect();
        worst[2] = worst[2].max(hermitian_spectral_norm(&diff, 2 * n) / hermitian_spectral_norm(&he, 2 * n));
    }
    let elapsed = started.elapsed();
    outcome(
        worst.iter().all(|&w| w < 0.05) && elapsed <= Duration::from_secs(60),
        format!(
            "rel err loss={:.2e} gradient={:.2e} hessian(spectral)={:.2e} elapsed={elapsed:?}",
            worst[0], worst[1], worst[2]
        ),
    )
}

// 5. Stationary points of the expected loss on random subspaces.
fn criterion_5() -> Outcome {
    let mut worst_res: f64 = 0.0;
    let mut worst_curv: f64 = 0.0;
    let mut signs_ok = true;
    for inst in 0..20u64 {
        let seed = RngSeed(5000 + inst);
        let mut rng = seed.derive(3).rng();
        let n = 16;
        let x = gen_sparse_signal(n, rng.random_range(2..=6), SignalFlavor::Gaussian, seed.derive(0)).unwrap();
        let supp = x.support();
        let size = rng.random_range(2..=8);
        let mut idx = vec![supp[rng.random_range(0..supp.len())]];
        while idx.len() < size {
            let j = rng.random_range(0..n);
            if !idx.contains(&j) {
                idx.push(j);
            }
        }
        let t = SupportSet::new(idx, n).unwrap();
        let r = stationary_classes(&x, &t).unwrap();
        if r.checks.len() != 3 {
            return outcome(false, format!("instance {inst}: saddle class missing"));
        }
        worst_res = r.checks.iter().map(|(_, v)| *v).fold(worst_res, f64::max);
        let get = |name: &str| r.curvature.iter().find(|(l, _)| l == name).unwrap().1;
        let xt2 = restrict(&x, &t).unwrap().norm_sqr();
        let along_xt = get("saddle_along_x_T");
        worst_curv = worst_curv.max((along_xt + 2.0 * xt2 * xt2).abs() / (xt2 * xt2));
        let s2 = r.saddle.as_ref().unwrap().norm_sqr();
        worst_curv = worst_curv.max((get("saddle_along_z") - 8.0 * s2 * s2).abs() / (s2 * s2));
        signs_ok &= along_xt < 0.0 && get("saddle_along_z") > 0.0 && get("zero_along_x_T") < 0.0;
        signs_ok &= get("omega_x_T_along_saddle_direction") >= -1e-12 * xt2 * xt2;
    }
    outcome(
        worst_res < 1e-10 && worst_curv < 1e-10 && signs_ok,
        format!("max residual={worst_res:.2e} max curvature err={worst_curv:.2e} signs_ok={signs_ok}"),
    )
}

// 6. Monte-Carlo spectral score versus its closed form, and F(−½,−½;1;1) = 4/π.
fn criterion_6() -> Outcome {
    let rows = verify_expectation(10, 3, 1_000_000, RngSeed(1)).unwrap();
    let worst = rows.iter().map(|r| r.relative_gap).fold(0.0, f64::max);
    let both = rows.iter().any(|r| r.on_support) && rows.iter().any(|r| !r.on_support);
    let f1 = hypergeometric_f(-0.5, -0.5, 1.0, 1.0).unwrap();
    let gauss_err = (f1 - 4.0 / PI).abs();
    outcome(
        worst < 0.005 && both && gauss_err < 1e-12,
        format!("max relative gap={worst:.2e} |F(1) - 4/pi|={gauss_err:.1e}"),
    )
}

// 7. Spectral support captures 90% of the energy in >= 90% of 100 trials.
fn criterion_7() -> Outcome {
    let (n, k, m) = (1000, 10, 600);
    let mut captured = 0;
    let mut ratios = Vec::new();
    for t in 0..100u64 {
        let s = RngSeed(7000).derive(t);
        let x = gen_sparse_signal(n, k, SignalFlavor::Gaussian, s.derive(0)).unwrap();
        let a = gen_gaussian_operator(m, n, s.derive(1)).unwrap();
        let y = observe(&a, &x).unwrap();
        let r = captured_energy(&x, &init_support(&a, &y, k).unwrap()).unwrap();
        ratios.push(r);
        if r > 0.9 {
            captured += 1;
        }
    }
    let freq = captured as f64 / 100.0;
    ratios.sort_by(f64::total_cmp);
    outcome(
        freq >= 0.9,
        format!("capture frequency={freq:.2} median ratio={:.3}", ratios[50]),
    )
}

// 8. Clustering of subspace minimisers around the expected optimum.
fn criterion_8() -> Outcome {
    let partial = geometry_experiment(2000, 4000, 10, 5, 25, RngSeed(8000)).unwrap();
    let full = geometry_experiment(2000, 4000, 10, 10, 25, RngSeed(8001)).unwrap();
    outcome(
        partial.median < 0.05 && full.median < 1e-6,
        format!("median overlap=5: {:.3e}, median full overlap: {:.3e}", partial.median, full.median),
    )
}

fn dense_dft(h: usize, w: usize) -> GaussianOperator {
    // a_i* z = Σ_p z_p e^{−2πi(k_r p_r/h + k_c p_c/w)}, so a_i has the conjugate phases
    let rows: Vec<Vec<Complex64>> = (0..h * w)
        .map(|i| {
            let (kr, kc) = (i / w, i % w);
            (0..h * w)
                .map(|p| {
                    let (pr, pc) = (p / w, p % w);
                    let phase = 2.0 * PI * ((kr * pr) as f64 / h as f64 + (kc * pc) as f64 / w as f64);
                    Complex64::from_polar(1.0, phase)
                })
                .collect()
        })
        .collect();
    GaussianOperator::from_rows(&rows).unwrap()
}

// 9. FFT gradient against a dense DFT operator, and 32×32 image recovery.
fn criterion_9() -> Outcome {
    let mut worst: f64 = 0.0;
    for (side, s) in [(4usize, 1u64), (8, 2)] {
        let op = Fourier2DOperator::new(side, side).unwrap();
        let dense = dense_dft(side, side);
        let x = random_signal(side * side, RngSeed(9000 + s));
        let y = observe(&op, &x).unwrap();
        let z = random_signal(side * side, RngSeed(9100 + s));
        let fast = grad1_fourier2d(&op, &y, &z).unwrap();
        let slow = grad1(&dense, &y, &z).unwrap();
        let d: f64 = fast.iter().zip(slow.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(d / slow.norm());
    }
    let op = Fourier2DOperator::new(32, 32).unwrap();
    let x = synthetic_image(32, 16, RngSeed(9200)).unwrap();
    let y = observe(&op, &x).unwrap();
    let mut cfg = SprConfig::new(16);
    cfg.solver.seed = RngSeed(9201);
    let img = recover_image(&op, &y, &cfg, 20, Some(&x)).unwrap();
    outcome(
        worst < 1e-10 && img.residual_loss < 1e-10,
        format!(
            "max rel gradient gap={worst:.2e} residual loss={:.2e} magnitude err={:.2e} attempts={}",
            img.residual_loss, img.magnitude_error, img.attempts
        ),
    )
}

/// `min_φ ‖z − x e^{jφ}‖` by a grid over `[0, 2π)` refined with golden-section search.
fn grid_phase_dist(z: &ComplexSignal, x: &ComplexSignal) -> f64 {
    let dist = |phi: f64| -> f64 {
        let r = Complex64::from_polar(1.0, phi);
        z.iter().zip(x.iter()).map(|(a, b)| (a - b * r).norm_sqr()).sum::<f64>()
    };
    let steps = 720;
    let h = 2.0 * PI / steps as f64;
    let best = (0..steps).map(|i| i as f64 * h).min_by(|a, b| dist(*a).total_cmp(&dist(*b))).unwrap();
    let (mut lo, mut hi) = (best - h, best + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if dist(a) < dist(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    dist(0.5 * (lo + hi)).max(0.0).sqrt()
}

// 10. phase_dist and top-k against brute-force oracles; deterministic outputs.
fn criterion_10() -> Outcome {
    let mut worst_dist: f64 = 0.0;
    let mut topk_ok = true;
    for t in 0..50u64 {
        let s = RngSeed(10_000 + t);
        let x = random_signal(12, s.derive(0));
        let z = random_signal(12, s.derive(1));
        worst_dist = worst_dist.max((phase_dist(&z, &x).unwrap() - grid_phase_dist(&z, &x)).abs());
        let mut rng = s.derive(2).rng();
        // coarse values force ties
        let scores: Vec<f64> = (0..40).map(|_| rng.random_range(0..8) as f64).collect();
        for k in [1, 5, 17, 40] {
            let mut order: Vec<usize> = (0..40).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            let want = SupportSet::new(order[..k].to_vec(), 40).unwrap();
            topk_ok &= top_k_by(&scores, k).unwrap() == want;
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        let ok = spr_binary()
            .args(["phase-transition", "--n", "200", "--k", "4", "--m-start", "40", "--m-end", "80"])
            .args(["--m-step", "20", "--trials", "6", "--seed", "3", "--out"])
            .arg(&p)
            .status()
            .unwrap()
            .success();
        (ok, std::fs::read(&p).unwrap_or_default())
    };
    let (ok1, csv1) = run("a.csv");
    let (ok2, csv2) = run("b.csv");
    let bytes_equal = ok1 && ok2 && !csv1.is_empty() && csv1 == csv2;
    let a = gen_gaussian_operator(150, 300, RngSeed(11)).unwrap();
    let x = gen_sparse_signal(300, 5, SignalFlavor::Gaussian, RngSeed(12)).unwrap();
    let y = observe(&a, &x).unwrap();
    let cfg = SprConfig::new(5);
    let r1 = run_spr(&a, &y, &cfg, Some(&x)).unwrap();
    let r2 = run_spr(&a, &y, &cfg, Some(&x)).unwrap();
    let same_run = r1.estimate == r2.estimate && r1.loss_trace == r2.loss_trace;
    outcome(
        worst_dist < 1e-8 && topk_ok && bytes_equal && same_run,
        format!("max phase_dist gap={worst_dist:.1e} top_k_ok={topk_ok} csv_identical={bytes_equal} runs_identical={same_run}"),
    )
}

fn main() {
    // libtest flags such as --nocapture or a name filter are accepted and ignored
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("phase transition", criterion_1),
        ("exact recovery instance", criterion_2),
        ("Wirtinger derivatives", criterion_3),
        ("expected forms", criterion_4),
        ("stationary classes", criterion_5),
        ("spectral expectation", criterion_6),
        ("initial energy capture", criterion_7),
        ("geometry clustering", criterion_8),
        ("FFT gradient and image", criterion_9),
        ("oracle equivalences", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} [{}] {name}: {} ({:.1}s)",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            started.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 && std::env::var("SPR_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
