use num_complex::Complex64;
use proptest::prelude::*;

use subspace_pr::objective::{grad1, grad1_fourier2d, loss};
use subspace_pr::sampling::complex_normal;
use subspace_pr::spectral_init::hypergeometric_f;
use subspace_pr::{
    captured_energy, gen_gaussian_operator, observe, phase_dist, restrict, top_k_indices,
    ComplexSignal, DftMode, Fourier2DOperator, RngSeed, Sampling, SupportSet,
};

fn signal(n: usize, seed: u64) -> ComplexSignal {
    let mut rng = RngSeed(seed).rng();
    ComplexSignal::new((0..n).map(|_| complex_normal(&mut rng)).collect()).unwrap()
}

fn max_gap(a: &ComplexSignal, b: &ComplexSignal) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max)
}

fn support_strategy(n: usize) -> impl Strategy<Value = SupportSet> {
    proptest::collection::btree_set(0..n, 0..=n)
        .prop_map(move |s| SupportSet::new(s.into_iter().collect(), n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phase_dist_is_symmetric_and_phase_blind(n in 1usize..20, s1 in any::<u64>(), s2 in any::<u64>(),
                                               a in 0.0..6.3f64, b in 0.0..6.3f64) {
        let x = signal(n, s1);
        let z = signal(n, s2);
        let d = phase_dist(&z, &x).unwrap();
        let scale = x.norm() + z.norm();
        prop_assert!((d - phase_dist(&x, &z).unwrap()).abs() <= 1e-12 * scale);
        let zr = z.scale(Complex64::from_polar(1.0, a));
        let xr = x.scale(Complex64::from_polar(1.0, b));
        prop_assert!((d - phase_dist(&zr, &xr).unwrap()).abs() <= 1e-12 * scale);
        prop_assert!(d <= (&z.norm() + x.norm()) * (1.0 + 1e-12));
    }

    #[test]
    fn restrict_is_idempotent(s in any::<u64>(), t in support_strategy(12)) {
        let z = signal(12, s);
        let once = restrict(&z, &t).unwrap();
        prop_assert_eq!(restrict(&once, &t).unwrap(), once.clone());
        prop_assert!(once.support().iter().all(|&j| t.contains(j)));
        let e = captured_energy(&z, &t).unwrap();
        prop_assert!((0.0..=1.0 + 1e-15).contains(&e));
    }

    #[test]
    fn union_is_commutative_and_bounded(a in support_strategy(15), b in support_strategy(15)) {
        let u = a.union(&b).unwrap();
        prop_assert_eq!(&u, &b.union(&a).unwrap());
        prop_assert!(u.len() <= a.len() + b.len());
        prop_assert!(u.is_superset_of(a.indices()) && u.is_superset_of(b.indices()));
        prop_assert_eq!(a.intersection_len(&b) + u.len(), a.len() + b.len());
    }

    #[test]
    fn top_k_follows_permutations(s in any::<u64>(), k in 1usize..16, perm_seed in any::<u64>()) {
        let n = 16;
        let v = signal(n, s);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = RngSeed(perm_seed).rng();
        rand::seq::SliceRandom::shuffle(&mut perm[..], &mut rng);
        // permuted[perm[j]] = v[j]
        let mut permuted = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            permuted[perm[j]] = v[j];
        }
        let picked = top_k_indices(&v, k).unwrap();
        let picked_p = top_k_indices(&ComplexSignal::new(permuted).unwrap(), k).unwrap();
        let mapped = SupportSet::new(picked.indices().iter().map(|&j| perm[j]).collect(), n).unwrap();
        prop_assert_eq!(mapped, picked_p);
    }

    #[test]
    fn observations_are_homogeneous(s in any::<u64>(), re in -3.0..3.0f64, im in -3.0..3.0f64) {
        let a = gen_gaussian_operator(25, 7, RngSeed(s)).unwrap();
        let x = signal(7, s.wrapping_add(1));
        let c = Complex64::new(re, im);
        let y = observe(&a, &x).unwrap();
        let yc = observe(&a, &x.scale(c)).unwrap();
        for (u, v) in y.as_slice().iter().zip(yc.as_slice()) {
            prop_assert!((v - c.norm() * u).abs() <= 1e-12 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn gradient_is_phase_equivariant(s in any::<u64>(), phi in 0.0..6.3f64) {
        let a = gen_gaussian_operator(30, 6, RngSeed(s)).unwrap();
        let y = observe(&a, &signal(6, s.wrapping_add(1))).unwrap();
        let z = signal(6, s.wrapping_add(2));
        let r = Complex64::from_polar(1.0, phi);
        let g = grad1(&a, &y, &z).unwrap();
        let gr = grad1(&a, &y, &z.scale(r)).unwrap();
        prop_assert!(max_gap(&gr, &g.scale(r)) <= 1e-10 * (1.0 + g.norm()));
        let f = loss(&a, &y, &z).unwrap();
        prop_assert!((loss(&a, &y, &z.scale(r)).unwrap() - f).abs() <= 1e-10 * (1.0 + f));
    }

    #[test]
    fn hypergeometric_is_symmetric_in_a_b(a in -2.5..2.5f64, b in -2.5..2.5f64, t in 0.0..0.9f64) {
        let f1 = hypergeometric_f(a, b, 1.5, t).unwrap();
        let f2 = hypergeometric_f(b, a, 1.5, t).unwrap();
        prop_assert!((f1 - f2).abs() <= 1e-12 * (1.0 + f1.abs()));
    }

    #[test]
    fn fft_and_naive_dft_agree(h in 1usize..7, w in 1usize..7, s in any::<u64>()) {
        let z = signal(h * w, s);
        let fast = Fourier2DOperator::with_mode(h, w, DftMode::Fft).unwrap();
        let slow = Fourier2DOperator::with_mode(h, w, DftMode::Naive).unwrap();
        let a = ComplexSignal::new(fast.forward(z.as_slice())).unwrap();
        let b = ComplexSignal::new(slow.forward(z.as_slice())).unwrap();
        prop_assert!(max_gap(&a, &b) <= 1e-10 * (1.0 + z.norm()));
        let a = ComplexSignal::new(fast.adjoint(z.as_slice())).unwrap();
        let b = ComplexSignal::new(slow.adjoint(z.as_slice())).unwrap();
        prop_assert!(max_gap(&a, &b) <= 1e-10 * (1.0 + z.norm()));
    }
}

/// `Σ_p z_p e^{−2πi(k_r p_r/h + k_c p_c/w)}` evaluated term by term.
fn dft_by_definition(h: usize, w: usize, z: &ComplexSignal) -> Vec<Complex64> {
    (0..h * w)
        .map(|i| {
            let (kr, kc) = (i / w, i % w);
            (0..h * w)
                .map(|p| {
                    let (pr, pc) = (p / w, p % w);
                    let phase = -2.0 * std::f64::consts::PI
                        * ((kr * pr) as f64 / h as f64 + (kc * pc) as f64 / w as f64);
                    z[p] * Complex64::from_polar(1.0, phase)
                })
                .sum()
        })
        .collect()
}

#[test]
fn fourier_operator_matches_definition() {
    for (h, w) in [(4, 4), (8, 4), (3, 5)] {
        let op = Fourier2DOperator::new(h, w).unwrap_or_else(|_| Fourier2DOperator::with_mode(h, w, DftMode::Naive).unwrap());
        let z = signal(h * w, (h * 10 + w) as u64);
        let got = ComplexSignal::new(op.forward(z.as_slice())).unwrap();
        let want = ComplexSignal::new(dft_by_definition(h, w, &z)).unwrap();
        assert!(max_gap(&got, &want) < 1e-10 * z.norm());
    }
}

#[test]
fn fourier_gradient_vanishes_at_shifted_truth() {
    let op = Fourier2DOperator::new(8, 8).unwrap();
    let x = signal(64, 77);
    let y = observe(&op, &x).unwrap();
    // a circular shift changes only the phases of the DFT
    let mut shifted = vec![Complex64::new(0.0, 0.0); 64];
    for r in 0..8 {
        for c in 0..8 {
            shifted[((r + 3) % 8) * 8 + (c + 5) % 8] = x[r * 8 + c];
        }
    }
    let g = grad1_fourier2d(&op, &y, &ComplexSignal::new(shifted).unwrap()).unwrap();
    assert!(g.norm() < 1e-10 * x.norm_sqr() * x.norm());
}
