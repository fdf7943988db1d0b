mod common;

use consensus_lab::graph::{perturbed_example, pin};
use consensus_lab::spectral::{eigen_residual, eigenvalues, summarize, C64, DEFAULT_TOL};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

use common::random_rooted_graph;

/// Characteristic polynomial coefficients, ascending, by Faddeev–LeVerrier.
fn char_poly(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        m = a * &m + DMatrix::identity(n, n) * coeffs[n - k + 1];
        coeffs[n - k] = -(a * &m).trace() / k as f64;
    }
    coeffs
}

/// Weierstrass / Durand–Kerner iteration for a monic polynomial.
fn durand_kerner(coeffs: &[f64]) -> Vec<C64> {
    let n = coeffs.len() - 1;
    let eval = |z: C64| coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c);
    let seed = C64::new(0.4, 0.9);
    let mut roots: Vec<C64> = (0..n).map(|i| seed.powu(i as u32)).collect();
    for _ in 0..500 {
        let prev = roots.clone();
        for i in 0..n {
            let denom = (0..n).filter(|&j| j != i).fold(C64::new(1.0, 0.0), |acc, j| acc * (roots[i] - roots[j]));
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
        }
        if roots.iter().zip(&prev).all(|(a, b)| (a - b).norm() < 1e-15) {
            break;
        }
    }
    roots
}

/// Greedy nearest matching; returns the largest distance.
fn match_sets(a: &[C64], b: &[C64]) -> f64 {
    let mut pool = b.to_vec();
    let mut worst = 0.0f64;
    for x in a {
        let (idx, d) = pool
            .iter()
            .enumerate()
            .map(|(i, y)| (i, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        worst = worst.max(d);
        pool.swap_remove(idx);
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn random_rooted_spectra_are_certified(seed in any::<u64>()) {
        let g = random_rooted_graph(&mut StdRng::seed_from_u64(seed), 12);
        let p = pin(&g);
        let k = p.k();
        let ev = eigenvalues(k, DEFAULT_TOL).unwrap();
        prop_assert_eq!(ev.len(), k.nrows());
        let norm = k.norm();
        for &l in &ev {
            prop_assert!(eigen_residual(k, l) <= 1e-9 * norm);
            prop_assert!(l.re > 0.0);
            if l.im != 0.0 {
                prop_assert!(ev.iter().any(|m| *m == l.conj()));
            }
        }
        let sum: C64 = ev.iter().sum();
        prop_assert!((sum.re - k.trace()).abs() <= 1e-9 * norm.max(1.0));
        prop_assert!(sum.im.abs() <= 1e-9 * norm.max(1.0));
        let prod: C64 = ev.iter().product();
        let det = k.determinant();
        prop_assert!((prod.re - det).abs() <= 1e-7 * det.abs());

        // independent dense solver
        let reference: Vec<C64> = k.clone().complex_eigenvalues().iter().copied().collect();
        prop_assert!(match_sets(&ev, &reference) <= 1e-6 * norm.max(1.0));
        prop_assert!(summarize(&p).is_ok());
    }
}

#[test]
fn perturbed_pair_follows_closed_form() {
    let golden = [(3.0 - 5f64.sqrt()) / 2.0, (3.0 + 5f64.sqrt()) / 2.0];
    for i in 0..=200 {
        let e = 0.1 * i as f64 / 200.0;
        let ev = eigenvalues(perturbed_example(e).unwrap().k(), DEFAULT_TOL).unwrap();
        let im = (e - e * e / 4.0).sqrt();
        let want = [
            C64::new(golden[0], 0.0),
            C64::new(1.0 - e / 2.0, im),
            C64::new(1.0 - e / 2.0, -im),
            C64::new(golden[1], 0.0),
        ];
        // the unperturbed double eigenvalue is defective, so allow √ε-level error near e = 0
        let tol = if e < 1e-6 { 1e-7 } else { 1e-9 };
        assert!(match_sets(&ev, &want) <= tol, "e = {e}: {ev:?}");
    }
}

#[test]
fn perturbed_spectrum_matches_polynomial_roots() {
    let k = perturbed_example(0.05).unwrap().k().clone();
    let ev = eigenvalues(&k, DEFAULT_TOL).unwrap();
    let roots = durand_kerner(&char_poly(&k));
    assert!(match_sets(&ev, &roots) <= 1e-9, "{ev:?} vs {roots:?}");
    let s = summarize(&perturbed_example(0.05).unwrap()).unwrap();
    assert!(!s.is_real_spectrum);
}

#[test]
fn spectrum_moves_continuously_with_perturbation() {
    let mut prev = eigenvalues(perturbed_example(1e-3).unwrap().k(), DEFAULT_TOL).unwrap();
    for i in 1..=100 {
        let e = 1e-3 + 1e-5 * i as f64;
        let ev = eigenvalues(perturbed_example(e).unwrap().k(), DEFAULT_TOL).unwrap();
        assert!(match_sets(&ev, &prev) < 1e-3);
        prev = ev;
    }
}
