mod common;

use irka_lab::h2::{error_system, h2_error, h2_norm, lyapunov_solve, sylvester_solve};
use irka_lab::irka::{initial_shifts, run_irka, InitStrategy, IrkaConfig};
use irka_lab::projection::compress;
use irka_lab::{generate, Error, StateSpaceSystem};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

/// Solves `A X + X B + C = 0` through the Kronecker form `(I (x) A + B^T (x) I) vec X = -vec C`.
fn kronecker_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (a.nrows(), b.nrows());
    let big = DMatrix::from_fn(n * m, n * m, |row, col| {
        let (i, j) = (row % n, row / n);
        let (k, l) = (col % n, col / n);
        let mut v = 0.0;
        if j == l {
            v += a[(i, k)];
        }
        if i == k {
            v += b[(l, j)];
        }
        v
    });
    let rhs = DVector::from_iterator(n * m, c.iter().map(|v| -v));
    let x = big.lu().solve(&rhs).expect("nonsingular Kronecker system");
    DMatrix::from_column_slice(n, m, x.as_slice())
}

#[test]
fn lyapunov_examples() {
    let p = lyapunov_solve(&DMatrix::from_element(1, 1, -1.0), &DMatrix::from_element(1, 1, 1.0)).unwrap();
    assert!((p[(0, 0)] - 0.5).abs() < 1e-15);
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
    let p = lyapunov_solve(&a, &DMatrix::from_element(2, 2, 1.0)).unwrap();
    let expect = DMatrix::from_row_slice(2, 2, &[0.5, 1.0 / 3.0, 1.0 / 3.0, 0.25]);
    assert!((p - expect).abs().max() < 1e-15);
    let unstable = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.5]));
    assert!(matches!(lyapunov_solve(&unstable, &DMatrix::identity(2, 2)), Err(Error::UnstableMatrix { .. })));
}

#[test]
fn lyapunov_matches_time_domain_quadrature() {
    let n = 10;
    let mut g = common::rng(12);
    let m = DMatrix::from_fn(n, n, |_, _| g.sample::<f64, _>(StandardNormal) / (n as f64).sqrt());
    let a = -(&m * m.transpose()) - DMatrix::identity(n, n);
    let a = (&a + a.transpose()) * 0.5;
    let b = DVector::from_fn(n, |_, _| g.random_range(-1.0..1.0));
    let p = lyapunov_solve(&a, &(&b * b.transpose())).unwrap();
    let eig = a.clone().symmetric_eigen();
    let mut oracle = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            // [e^{At} b]_i [e^{At} b]_j integrated on [0, 50].
            let f = |t: f64| {
                let d = DVector::from_iterator(n, eig.eigenvalues.iter().map(|l| (l * t).exp()));
                let qb = eig.eigenvectors.transpose() * &b;
                let x = &eig.eigenvectors * qb.component_mul(&d);
                x[i] * x[j]
            };
            let v = common::integrate_geometric(f, 1e-3, 50.0);
            oracle[(i, j)] = v;
            oracle[(j, i)] = v;
        }
    }
    assert!((&p - &oracle).abs().max() / oracle.abs().max() < 1e-5);
}

#[test]
fn nonsymmetric_solves_match_kronecker_oracle() {
    let a = common::random_general(7, 3).a().clone();
    let b = common::random_general(4, 5).a().clone();
    let mut g = common::rng(2);
    let c = DMatrix::from_fn(7, 4, |_, _| g.random_range(-1.0..1.0));
    let x = sylvester_solve(&a, &b, &c).unwrap();
    let oracle = kronecker_solve(&a, &b.transpose(), &c);
    assert!((&x - &oracle).abs().max() < 1e-10 * (1.0 + oracle.abs().max()));
    let rhs = &c * c.transpose();
    let p = lyapunov_solve(&a, &rhs).unwrap();
    let oracle = kronecker_solve(&a, &a.transpose(), &rhs);
    assert!((&p - &oracle).abs().max() < 1e-10 * (1.0 + oracle.abs().max()));
}

#[test]
fn h2_norm_examples() {
    let one = StateSpaceSystem::diagonal(&[-1.0], &[1.0], &[1.0]).unwrap();
    assert!((h2_norm(&one).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    let two = generate::diagonal(&[-1.0, -2.0], &[1.0, 1.0]).unwrap();
    assert!((h2_norm(&two).unwrap() - (17.0f64 / 12.0).sqrt()).abs() < 1e-14);
}

#[test]
fn h2_norm_of_zip_system_matches_double_sum() {
    let mut g = common::rng(44);
    let poles: Vec<f64> = (0..8).map(|_| -10f64.powf(g.random_range(-1.0..1.0))).collect();
    let res: Vec<f64> = (0..8).map(|_| g.random_range(0.1..2.0)).collect();
    let sys = generate::diagonal(&poles, &res).unwrap();
    let oracle = common::h2_sq_double_sum(&poles, &res).sqrt();
    assert!((h2_norm(&sys).unwrap() - oracle).abs() / oracle < 1e-9);
}

#[test]
fn identical_copy_has_zero_error() {
    let sys = common::random_sss(9, 5);
    let rep = h2_error(&sys, &sys.clone()).unwrap();
    assert!(rep.error_norm < 1e-10, "{}", rep.error_norm);
    assert!(rep.pole_collision && rep.error_norm_pole_residue.is_none());
}

#[test]
fn shared_pole_is_flagged_not_fatal() {
    let full = generate::diagonal(&[-1.0, -2.0, -4.0], &[1.0, 1.0, 1.0]).unwrap();
    let red = generate::diagonal(&[-2.0], &[1.5]).unwrap();
    let rep = h2_error(&full, &red).unwrap();
    assert!(rep.pole_collision);
    assert!(rep.error_norm_pole_residue.is_none() && rep.route_discrepancy.is_none());
    // E = 1/(s+1) - 0.5/(s+2) + 1/(s+4).
    let oracle = common::h2_sq_double_sum(&[-1.0, -2.0, -4.0], &[1.0, -0.5, 1.0]).sqrt();
    assert!((rep.error_norm - oracle).abs() / oracle < 1e-12);
}

#[test]
fn cancellation_regime_matches_frequency_oracle() {
    // An accurate r = 6 model of a 10-node ladder: J is ~1e-11 of ||H||^2.
    let sys = generate::rc_ladder(10, 2.0).unwrap();
    let s0 = initial_shifts(&sys, 6, InitStrategy::MirrorSpectrumLogspace, 0).unwrap();
    let red = run_irka(&sys, &IrkaConfig::new(6), &s0).unwrap().final_model;
    let rep = h2_error(&sys, &red).unwrap();
    assert!(rep.frequency_refined);
    // ||E||^2 = (1/pi) int_0^inf |E(jw)|^2 dw with E evaluated by dense solves.
    let f = |w: f64| {
        let s = Complex64::new(0.0, w);
        (common::transfer_direct(&sys, s) - common::transfer_direct(&red, s)).norm_sqr()
    };
    let oracle = (common::integrate_geometric(f, 1e-5, 1e7) / std::f64::consts::PI).sqrt();
    assert!((rep.error_norm - oracle).abs() / oracle < 1e-6, "{} vs {oracle}", rep.error_norm);
}

#[test]
fn error_realization_is_block_diagonal() {
    let full = common::random_general(4, 1);
    let red = common::random_general(2, 2);
    let e = error_system(&full, &red).unwrap();
    assert_eq!(e.order(), 6);
    let s = Complex64::new(0.3, 0.7);
    let expect = common::transfer_direct(&full, s) - common::transfer_direct(&red, s);
    assert!((common::transfer_direct(&e, s) - expect).norm() < 1e-13);
}

/// Independent H2 error: `||[H; -H_r]||^2` from a Kronecker-solved Gramian of the error
/// realization.
fn gramian_oracle(full: &StateSpaceSystem, red: &StateSpaceSystem) -> f64 {
    let e = error_system(full, red).unwrap();
    let p = kronecker_solve(e.a(), &e.a().transpose(), &(e.b() * e.b().transpose()));
    (e.c().transpose() * p * e.c())[(0, 0)].max(0.0).sqrt()
}

proptest! {
    #![proptest_config(common::proptest_config(32))]

    #[test]
    fn two_pole_closed_form(l in -8.0f64..-0.05, phi in 0.01f64..5.0) {
        let full = generate::diagonal(&[-1.0, -2.0], &[1.0, 1.0]).unwrap();
        let red = generate::diagonal(&[l], &[phi]).unwrap();
        prop_assume!((l + 1.0).abs() > 1e-3 && (l + 2.0).abs() > 1e-3);
        let oracle = common::h2_sq_double_sum(&[-1.0, -2.0, l], &[1.0, 1.0, -phi]).sqrt();
        let rep = h2_error(&full, &red).unwrap();
        prop_assert!((rep.error_norm_gramian - oracle).abs() / oracle < 1e-9);
        let pr = rep.error_norm_pole_residue.unwrap();
        prop_assert!((pr - oracle).abs() / oracle < 1e-9);
    }

    #[test]
    fn routes_agree_and_norms_are_consistent(n in 4usize..20, seed in any::<u64>(), general in any::<bool>()) {
        let r = (n / 2).min(5);
        let (full, red) = if general {
            let full = common::random_general(n, seed);
            let (lo, hi) = common::spectral_range(&full);
            let red = irka_lab::irka::reduced_model(&full, &common::random_shifts_in(r, seed ^ 1, true, lo, hi)).unwrap();
            (full, red)
        } else {
            let full = common::random_sss(n, seed);
            (full.clone(), compress(&full, &common::random_orthonormal(n, r, seed ^ 1)).unwrap())
        };
        prop_assume!(red.is_stable().unwrap());
        let rep = h2_error(&full, &red).unwrap();
        // Both routes and the Kronecker oracle carry an absolute error of order
        // eps * cond * ||H||^2 in J.
        let floor = 1e-11 * (rep.full_norm.powi(2) + rep.reduced_norm.powi(2));
        if let Some(pr) = rep.error_norm_pole_residue {
            let g = rep.error_norm_gramian;
            if rep.frequency_refined {
                prop_assert!((g * g - pr * pr).abs() <= floor);
            } else {
                prop_assert!((g - pr).abs() / (g + 1e-300) < 1e-7, "{} vs {}", g, pr);
            }
        }
        let oracle = gramian_oracle(&full, &red);
        prop_assert!((rep.error_norm.powi(2) - oracle.powi(2)).abs() <= floor + 1e-9 * oracle.powi(2), "{} vs {}", rep.error_norm, oracle);
        prop_assert!(rep.cost_j >= -1e-10);
        if !rep.frequency_refined {
            prop_assert!((rep.cost_j - rep.error_norm.powi(2)).abs() <= 2e-7 * rep.cost_j.max(1e-300));
        }
        prop_assert!((rep.relative_h2_error - rep.error_norm / rep.full_norm).abs() <= 1e-15 * rep.relative_h2_error.max(1.0));
        prop_assert!(rep.error_norm <= rep.full_norm + rep.reduced_norm + 1e-9);
    }

    /// Nested compressions `Q_r` and `Q_{r+1}` of an SSS system: on `s >= 0` the Galerkin
    /// energy `H_r(s) = max_{y in range Q} 2 y^T b - y^T (sI - A) y` grows with the subspace,
    /// so `0 <= H(s) - H_{r+1}(s) <= H(s) - H_r(s)`.
    #[test]
    fn nested_compressions_are_pointwise_monotone(n in 4usize..20, r in 1usize..4, seed in any::<u64>()) {
        let full = common::random_sss(n, seed);
        let q = common::random_orthonormal(n, r + 1, seed ^ 2);
        let small = compress(&full, &q.columns(0, r).into_owned()).unwrap();
        let large = compress(&full, &q).unwrap();
        for k in 0..40 {
            let s = Complex64::new(if k == 0 { 0.0 } else { 1e-3 * 1.4f64.powi(k) }, 0.0);
            let h = common::transfer_direct(&full, s).re;
            let e_small = h - common::transfer_direct(&small, s).re;
            let e_large = h - common::transfer_direct(&large, s).re;
            let tol = 1e-12 * h.abs();
            prop_assert!(e_large >= -tol && e_large <= e_small + tol, "s={} {} {}", s.re, e_small, e_large);
        }
    }
}

/// The H2 error of nested compressions is not monotone in general: one fixed seeded
/// counterexample.
#[test]
fn nested_h2_error_is_not_monotone() {
    let found = (0..400u64).find_map(|seed| {
        let (n, r) = (6 + (seed % 10) as usize, 1 + (seed % 3) as usize);
        let full = common::random_sss(n, seed);
        let q = common::random_orthonormal(n, r + 1, seed ^ 2);
        let small = compress(&full, &q.columns(0, r).into_owned()).ok()?;
        let large = compress(&full, &q).ok()?;
        let a = h2_error(&full, &small).ok()?.error_norm;
        let b = h2_error(&full, &large).ok()?.error_norm;
        (b > a * (1.0 + 1e-6)).then_some((seed, a, b, gramian_oracle(&full, &small), gramian_oracle(&full, &large)))
    });
    let (seed, a, b, oa, ob) = found.expect("a counterexample among 400 seeds");
    assert!(ob > oa, "seed {seed}: oracle disagrees ({oa} vs {ob})");
    assert!((a - oa).abs() < 1e-10 && (b - ob).abs() < 1e-10);
}
