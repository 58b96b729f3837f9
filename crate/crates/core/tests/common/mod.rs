//! Oracles shared by the integration tests. Nothing here calls the library's numerical
//! routines for the quantity being checked.
#![allow(dead_code)]

use irka_lab::generate;
use irka_lab::projection::ShiftSet;
use irka_lab::StateSpaceSystem;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn proptest_config(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases,
        failure_persistence: None,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x1aa5),
        ..Default::default()
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stable nonsymmetric system `T D T^{-1}` where `D` holds real poles and complex pole pairs
/// with real parts log-uniform in `[-10, -0.1]`, and `T = I + G / sqrt(n)` with `G` standard
/// normal.
pub fn random_general(n: usize, seed: u64) -> StateSpaceSystem {
    let mut g = rng(seed);
    let mut d = DMatrix::zeros(n, n);
    let mut i = 0;
    while i < n {
        let re = -10f64.powf(g.random_range(-1.0..1.0));
        if i + 1 < n && g.random_bool(0.3) {
            let im = 10f64.powf(g.random_range(-1.0..1.0));
            d[(i, i)] = re;
            d[(i + 1, i + 1)] = re;
            d[(i, i + 1)] = im;
            d[(i + 1, i)] = -im;
            i += 2;
        } else {
            d[(i, i)] = re;
            i += 1;
        }
    }
    let scale = 0.5 / (n as f64).sqrt();
    let t = DMatrix::identity(n, n) + DMatrix::from_fn(n, n, |_, _| g.sample::<f64, _>(StandardNormal) * scale);
    let a = &t * d * t.clone().try_inverse().expect("invertible");
    let b = DVector::from_fn(n, |_, _| g.sample::<f64, _>(StandardNormal));
    let c = DVector::from_fn(n, |_, _| g.sample::<f64, _>(StandardNormal));
    StateSpaceSystem::new(a, b, c).unwrap()
}

pub fn random_sss(n: usize, seed: u64) -> StateSpaceSystem {
    generate::random_sss(n, seed, generate::DEFAULT_DELTA).unwrap()
}

/// `r` shifts in the right half-plane with real parts log-uniform in `[lo, hi]`, some as
/// conjugate pairs.
pub fn random_shifts_in(r: usize, seed: u64, allow_complex: bool, lo: f64, hi: f64) -> ShiftSet {
    let mut g = rng(seed);
    let mut out = Vec::with_capacity(r);
    while out.len() < r {
        let re = lo * (hi / lo).powf(g.random_range(0.0..1.0));
        if allow_complex && r - out.len() >= 2 && g.random_bool(0.4) {
            let im = 10f64.powf(g.random_range(-1.0..1.0));
            out.push(Complex64::new(re, im));
            out.push(Complex64::new(re, -im));
        } else {
            out.push(Complex64::new(re, 0.0));
        }
    }
    ShiftSet::new(out).unwrap()
}

/// [`random_shifts_in`] over `[0.1, 10]`.
pub fn random_shifts(r: usize, seed: u64, allow_complex: bool) -> ShiftSet {
    random_shifts_in(r, seed, allow_complex, 0.1, 10.0)
}

/// `[min |Re lambda|, max |Re lambda|]` over the spectrum of `A`.
pub fn spectral_range(sys: &StateSpaceSystem) -> (f64, f64) {
    let eigs = sys.a().complex_eigenvalues();
    let lo = eigs.iter().fold(f64::INFINITY, |m, z| m.min(z.re.abs()));
    let hi = eigs.iter().fold(0.0f64, |m, z| m.max(z.re.abs()));
    (lo, hi)
}

/// Random orthonormal `n x r` matrix (modified Gram-Schmidt on Gaussian columns).
pub fn random_orthonormal(n: usize, r: usize, seed: u64) -> DMatrix<f64> {
    let mut g = rng(seed);
    let mut q = DMatrix::from_fn(n, r, |_, _| g.sample::<f64, _>(StandardNormal));
    for j in 0..r {
        for k in 0..j {
            let p = q.column(k).dot(&q.column(j));
            let col = q.column(k).into_owned();
            q.column_mut(j).axpy(-p, &col, 1.0);
        }
        let nrm = q.column(j).norm();
        q.column_mut(j).unscale_mut(nrm);
    }
    q
}

/// Pole-residue data of a diagonal realization, read off directly.
pub fn diagonal_data(sys: &StateSpaceSystem) -> (Vec<f64>, Vec<f64>) {
    let n = sys.order();
    let poles = (0..n).map(|i| sys.a()[(i, i)]).collect();
    let res = (0..n).map(|i| sys.b()[i] * sys.c()[i]).collect();
    (poles, res)
}

/// `||sum_i res_i / (s - p_i)||_H2^2` for real poles by the double sum.
pub fn h2_sq_double_sum(poles: &[f64], res: &[f64]) -> f64 {
    let mut j = 0.0;
    for i in 0..poles.len() {
        for k in 0..poles.len() {
            j += res[i] * res[k] / (-poles[i] - poles[k]);
        }
    }
    j
}

/// Transfer function by a direct dense solve (nalgebra LU), independent of the library.
pub fn transfer_direct(sys: &StateSpaceSystem, s: Complex64) -> Complex64 {
    let n = sys.order();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { s } else { Complex64::new(0.0, 0.0) };
        d - Complex64::new(sys.a()[(i, j)], 0.0)
    });
    let b = sys.b().map(|v| Complex64::new(v, 0.0));
    let x = m.lu().solve(&b).expect("nonsingular");
    sys.c().iter().zip(x.iter()).map(|(c, x)| x * *c).sum()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on the Legendre recurrence).
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    (0..m)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=m {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// `int_0^t_end f` by 20-point Gauss-Legendre on panels that grow geometrically from
/// `t_first`, which should resolve the fastest time scale.
pub fn integrate_geometric<F: Fn(f64) -> f64>(f: F, t_first: f64, t_end: f64) -> f64 {
    let rule = gauss_legendre(20);
    let panel = |a: f64, b: f64| -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        rule.iter().map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
    };
    let mut total = panel(0.0, t_first);
    let mut a = t_first;
    while a < t_end {
        let b = (a * 1.25).min(t_end);
        total += panel(a, b);
        a = b;
    }
    total
}

/// Polynomial coefficients (ascending powers) of `prod (s - r_i)`.
pub fn poly_from_roots(roots: &[f64]) -> Vec<f64> {
    let mut p = vec![1.0];
    for &r in roots {
        let mut next = vec![0.0; p.len() + 1];
        for (k, &c) in p.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= r * c;
        }
        p = next;
    }
    p
}

/// Roots of a polynomial (ascending coefficients) from its companion matrix, polished by
/// Newton steps in complex arithmetic.
pub fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let mut c = coeffs.to_vec();
    while c.last().is_some_and(|v| *v == 0.0) {
        c.pop();
    }
    let deg = c.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let comp = DMatrix::from_fn(deg, deg, |i, j| {
        if i == 0 {
            -c[deg - 1 - j] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let eig = comp.complex_eigenvalues();
    let eval = |z: Complex64| -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &a in c.iter().rev() {
            dp = dp * z + p;
            p = p * z + a;
        }
        (p, dp)
    };
    eig.iter()
        .map(|&z0| {
            let mut z = z0;
            for _ in 0..3 {
                let (p, dp) = eval(z);
                if dp.norm() == 0.0 {
                    break;
                }
                let step = p / dp;
                if !(step.norm() < 1e-3 * (1.0 + z.norm())) {
                    break;
                }
                z -= step;
            }
            z
        })
        .collect()
}

/// Numerator of `sum_k res_k / (s - p_k)` over the common denominator.
pub fn numerator(poles: &[f64], res: &[f64]) -> Vec<f64> {
    let mut num = vec![0.0; poles.len()];
    for k in 0..poles.len() {
        let others: Vec<f64> = (0..poles.len()).filter(|&j| j != k).map(|j| poles[j]).collect();
        for (d, c) in poly_from_roots(&others).iter().enumerate() {
            num[d] += res[k] * c;
        }
    }
    num
}

/// `min J(mu, phi) = ||H - phi/(s + mu)||^2` for `H = 1/(s+1) + 1/(s+2)`, by a 400 x 400
/// log grid followed by Newton polishing. Returns `(J, mu, phi)`.
pub fn two_pole_cost_oracle() -> (f64, f64, f64) {
    let h = |m: f64| 1.0 / (m + 1.0) + 1.0 / (m + 2.0);
    let h1 = |m: f64| -1.0 / (m + 1.0).powi(2) - 1.0 / (m + 2.0).powi(2);
    let h2 = |m: f64| 2.0 / (m + 1.0).powi(3) + 2.0 / (m + 2.0).powi(3);
    let norm_sq = 0.5 + 2.0 / 3.0 + 0.25;
    let cost = |m: f64, p: f64| norm_sq - 2.0 * p * h(m) + p * p / (2.0 * m);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..400 {
        let m = 10f64.powf(-2.0 + 4.0 * i as f64 / 399.0);
        for k in 0..400 {
            let p = 10f64.powf(-3.0 + 5.0 * k as f64 / 399.0);
            let j = cost(m, p);
            if j < best.0 {
                best = (j, m, p);
            }
        }
    }
    let (_, mut m, mut p) = best;
    for _ in 0..50 {
        let gm = -2.0 * p * h1(m) - p * p / (2.0 * m * m);
        let gp = -2.0 * h(m) + p / m;
        let hmm = -2.0 * p * h2(m) + p * p / (m * m * m);
        let hmp = -2.0 * h1(m) - p / (m * m);
        let hpp = 1.0 / m;
        let det = hmm * hpp - hmp * hmp;
        let dm = (hpp * gm - hmp * gp) / det;
        let dp = (hmm * gp - hmp * gm) / det;
        m -= dm;
        p -= dp;
        if dm.abs() + dp.abs() < 1e-15 {
            break;
        }
    }
    (cost(m, p), m, p)
}

/// `(H(s), H'(s))` by two dense solves.
pub fn transfer_and_derivative(sys: &StateSpaceSystem, s: Complex64) -> (Complex64, Complex64) {
    let n = sys.order();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { s } else { Complex64::new(0.0, 0.0) };
        d - Complex64::new(sys.a()[(i, j)], 0.0)
    });
    let lu = m.lu();
    let b = sys.b().map(|v| Complex64::new(v, 0.0));
    let x = lu.solve(&b).expect("nonsingular");
    let y = lu.solve(&x).expect("nonsingular");
    let c = sys.c().map(|v| Complex64::new(v, 0.0));
    (c.dot(&x), -c.dot(&y))
}

/// Relative Hermite residuals `(|H - H_r| / (1 + |H|), |H' - H_r'| / (1 + |H'|))`.
pub fn hermite_residuals(full: &StateSpaceSystem, red: &StateSpaceSystem, s: Complex64) -> (f64, f64) {
    let (h, dh) = transfer_and_derivative(full, s);
    let (hr, dhr) = transfer_and_derivative(red, s);
    ((h - hr).norm() / (1.0 + h.norm()), (dh - dhr).norm() / (1.0 + dh.norm()))
}

/// Mirrored reduced poles for real shifts on an SSS system, built from scratch:
/// `V = [(s_j I - A)^{-1} b]`, `Q = qr(V)`, eigenvalues of `Q^T A Q`, ascending.
pub fn shift_map_oracle(sys: &StateSpaceSystem, shifts: &[f64]) -> Vec<f64> {
    let n = sys.order();
    let r = shifts.len();
    let mut v = DMatrix::zeros(n, r);
    for (j, &s) in shifts.iter().enumerate() {
        let m = DMatrix::identity(n, n) * s - sys.a();
        let x = m.lu().solve(sys.b()).expect("nonsingular");
        v.set_column(j, &x);
    }
    let q = v.qr().q();
    let ar = q.transpose() * sys.a() * &q;
    let ar = (&ar + ar.transpose()) * 0.5;
    let mut mirrored: Vec<f64> = ar.symmetric_eigenvalues().iter().map(|l| -l).collect();
    mirrored.sort_by(f64::total_cmp);
    mirrored
}

/// Central differences of [`shift_map_oracle`].
pub fn fd_jacobian_oracle(sys: &StateSpaceSystem, center: &[f64], rel_step: f64) -> DMatrix<f64> {
    let r = center.len();
    let mut jac = DMatrix::zeros(r, r);
    for j in 0..r {
        let h = rel_step * center[j];
        let mut plus = center.to_vec();
        let mut minus = center.to_vec();
        plus[j] += h;
        minus[j] -= h;
        let fp = shift_map_oracle(sys, &plus);
        let fm = shift_map_oracle(sys, &minus);
        for i in 0..r {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}
