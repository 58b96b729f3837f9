//! Zeros and sign of the error system `H - H_r`.
//!
//! The finite zeros are the finite eigenvalues of `[[A_e, b_e], [c_e^T, 0]] - z diag(I, 0)`.
//! They are obtained without a QZ solver from the zero dynamics of the SISO realization:
//! with relative degree `rho` (first nonzero Markov parameter `m = c^T A^{rho-1} b`), the
//! zeros are the eigenvalues of `A - b c^T A^rho / m` restricted to
//! `ker [c^T; c^T A; ...; c^T A^{rho-1}]`, which that matrix leaves invariant.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::h2::{self, error_system};
use crate::irka::reduced_poles;
use crate::linalg;
use crate::lti::{eval_transfer, ResolventAt, StateSpaceSystem};

/// Zeros with `|Re z| < BOUNDARY_TOL (1 + |z|)` are counted in the right half-plane.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Relative radius for matching zeros to mirrored reduced poles.
pub const CLUSTER_TOL: f64 = 1e-6;
/// Relative radius within which computed zeros are considered for a double root at a shift.
pub const CAPTURE_TOL: f64 = 5e-2;
/// `|E(c)| / (|H(c)| + |H_r(c)|)` accepted at a refined double root `c`.
pub const DOUBLE_ROOT_RESIDUAL: f64 = 1e-10;
/// Error norms below this make the zero set meaningless.
pub const DEGENERATE_TOL: f64 = 1e-13;
pub const GRID_POINTS: usize = 2000;
const MARKOV_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorZeroReport {
    #[serde(with = "crate::serde_util::complex_vec")]
    pub zeros: Vec<Complex64>,
    pub relative_degree: usize,
    pub rhp_count: usize,
    pub lhp_count: usize,
    /// Zeros within the boundary tolerance of the imaginary axis (included in `rhp_count`).
    pub boundary_count: usize,
    /// Zeros matched to some `-lambda~_i`, with multiplicity.
    pub interpolation_matched: usize,
    /// Number of `-lambda~_i` with a confirmed double root of the error within the cluster
    /// radius.
    pub double_roots_matched: usize,
    /// Refined locations of the matched double roots.
    #[serde(with = "crate::serde_util::complex_vec")]
    pub double_root_centers: Vec<Complex64>,
    pub min_error_on_grid: f64,
    pub grid_argmin: f64,
}

/// Finite zeros of a SISO realization and its relative degree.
pub fn transmission_zeros(sys: &StateSpaceSystem) -> Result<(Vec<Complex64>, usize)> {
    let n = sys.order();
    let a = sys.a();
    let b = sys.b();
    let c = sys.c();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut ctak = c.clone();
    let mut rho = 0;
    let mut markov = 0.0;
    for k in 1..=n {
        let m = ctak.dot(b);
        let scale = ctak.norm() * b.norm();
        rows.push(ctak.clone());
        ctak = a.transpose() * &ctak;
        if m.abs() > MARKOV_TOL * scale && scale > 0.0 {
            rho = k;
            markov = m;
            break;
        }
    }
    if rho == 0 {
        return Err(Error::DegenerateError { norm: 0.0 });
    }
    // ctak is now A^T^rho c.
    let f = a - b * (ctak.transpose() / markov);
    let dim = n - rho;
    if dim == 0 {
        return Ok((Vec::new(), rho));
    }
    let mut cmat = DMatrix::zeros(n, rho);
    for (j, row) in rows.iter().enumerate() {
        cmat.set_column(j, row);
    }
    let q = linalg::orthonormal_basis(&cmat, 1e-14)?;
    let proj = DMatrix::identity(n, n) - &q * q.transpose();
    let (vals, vecs) = linalg::sym_eigen(&proj);
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i] > 0.5).collect();
    if keep.len() != dim {
        return Err(Error::EigenFailure);
    }
    let u = DMatrix::from_fn(n, dim, |i, j| vecs[(i, keep[j])]);
    let z = u.transpose() * f * &u;
    let mut zeros = linalg::eigenvalues(&z)?;
    zeros.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok((zeros, rho))
}

/// `2000` log-spaced points on `[1e-4, 1e4]` preceded by `s = 0`.
pub fn lemma_grid() -> Vec<f64> {
    let mut grid = Vec::with_capacity(GRID_POINTS + 1);
    grid.push(0.0);
    for k in 0..GRID_POINTS {
        let e = -4.0 + 8.0 * k as f64 / (GRID_POINTS - 1) as f64;
        grid.push(10f64.powf(e));
    }
    grid
}

/// Smallest value of `H(s) - H_r(s)` on [`lemma_grid`] and where it occurs.
pub fn min_error_on_grid(full: &StateSpaceSystem, red: &StateSpaceSystem) -> Result<(f64, f64)> {
    let mut best = (f64::INFINITY, 0.0);
    for s in lemma_grid() {
        let z = Complex64::new(s, 0.0);
        let v = (eval_transfer(full, z, 0)? - eval_transfer(red, z, 0)?).re;
        if v < best.0 {
            best = (v, s);
        }
    }
    Ok(best)
}

/// Newton on `E'` from `start`. Returns the critical point and the relative size of `E`
/// there, or `None` if the iteration leaves the neighbourhood of `start`.
fn refine_double_root(
    full: &StateSpaceSystem,
    red: &StateSpaceSystem,
    start: Complex64,
) -> Result<Option<(Complex64, f64)>> {
    let eval = |s: Complex64| -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        Ok((
            ResolventAt::new(full, s)?.derivatives(full, 2),
            ResolventAt::new(red, s)?.derivatives(red, 2),
        ))
    };
    let mut c = start;
    for _ in 0..30 {
        let (h, hr) = eval(c)?;
        let d2 = h[2] - hr[2];
        if d2.norm() == 0.0 {
            break;
        }
        let step = (h[1] - hr[1]) / d2;
        c -= step;
        if (c - start).norm() > CAPTURE_TOL * start.norm() {
            return Ok(None);
        }
        if step.norm() <= 1e-15 * c.norm() {
            break;
        }
    }
    let (h, hr) = eval(c)?;
    let scale = h[0].norm() + hr[0].norm();
    Ok(Some((c, (h[0] - hr[0]).norm() / scale.max(f64::MIN_POSITIVE))))
}

pub fn error_zeros(full: &StateSpaceSystem, red: &StateSpaceSystem) -> Result<ErrorZeroReport> {
    for sys in [full, red] {
        if let Some(eigenvalue) = sys.unstable_eigenvalue()? {
            return Err(Error::UnstableSystem { eigenvalue });
        }
    }
    let norm = h2::h2_error(full, red)?.error_norm;
    if norm < DEGENERATE_TOL {
        return Err(Error::DegenerateError { norm });
    }
    let (zeros, relative_degree) = transmission_zeros(&error_system(full, red)?)?;
    let boundary = |z: &Complex64| z.re.abs() < BOUNDARY_TOL * (1.0 + z.norm());
    let boundary_count = zeros.iter().filter(|z| boundary(z)).count();
    let rhp_count = zeros.iter().filter(|z| z.re > 0.0 || boundary(z)).count();
    let lhp_count = zeros.len() - rhp_count;

    let targets: Vec<Complex64> = reduced_poles(red)?.iter().map(|z| -z).collect();
    // Near an accurate fit E'' is tiny and the eigenvalues of the zero dynamics smear a double
    // root into a pair up to CAPTURE_TOL apart. A captured pair is confirmed by Newton on E'
    // from its mean, which locates the double root to working accuracy.
    let mut used = vec![false; zeros.len()];
    let mut interpolation_matched = 0;
    let mut double_roots_matched = 0;
    let mut double_root_centers = Vec::new();
    for t in &targets {
        let mut near: Vec<usize> = (0..zeros.len())
            .filter(|&k| !used[k] && (zeros[k] - t).norm() <= CAPTURE_TOL * t.norm())
            .collect();
        near.sort_by(|&i, &j| (zeros[i] - t).norm().total_cmp(&(zeros[j] - t).norm()));
        near.truncate(2);
        if near.len() == 2 {
            let mean = (zeros[near[0]] + zeros[near[1]]) / 2.0;
            if let Some((center, residual)) = refine_double_root(full, red, mean)? {
                if (center - t).norm() <= CLUSTER_TOL * t.norm() && residual <= DOUBLE_ROOT_RESIDUAL {
                    used[near[0]] = true;
                    used[near[1]] = true;
                    interpolation_matched += 2;
                    double_roots_matched += 1;
                    double_root_centers.push(center);
                    continue;
                }
            }
        }
        if let Some(&k) = near.first() {
            if (zeros[k] - t).norm() <= CLUSTER_TOL * t.norm() {
                used[k] = true;
                interpolation_matched += 1;
            }
        }
    }
    let (min_error_on_grid, grid_argmin) = min_error_on_grid(full, red)?;
    Ok(ErrorZeroReport {
        zeros,
        relative_degree,
        rhp_count,
        lhp_count,
        boundary_count,
        interpolation_matched,
        double_roots_matched,
        double_root_centers,
        min_error_on_grid,
        grid_argmin,
    })
}
