//! Certification of IRKA fixed points for SSS systems.
//!
//! At a fixed point with reduced poles `lambda~_i` and residues `phi~_i`:
//!
//! ```text
//! [S11]_ij = -1/(l_i + l_j)   [S12]_ij = -1/(l_i + l_j)^2   [S22]_ij = -2/(l_i + l_j)^3
//! R = diag(phi~)   E = diag(H''(-l_i) - H_r''(-l_i))   K = E R^{-1}
//! S_c = S22 - S12 S11^{-1} S12   Phi = K - S_c   M = [[S11, S12], [S12, S22 - K]]
//! ```
//!
//! The shift map `s -> -lambda~(s)` has Jacobian `R^{-1} S_c^{-1} E` in shift coordinates,
//! which is similar to `S_c^{-1} K`; the conventional form `-S_c^{-1} K` is stored as
//! `jacobian` and describes the same map in pole/residue-scaled coordinates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irka::{reduced_poles, shift_map};
use crate::linalg::{self, Lu};
use crate::lti::{eval_transfer, to_pole_residue, StateSpaceSystem};
use crate::projection::{self, ShiftSet};
use crate::quadrature;

/// Largest Theorem-2 residual accepted for a fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-6;
/// Separation between attractive and indeterminate spectral radii.
pub const VERDICT_MARGIN: f64 = 1e-8;
/// Relative step of the central differences of the shift map.
pub const FD_STEP: f64 = 1e-6;
/// Analytic vs finite-difference Jacobian gap that triggers a warning.
pub const FD_WARN: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisMatrices {
    /// Reduced poles ordered so that `-lambda~` is ascending (the shift order).
    pub lambdas: Vec<f64>,
    pub residues: Vec<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub s11: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub s12: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub s22: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub r_mat: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub e_mat: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub k_mat: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub s_c: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub m_mat: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub phi: DMatrix<f64>,
}

impl AnalysisMatrices {
    /// `[[S11, S12], [S12, S22]]`
    pub fn s_tilde(&self) -> DMatrix<f64> {
        stack(&self.s11, &self.s12, &self.s22)
    }
}

fn stack(a11: &DMatrix<f64>, a12: &DMatrix<f64>, a22: &DMatrix<f64>) -> DMatrix<f64> {
    let r = a11.nrows();
    let mut m = DMatrix::zeros(2 * r, 2 * r);
    m.view_mut((0, 0), (r, r)).copy_from(a11);
    m.view_mut((0, r), (r, r)).copy_from(a12);
    m.view_mut((r, 0), (r, r)).copy_from(&a12.transpose());
    m.view_mut((r, r), (r, r)).copy_from(a22);
    m
}

/// `S11, S12, S22` from their entrywise formulas.
pub fn s_matrices(lambdas: &[f64]) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let r = lambdas.len();
    let sum = |i: usize, j: usize| lambdas[i] + lambdas[j];
    (
        DMatrix::from_fn(r, r, |i, j| -1.0 / sum(i, j)),
        DMatrix::from_fn(r, r, |i, j| -1.0 / sum(i, j).powi(2)),
        DMatrix::from_fn(r, r, |i, j| -2.0 / sum(i, j).powi(3)),
    )
}

/// Unit-diagonal scaling `D` with `D B D` equilibrated, or `None` for a nonpositive diagonal.
fn equilibration(b: &DMatrix<f64>) -> Option<Vec<f64>> {
    (0..b.nrows())
        .map(|i| {
            let d = b[(i, i)];
            (d > 0.0 && d.is_finite()).then(|| 1.0 / d.sqrt())
        })
        .collect()
}

fn scaled(b: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] * d[i] * d[j])
}

/// `S22 - S12 S11^{-1} S12`, through the Cholesky factor of the equilibrated `S~` when it
/// exists (the trailing block of the factor gives the complement without cancellation).
fn schur_complement(s11: &DMatrix<f64>, s12: &DMatrix<f64>, s22: &DMatrix<f64>) -> DMatrix<f64> {
    let r = s11.nrows();
    let st = stack(s11, s12, s22);
    if let Some(d) = equilibration(&st) {
        if let Some(chol) = nalgebra::Cholesky::new(scaled(&st, &d)) {
            let l22 = chol.l().view((r, r), (r, r)).into_owned();
            let g = &l22 * l22.transpose();
            return DMatrix::from_fn(r, r, |i, j| g[(i, j)] / (d[r + i] * d[r + j]));
        }
    }
    s22 - s12 * solve_matrix(s11, s12)
}

/// `A^{-1} B` by LU.
fn solve_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let lu = Lu::new(a);
    let mut x = DMatrix::zeros(a.nrows(), b.ncols());
    for j in 0..b.ncols() {
        x.set_column(j, &lu.solve(&b.column(j).into_owned()));
    }
    x
}

/// `S^{-1} B` for a symmetric `S`, preferring an equilibrated Cholesky solve.
fn solve_symmetric(s: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = linalg::symmetrize(s);
    if let Some(d) = equilibration(&sym) {
        if let Some(chol) = nalgebra::Cholesky::new(scaled(&sym, &d)) {
            let db = DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] * d[i]);
            let y = chol.solve(&db);
            return DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| y[(i, j)] * d[i]);
        }
    }
    solve_matrix(s, b)
}

/// Theorem-2 residual: Hermite mismatch of `red` at its own mirrored poles.
pub fn optimality_residual(full: &StateSpaceSystem, red: &StateSpaceSystem) -> Result<f64> {
    let mirrored: Vec<Complex64> = reduced_poles(red)?.iter().map(|z| -z).collect();
    Ok(projection::check_hermite(full, red, &mirrored)?
        .iter()
        .map(|h| h.value_residual.max(h.derivative_residual))
        .fold(0.0, f64::max))
}

pub fn assemble(full: &StateSpaceSystem, red: &StateSpaceSystem) -> Result<AnalysisMatrices> {
    if !full.is_sss() {
        return Err(Error::NotSss("full model".into()));
    }
    if !red.is_sss() {
        return Err(Error::NonZipReduced("reduced model is not SSS".into()));
    }
    let pr = to_pole_residue(red).map_err(|e| Error::NonZipReduced(e.to_string()))?;
    let mut modes: Vec<(f64, f64)> = Vec::with_capacity(pr.len());
    for (l, phi) in pr.poles.iter().zip(&pr.residues) {
        if !(l.re < 0.0) || l.im != 0.0 || !(phi.re > 0.0) || phi.im != 0.0 {
            return Err(Error::NonZipReduced(format!("pole {l} with residue {phi}")));
        }
        modes.push((l.re, phi.re));
    }
    modes.sort_by(|a, b| b.0.total_cmp(&a.0));
    let residual = optimality_residual(full, red)?;
    if !(residual <= FIXED_POINT_TOL) {
        return Err(Error::NotAFixedPoint { residual });
    }
    let lambdas: Vec<f64> = modes.iter().map(|m| m.0).collect();
    let residues: Vec<f64> = modes.iter().map(|m| m.1).collect();
    let r = lambdas.len();
    let (s11, s12, s22) = s_matrices(&lambdas);
    let mut e = DVector::zeros(r);
    for (i, &l) in lambdas.iter().enumerate() {
        let s = Complex64::new(-l, 0.0);
        e[i] = (eval_transfer(full, s, 2)? - eval_transfer(red, s, 2)?).re;
    }
    let r_mat = DMatrix::from_diagonal(&DVector::from_vec(residues.clone()));
    let e_mat = DMatrix::from_diagonal(&e);
    let k_mat = DMatrix::from_fn(r, r, |i, j| if i == j { e[i] / residues[i] } else { 0.0 });
    let s_c = schur_complement(&s11, &s12, &s22);
    let phi = &k_mat - &s_c;
    let m_mat = stack(&s11, &s12, &(&s22 - &k_mat));
    Ok(AnalysisMatrices {
        lambdas,
        residues,
        s11,
        s12,
        s22,
        r_mat,
        e_mat,
        k_mat,
        s_c,
        m_mat,
        phi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    AttractiveLocalMin,
    RepellentOrSaddle,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointCertificate {
    pub matrices: AnalysisMatrices,
    /// `-S_c^{-1} K`
    #[serde(with = "crate::serde_util::matrix")]
    pub jacobian: DMatrix<f64>,
    /// `R^{-1} S_c^{-1} E`, the Jacobian of the shift map in shift coordinates.
    #[serde(with = "crate::serde_util::matrix")]
    pub shift_map_jacobian: DMatrix<f64>,
    /// Central differences of the shift map at `s* = -lambda~`.
    #[serde(with = "crate::serde_util::matrix")]
    pub fd_jacobian: DMatrix<f64>,
    /// Eigenvalues `mu` of `K x = mu S_c x`, ascending.
    pub jacobian_eigs: Vec<f64>,
    /// Largest imaginary part among the eigenvalues of the unsymmetrized `S_c^{-1} K`.
    pub jacobian_eigs_max_imag: f64,
    pub spectral_radius: f64,
    pub e_positive: bool,
    pub s_tilde_positive: bool,
    pub s_c_positive: bool,
    pub neg_phi_positive: bool,
    pub fd_jacobian_maxdiff: f64,
    /// `max |(-Phi) - M / S11|` with the Schur complement taken from `m_mat`.
    pub schur_complement_maxdiff: f64,
    /// Largest residual of the Lyapunov identities satisfied by `S11`, `S12`, `S22`.
    pub lyapunov_residual: f64,
    pub optimality_residual: f64,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
}

/// Residuals of `L S11 + S11 L + u u^T = 0`, `L S12 + S12 L - S11 = 0`,
/// `L S22 + S22 L - 2 S12 = 0` with `L = diag(lambda~)`, `u = 1`.
pub fn lyapunov_identity_residual(m: &AnalysisMatrices) -> f64 {
    let r = m.lambdas.len();
    let l = DMatrix::from_diagonal(&DVector::from_vec(m.lambdas.clone()));
    let ones = DMatrix::from_element(r, r, 1.0);
    let r1 = &l * &m.s11 + &m.s11 * &l + ones;
    let r2 = &l * &m.s12 + &m.s12 * &l - &m.s11;
    let r3 = &l * &m.s22 + &m.s22 * &l - &m.s12 * 2.0;
    linalg::max_abs(&r1).max(linalg::max_abs(&r2)).max(linalg::max_abs(&r3))
}

/// Eigenvalues of `K x = mu S_c x` through `S_c = L L^T`; `None` if `S_c` is not SPD.
fn generalized_eigs(k: &DMatrix<f64>, s_c: &DMatrix<f64>) -> Option<Vec<f64>> {
    let sym = linalg::symmetrize(s_c);
    let d = equilibration(&sym)?;
    let chol = nalgebra::Cholesky::new(scaled(&sym, &d))?;
    // S_c = D^{-1} L L^T D^{-1}, so mu solves L^{-1} D K D L^{-T} y = mu y.
    let kd = scaled(&linalg::symmetrize(k), &d);
    let l = chol.l();
    let x = l.solve_lower_triangular(&kd)?;
    let y = l.solve_lower_triangular(&x.transpose())?;
    Some(linalg::sym_eigen(&y).0)
}

/// Central differences of [`shift_map`] around `center` (real positive shifts).
pub fn fd_shift_map_jacobian(full: &StateSpaceSystem, center: &[f64]) -> Result<DMatrix<f64>> {
    let r = center.len();
    let mut jac = DMatrix::zeros(r, r);
    for j in 0..r {
        let h = FD_STEP * center[j];
        let mut plus = center.to_vec();
        let mut minus = center.to_vec();
        plus[j] += h;
        minus[j] -= h;
        let fp = shift_map(full, &ShiftSet::real(&plus)?)?;
        let fm = shift_map(full, &ShiftSet::real(&minus)?)?;
        for i in 0..r {
            jac[(i, j)] = (fp.as_slice()[i].re - fm.as_slice()[i].re) / (2.0 * h);
        }
    }
    Ok(jac)
}

pub fn certify(full: &StateSpaceSystem, red: &StateSpaceSystem) -> Result<FixedPointCertificate> {
    let matrices = assemble(full, red)?;
    let r = matrices.lambdas.len();
    let k = &matrices.k_mat;
    let s_c = &matrices.s_c;
    let sc_inv_k = solve_symmetric(s_c, k);
    let jacobian = -&sc_inv_k;
    let sc_inv_e = solve_symmetric(s_c, &matrices.e_mat);
    let shift_map_jacobian =
        DMatrix::from_fn(r, r, |i, j| sc_inv_e[(i, j)] / matrices.residues[i]);

    let e_positive = matrices.e_mat.diagonal().iter().all(|&v| v > 0.0);
    let s_tilde_positive = linalg::is_positive_definite(&matrices.s_tilde());
    let s_c_positive = linalg::is_positive_definite(s_c);
    let neg_phi_positive = linalg::is_positive_definite(&(-&matrices.phi));

    let plain = linalg::eigenvalues(&sc_inv_k)?;
    let jacobian_eigs_max_imag = plain.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let jacobian_eigs = match generalized_eigs(k, s_c) {
        Some(mu) => mu,
        None => {
            let mut re: Vec<f64> = plain.iter().map(|z| z.re).collect();
            re.sort_by(f64::total_cmp);
            re
        }
    };
    let spectral_radius = plain
        .iter()
        .map(|z| z.norm())
        .chain(jacobian_eigs.iter().map(|m| m.abs()))
        .fold(0.0, f64::max);

    // Schur complement of M from its blocks, without reusing s_c.
    let m = &matrices.m_mat;
    let m11 = m.view((0, 0), (r, r)).into_owned();
    let m12 = m.view((0, r), (r, r)).into_owned();
    let m21 = m.view((r, 0), (r, r)).into_owned();
    let m22 = m.view((r, r), (r, r)).into_owned();
    let m_schur = m22 - m21 * solve_matrix(&m11, &m12);
    let schur_complement_maxdiff = linalg::max_abs(&(m_schur + &matrices.phi));

    let center: Vec<f64> = matrices.lambdas.iter().map(|l| -l).collect();
    let fd_jacobian = fd_shift_map_jacobian(full, &center)?;
    let fd_jacobian_maxdiff = linalg::max_abs(&(&fd_jacobian - &shift_map_jacobian));
    let mut warnings = Vec::new();
    if !(fd_jacobian_maxdiff <= FD_WARN) {
        warnings.push(format!(
            "FdMismatch: finite-difference Jacobian differs by {fd_jacobian_maxdiff:.3e}"
        ));
    }
    let verdict = if (spectral_radius - 1.0).abs() <= VERDICT_MARGIN {
        Verdict::Indeterminate
    } else if neg_phi_positive && spectral_radius < 1.0 - VERDICT_MARGIN {
        Verdict::AttractiveLocalMin
    } else {
        Verdict::RepellentOrSaddle
    };
    Ok(FixedPointCertificate {
        lyapunov_residual: lyapunov_identity_residual(&matrices),
        optimality_residual: optimality_residual(full, red)?,
        matrices,
        jacobian,
        shift_map_jacobian,
        fd_jacobian,
        jacobian_eigs,
        jacobian_eigs_max_imag,
        spectral_radius,
        e_positive,
        s_tilde_positive,
        s_c_positive,
        neg_phi_positive,
        fd_jacobian_maxdiff,
        schur_complement_maxdiff,
        verdict,
        warnings,
    })
}

/// `z^T S~ z` next to the integral `int_0^T [sum z_i e^{l_i t} - t sum z_{r+i} e^{l_i t}]^2 dt`.
pub fn verify_s_tilde_integral(lambdas: &[f64], z: &[f64]) -> Result<(f64, f64)> {
    let r = lambdas.len();
    if z.len() != 2 * r {
        return Err(Error::invalid("z", format!("length {} != 2r = {}", z.len(), 2 * r)));
    }
    if lambdas.iter().any(|l| !(*l < 0.0)) {
        return Err(Error::invalid("lambdas", "must be strictly negative"));
    }
    let (s11, s12, s22) = s_matrices(lambdas);
    let zv = DVector::from_column_slice(z);
    let quadratic_form = zv.dot(&(stack(&s11, &s12, &s22) * &zv));
    let weight: f64 = z.iter().map(|v| v.abs()).sum();
    if weight == 0.0 {
        return Ok((quadratic_form, 0.0));
    }
    let slowest = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bound = |t: f64| weight * weight * (1.0 + t).powi(2) * (2.0 * slowest * t).exp();
    let mut t_end = 1.0 / slowest.abs();
    while bound(t_end) >= 1e-14 * weight * weight {
        t_end *= 1.5;
    }
    let integrand = |t: f64| {
        let mut v = 0.0;
        for i in 0..r {
            let e = (lambdas[i] * t).exp();
            v += (z[i] - t * z[r + i]) * e;
        }
        v * v
    };
    let q = quadrature::integrate(integrand, 0.0, t_end, 1e-300, 1e-12, 4000);
    Ok((quadratic_form, q.value))
}
