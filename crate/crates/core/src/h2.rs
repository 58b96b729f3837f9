//! H2 norms and errors.
//!
//! Two independent routes for `||H - H_r||`: Gramians of the block-diagonal error realization,
//! and the pole-residue sum
//! `J = sum_i phi_i (H - H_r)(-lambda_i) - sum_j phi~_j (H - H_r)(-lambda~_j)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lti::{eval_transfer, to_pole_residue, StateSpaceSystem};
use crate::quadrature;

/// Relative separation below which a full and a reduced pole count as shared.
pub const POLE_COLLISION_TOL: f64 = 1e-8;
/// Below `CANCELLATION_FLOOR * (||H||^2 + ||H_r||^2)` the Gramian cross terms cancel to
/// roundoff and the error norm is recomputed on the imaginary axis.
pub const CANCELLATION_FLOOR: f64 = 1e-8;
const RESIDUAL_TOL: f64 = 1e-10;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// `A = U T U^H` with `T` upper triangular (diagonal for symmetric `A`).
struct Triangularized {
    u: DMatrix<Complex64>,
    t: DMatrix<Complex64>,
    diagonal: bool,
}

impl Triangularized {
    fn new(a: &DMatrix<f64>) -> Result<Self> {
        let tri = if *a == a.transpose() {
            let (vals, q) = linalg::sym_eigen(a);
            let n = vals.len();
            Triangularized {
                u: q.map(|v| Complex64::new(v, 0.0)),
                t: DMatrix::from_fn(n, n, |i, j| if i == j { Complex64::new(vals[i], 0.0) } else { C0 }),
                diagonal: true,
            }
        } else {
            let (u, t) = linalg::complex_schur(a)?;
            Triangularized { u, t, diagonal: false }
        };
        if let Some(&eigenvalue) = tri.t.diagonal().iter().find(|z| !(z.re < 0.0)) {
            return Err(Error::UnstableMatrix { eigenvalue });
        }
        Ok(tri)
    }
}

/// Solves `A X + X B^T + C = 0` from precomputed triangularizations.
fn sylvester_with(ta: &Triangularized, tb: &Triangularized, c: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = c.shape();
    let ct = ta.u.adjoint() * c.map(|v| Complex64::new(v, 0.0)) * &tb.u;
    // T Y + Y S^H + Ct = 0, filled from the bottom-right corner.
    let mut y = DMatrix::from_element(n, m, C0);
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            let mut acc = -ct[(i, j)];
            if !ta.diagonal {
                for k in i + 1..n {
                    acc -= ta.t[(i, k)] * y[(k, j)];
                }
            }
            if !tb.diagonal {
                for k in j + 1..m {
                    acc -= y[(i, k)] * tb.t[(j, k)].conj();
                }
            }
            y[(i, j)] = acc / (ta.t[(i, i)] + tb.t[(j, j)].conj());
        }
    }
    (&ta.u * y * tb.u.adjoint()).map(|z| z.re)
}

fn check_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    x: &DMatrix<f64>,
) -> Result<()> {
    let residual = linalg::max_abs(&(a * x + x * b.transpose() + c));
    let bound = RESIDUAL_TOL * (1.0 + linalg::max_abs(c));
    if !(residual <= bound) {
        return Err(Error::ResidualTooLarge { residual, bound });
    }
    Ok(())
}

/// Solves `A X + X B^T + C = 0` for stable `A` and `B`.
pub fn sylvester_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if c.nrows() != a.nrows() || c.ncols() != b.nrows() {
        return Err(Error::invalid("rhs", "dimensions do not match the coefficient matrices"));
    }
    let x = sylvester_with(&Triangularized::new(a)?, &Triangularized::new(b)?, c);
    check_residual(a, b, c, &x)?;
    Ok(x)
}

/// Solves `A P + P A^T + rhs = 0` for stable `A` and symmetric `rhs`.
pub fn lyapunov_solve(a: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() || rhs.shape() != a.shape() {
        return Err(Error::invalid("rhs", "must be square with the dimensions of A"));
    }
    let ta = Triangularized::new(a)?;
    let p = linalg::symmetrize(&sylvester_with(&ta, &ta, rhs));
    check_residual(a, a, rhs, &p)?;
    Ok(p)
}

/// `||H||_H2 = sqrt(c^T P c)` with `A P + P A^T + b b^T = 0`.
pub fn h2_norm(sys: &StateSpaceSystem) -> Result<f64> {
    let p = lyapunov_solve(sys.a(), &(sys.b() * sys.b().transpose()))?;
    Ok(sys.c().dot(&(p * sys.c())).max(0.0).sqrt())
}

/// Realization of `H - H_r`: `blockdiag(A, A_r)`, `[b; b_r]`, `[c; -c_r]`.
pub fn error_system(full: &StateSpaceSystem, red: &StateSpaceSystem) -> Result<StateSpaceSystem> {
    let (n, r) = (full.order(), red.order());
    let mut a = DMatrix::zeros(n + r, n + r);
    a.view_mut((0, 0), (n, n)).copy_from(full.a());
    a.view_mut((n, n), (r, r)).copy_from(red.a());
    let b = DVector::from_iterator(n + r, full.b().iter().chain(red.b().iter()).copied());
    let c = DVector::from_iterator(n + r, full.c().iter().copied().chain(red.c().iter().map(|v| -v)));
    StateSpaceSystem::new(a, b, c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H2ErrorReport {
    /// Best available estimate of `||H - H_r||_H2`.
    pub error_norm: f64,
    pub error_norm_gramian: f64,
    /// `None` when a full and a reduced pole collide or poles are repeated.
    pub error_norm_pole_residue: Option<f64>,
    /// `|gramian - pole_residue| / gramian`.
    pub route_discrepancy: Option<f64>,
    /// `error_norm / ||H||`, or the absolute error when `||H|| < 1e-14`.
    pub relative_h2_error: f64,
    /// Squared error from the pole-residue route (Gramian route if that was skipped).
    #[serde(rename = "cost_J")]
    pub cost_j: f64,
    pub full_norm: f64,
    pub reduced_norm: f64,
    pub pole_collision: bool,
    /// Set when the Gramian cross terms cancelled to roundoff and `error_norm` came from
    /// integrating `|H - H_r|^2` along the imaginary axis.
    pub frequency_refined: bool,
}

pub fn h2_error(full: &StateSpaceSystem, red: &StateSpaceSystem) -> Result<H2ErrorReport> {
    let tf = Triangularized::new(full.a())?;
    let tr = Triangularized::new(red.a())?;
    let bb = full.b() * full.b().transpose();
    let pf = sylvester_with(&tf, &tf, &bb);
    check_residual(full.a(), full.a(), &bb, &pf)?;
    let brbr = red.b() * red.b().transpose();
    let pr = sylvester_with(&tr, &tr, &brbr);
    check_residual(red.a(), red.a(), &brbr, &pr)?;
    let bbr = full.b() * red.b().transpose();
    let x = sylvester_with(&tf, &tr, &bbr);
    check_residual(full.a(), red.a(), &bbr, &x)?;

    let t11 = full.c().dot(&(&pf * full.c()));
    let t22 = red.c().dot(&(&pr * red.c()));
    let t12 = full.c().dot(&(&x * red.c()));
    let j_gram = (t11 - 2.0 * t12) + t22;
    let error_norm_gramian = j_gram.max(0.0).sqrt();
    let full_norm = t11.max(0.0).sqrt();
    let reduced_norm = t22.max(0.0).sqrt();

    let (j_pr, pole_collision) = match pole_residue_cost(full, red)? {
        PoleResidueCost::Value(j) => (Some(j), false),
        PoleResidueCost::Collision => (None, true),
        PoleResidueCost::Unavailable => (None, false),
    };
    let error_norm_pole_residue = j_pr.map(|j| j.max(0.0).sqrt());
    let route_discrepancy = error_norm_pole_residue
        .map(|e| (error_norm_gramian - e).abs() / (error_norm_gramian + 1e-300));

    let frequency_refined = j_gram < CANCELLATION_FLOOR * (t11.abs() + t22.abs());
    let error_norm = if frequency_refined {
        frequency_domain_error(full, red)?
    } else {
        error_norm_gramian
    };
    let relative_h2_error = if full_norm < 1e-14 {
        error_norm
    } else {
        error_norm / full_norm
    };
    Ok(H2ErrorReport {
        error_norm,
        error_norm_gramian,
        error_norm_pole_residue,
        route_discrepancy,
        relative_h2_error,
        cost_j: j_pr.unwrap_or(j_gram),
        full_norm,
        reduced_norm,
        pole_collision,
        frequency_refined,
    })
}

enum PoleResidueCost {
    Value(f64),
    Collision,
    Unavailable,
}

fn pole_residue_cost(full: &StateSpaceSystem, red: &StateSpaceSystem) -> Result<PoleResidueCost> {
    let (pf, pr) = match (to_pole_residue(full), to_pole_residue(red)) {
        (Ok(pf), Ok(pr)) => (pf, pr),
        _ => return Ok(PoleResidueCost::Unavailable),
    };
    for &l in &pf.poles {
        if pr.poles.iter().any(|&m| (l - m).norm() < POLE_COLLISION_TOL * (1.0 + l.norm())) {
            return Ok(PoleResidueCost::Collision);
        }
    }
    let gap = |s: Complex64| -> Result<Complex64> {
        Ok(eval_transfer(full, s, 0)? - eval_transfer(red, s, 0)?)
    };
    let mut j = C0;
    for (l, phi) in pf.poles.iter().zip(&pf.residues) {
        j += phi * gap(-l)?;
    }
    for (l, phi) in pr.poles.iter().zip(&pr.residues) {
        j -= phi * gap(-l)?;
    }
    Ok(PoleResidueCost::Value(j.re))
}

/// `sqrt((1/pi) int_0^inf |H(jw) - H_r(jw)|^2 dw)` with `w = w0 tan(theta)`.
fn frequency_domain_error(full: &StateSpaceSystem, red: &StateSpaceSystem) -> Result<f64> {
    let mags: Vec<f64> = full
        .eigenvalues()?
        .iter()
        .chain(red.eigenvalues()?.iter())
        .map(|z| z.norm())
        .collect();
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mags.iter().copied().fold(0.0, f64::max);
    let w0 = (lo * hi).sqrt();
    let integrand = |theta: f64| {
        let w = w0 * theta.tan();
        let s = Complex64::new(0.0, w);
        let e = match (eval_transfer(full, s, 0), eval_transfer(red, s, 0)) {
            (Ok(h), Ok(hr)) => (h - hr).norm_sqr(),
            _ => f64::NAN,
        };
        e * w0 / theta.cos().powi(2)
    };
    let scale = full.c().norm_squared() * full.b().norm_squared() / w0;
    let q = quadrature::integrate(
        integrand,
        0.0,
        std::f64::consts::FRAC_PI_2,
        1e-28 * scale,
        1e-10,
        400,
    );
    if !q.value.is_finite() {
        return Err(Error::SingularShift {
            shift: Complex64::new(0.0, 0.0),
            rcond: 0.0,
        });
    }
    Ok((q.value / std::f64::consts::PI).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn scalar_and_diagonal_lyapunov() {
        let p = lyapunov_solve(&DMatrix::from_element(1, 1, -1.0), &DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert!((p[(0, 0)] - 0.5).abs() < 1e-15);
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        let p = lyapunov_solve(&a, &DMatrix::from_element(2, 2, 1.0)).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.5, 1.0 / 3.0, 1.0 / 3.0, 0.25]);
        assert!(linalg::max_abs(&(p - expect)) < 1e-15);
    }

    #[test]
    fn nonsymmetric_lyapunov_residual() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[-1.0, 3.0, 0.0, 0.2, -3.0, -1.0, 0.5, 0.0, 0.0, 0.1, -2.0, 1.0, 0.4, 0.0, -1.0, -4.0],
        );
        let b = DVector::from_vec(vec![1.0, -0.5, 0.3, 2.0]);
        let rhs = &b * b.transpose();
        let p = lyapunov_solve(&a, &rhs).unwrap();
        let res = &a * &p + &p * a.transpose() + &rhs;
        assert!(linalg::max_abs(&res) < 1e-12);
        assert!(linalg::is_positive_definite(&(p + DMatrix::identity(4, 4) * 1e-12)));
    }

    #[test]
    fn unstable_matrix_rejected() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.5]));
        assert!(matches!(
            lyapunov_solve(&a, &DMatrix::identity(2, 2)),
            Err(Error::UnstableMatrix { .. })
        ));
    }

    #[test]
    fn h2_norm_examples() {
        let sys = StateSpaceSystem::diagonal(&[-1.0], &[1.0], &[1.0]).unwrap();
        assert!((h2_norm(&sys).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        let sys = StateSpaceSystem::diagonal(&[-1.0, -2.0], &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!(close(h2_norm(&sys).unwrap(), (17.0f64 / 12.0).sqrt(), 1e-14));
    }

    #[test]
    fn identical_copy_has_zero_error() {
        let sys = StateSpaceSystem::diagonal(&[-1.0, -2.0, -5.0], &[1.0, 0.5, 2.0], &[1.0, 0.5, 2.0]).unwrap();
        let rep = h2_error(&sys, &sys).unwrap();
        assert!(rep.error_norm < 1e-10, "{rep:?}");
        assert!(rep.pole_collision);
    }

    #[test]
    fn two_pole_routes_agree_with_closed_form() {
        let full = StateSpaceSystem::diagonal(&[-1.0, -2.0], &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        for &(lt, pt) in &[(-1.3f64, 1.7f64), (-0.2, 0.1), (-7.0, 3.0)] {
            let red = StateSpaceSystem::diagonal(&[lt], &[pt.sqrt()], &[pt.sqrt()]).unwrap();
            let rep = h2_error(&full, &red).unwrap();
            let poles = [-1.0, -2.0, lt];
            let res = [1.0, 1.0, -pt];
            let mut j = 0.0;
            for i in 0..3 {
                for k in 0..3 {
                    j += res[i] * res[k] / (-poles[i] - poles[k]);
                }
            }
            assert!(close(rep.cost_j, j, 1e-9), "{rep:?} {j}");
            assert!(close(rep.error_norm_gramian, j.sqrt(), 1e-9));
            assert!(rep.route_discrepancy.unwrap() < 1e-9);
        }
    }

    #[test]
    fn sylvester_matches_direct_check() {
        let a = DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -3.0]);
        let b = DMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, -2.0, -1.0, 0.0, 0.0, 0.0, -0.5]);
        let c = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, -1.0, 3.0, 0.5]);
        let x = sylvester_solve(&a, &b, &c).unwrap();
        assert!(linalg::max_abs(&(&a * &x + &x * b.transpose() + &c)) < 1e-13);
    }
}
