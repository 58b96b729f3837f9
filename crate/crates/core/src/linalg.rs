//! Dense kernels shared by the reduction and certification modules.
//!
//! Everything here works on small-to-moderate dense matrices (n up to about a thousand).
//! Factorizations are kept so that one LU of `sI - A` serves both `V` and `W` columns
//! and every derivative order of the transfer function.

use nalgebra::{ComplexField, DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// LU factorization with partial pivoting, `P M = L U`.
#[derive(Debug, Clone)]
pub struct Lu<T: ComplexField<RealField = f64>> {
    factors: DMatrix<T>,
    piv: Vec<usize>,
    norm1: f64,
    singular: bool,
}

impl<T: ComplexField<RealField = f64> + Copy> Lu<T> {
    pub fn new(m: &DMatrix<T>) -> Self {
        assert!(m.is_square(), "LU of a non-square matrix");
        let n = m.nrows();
        let norm1 = (0..n)
            .map(|j| m.column(j).iter().map(|x| x.modulus()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut a = m.clone();
        let mut piv = vec![0; n];
        let mut singular = false;
        for k in 0..n {
            let mut p = k;
            let mut best = a[(k, k)].modulus();
            for i in k + 1..n {
                let v = a[(i, k)].modulus();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            if best == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                a.swap_rows(k, p);
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                a[(i, k)] /= pivot;
            }
            for j in k + 1..n {
                let akj = a[(k, j)];
                if akj == T::zero() {
                    continue;
                }
                for i in k + 1..n {
                    let lik = a[(i, k)];
                    a[(i, j)] -= lik * akj;
                }
            }
        }
        Lu {
            factors: a,
            piv,
            norm1,
            singular,
        }
    }

    pub fn dim(&self) -> usize {
        self.factors.nrows()
    }

    /// Solves `M x = rhs`.
    pub fn solve(&self, rhs: &DVector<T>) -> DVector<T> {
        let n = self.dim();
        let a = &self.factors;
        let mut x = rhs.clone();
        for k in 0..n {
            x.swap_rows(k, self.piv[k]);
        }
        for j in 0..n {
            let xj = x[j];
            for i in j + 1..n {
                x[i] -= a[(i, j)] * xj;
            }
        }
        for j in (0..n).rev() {
            x[j] /= a[(j, j)];
            let xj = x[j];
            for i in 0..j {
                x[i] -= a[(i, j)] * xj;
            }
        }
        x
    }

    /// Solves `M^T x = rhs` (plain transpose, no conjugation).
    pub fn solve_transpose(&self, rhs: &DVector<T>) -> DVector<T> {
        let n = self.dim();
        let a = &self.factors;
        let mut x = rhs.clone();
        // U^T y = rhs
        for i in 0..n {
            let mut acc = x[i];
            for k in 0..i {
                acc -= a[(k, i)] * x[k];
            }
            x[i] = acc / a[(i, i)];
        }
        // L^T w = y
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in i + 1..n {
                acc -= a[(k, i)] * x[k];
            }
            x[i] = acc;
        }
        for k in (0..n).rev() {
            x.swap_rows(k, self.piv[k]);
        }
        x
    }

    fn solve_adjoint(&self, rhs: &DVector<T>) -> DVector<T> {
        self.solve_transpose(&rhs.map(|v| v.conjugate()))
            .map(|v| v.conjugate())
    }

    /// Reciprocal condition number estimate in the 1-norm (Hager/Higham estimator).
    pub fn rcond(&self) -> f64 {
        let n = self.dim();
        if self.singular || n == 0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        if self.norm1 == 0.0 {
            return 0.0;
        }
        let norm1 = |v: &DVector<T>| v.iter().map(|x| x.modulus()).sum::<f64>();
        let mut x = DVector::from_element(n, T::from_real(1.0 / n as f64));
        let mut y = self.solve(&x);
        let mut est = norm1(&y);
        for iter in 0..5 {
            let xi = y.map(|v| {
                if v.modulus() == 0.0 {
                    T::one()
                } else {
                    v.signum()
                }
            });
            let z = self.solve_adjoint(&xi);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.modulus()))
                .fold((0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            let ztx: f64 = z
                .iter()
                .zip(x.iter())
                .map(|(zi, xi)| (zi.conjugate() * *xi).real())
                .sum();
            if iter > 0 && zmax <= ztx {
                break;
            }
            x = DVector::from_element(n, T::zero());
            x[jmax] = T::one();
            y = self.solve(&x);
            let next = norm1(&y);
            if next <= est {
                break;
            }
            est = next;
        }
        // Alternating-sign probe catches cases where the power-style iteration stalls.
        if n > 1 {
            let alt = DVector::from_fn(n, |i, _| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                T::from_real(sign * (1.0 + i as f64 / (n - 1) as f64))
            });
            let est2 = 2.0 * norm1(&self.solve(&alt)) / (3.0 * n as f64);
            est = est.max(est2);
        }
        if !est.is_finite() || est == 0.0 {
            return 0.0;
        }
        1.0 / (self.norm1 * est)
    }
}

/// Factorization of `sI - A` for a real or complex shift.
#[derive(Debug, Clone)]
pub enum ShiftedLu {
    Real(Lu<f64>),
    Complex(Lu<Complex64>),
}

impl ShiftedLu {
    pub fn new(a: &DMatrix<f64>, s: Complex64) -> Self {
        let n = a.nrows();
        if s.im == 0.0 {
            let m = DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    s.re - a[(i, j)]
                } else {
                    -a[(i, j)]
                }
            });
            ShiftedLu::Real(Lu::new(&m))
        } else {
            let m = DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    s - a[(i, j)]
                } else {
                    Complex64::new(-a[(i, j)], 0.0)
                }
            });
            ShiftedLu::Complex(Lu::new(&m))
        }
    }

    pub fn rcond(&self) -> f64 {
        match self {
            ShiftedLu::Real(lu) => lu.rcond(),
            ShiftedLu::Complex(lu) => lu.rcond(),
        }
    }

    pub fn solve(&self, rhs: &DVector<Complex64>) -> DVector<Complex64> {
        match self {
            ShiftedLu::Real(lu) => {
                let re = lu.solve(&rhs.map(|z| z.re));
                if rhs.iter().all(|z| z.im == 0.0) {
                    re.map(|v| Complex64::new(v, 0.0))
                } else {
                    let im = lu.solve(&rhs.map(|z| z.im));
                    re.zip_map(&im, Complex64::new)
                }
            }
            ShiftedLu::Complex(lu) => lu.solve(rhs),
        }
    }

    pub fn solve_transpose(&self, rhs: &DVector<Complex64>) -> DVector<Complex64> {
        match self {
            ShiftedLu::Real(lu) => {
                let re = lu.solve_transpose(&rhs.map(|z| z.re));
                let im = lu.solve_transpose(&rhs.map(|z| z.im));
                re.zip_map(&im, Complex64::new)
            }
            ShiftedLu::Complex(lu) => lu.solve_transpose(rhs),
        }
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending and matching columns.
pub fn sym_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = symmetrize(a);
    let eig = SymmetricEigen::new(sym);
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Eigenvalues of a general real matrix (symmetric input takes the symmetric solver).
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if *a == a.transpose() {
        let (vals, _) = sym_eigen(a);
        return Ok(vals.into_iter().map(|v| Complex64::new(v, 0.0)).collect());
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 1000 * n.max(10)).ok_or(Error::EigenFailure)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Complex Schur form `A = U T U^H` with `T` upper triangular.
///
/// Starts from the real Schur form and splits each 2x2 block with a unitary rotation.
pub fn complex_schur(a: &DMatrix<f64>) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    let n = a.nrows();
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 1000 * n.max(10)).ok_or(Error::EigenFailure)?;
    let (q, t) = schur.unpack();
    let mut u = q.map(|v| Complex64::new(v, 0.0));
    let mut t = t.map(|v| Complex64::new(v, 0.0));
    for m in (1..n).rev() {
        if t[(m, m - 1)] == Complex64::new(0.0, 0.0) {
            continue;
        }
        let (p, q_, r, s) = (t[(m - 1, m - 1)], t[(m - 1, m)], t[(m, m - 1)], t[(m, m)]);
        let half_tr = (p + s) * 0.5;
        let disc = ((p - s) * 0.5).powi(2) + q_ * r;
        let mu = half_tr + disc.sqrt() - s;
        let rr = (mu.norm_sqr() + r.norm_sqr()).sqrt();
        let c = mu / rr;
        let sn = r / rr;
        // G = [[conj(c), conj(sn)], [-sn, c]]
        for j in (m - 1)..n {
            let x = t[(m - 1, j)];
            let y = t[(m, j)];
            t[(m - 1, j)] = c.conj() * x + sn.conj() * y;
            t[(m, j)] = -sn * x + c * y;
        }
        // right-multiply by G^H = [[c, -conj(sn)], [sn, conj(c)]]
        for i in 0..=m {
            let x = t[(i, m - 1)];
            let y = t[(i, m)];
            t[(i, m - 1)] = x * c + y * sn;
            t[(i, m)] = -x * sn.conj() + y * c.conj();
        }
        for i in 0..n {
            let x = u[(i, m - 1)];
            let y = u[(i, m)];
            u[(i, m - 1)] = x * c + y * sn;
            u[(i, m)] = -x * sn.conj() + y * c.conj();
        }
        t[(m, m - 1)] = Complex64::new(0.0, 0.0);
    }
    Ok((u, t))
}

/// Positive-definiteness test: Cholesky of the symmetrized matrix after unit-diagonal scaling.
pub fn is_positive_definite(b: &DMatrix<f64>) -> bool {
    let sym = symmetrize(b);
    let n = sym.nrows();
    if (0..n).any(|i| !(sym[(i, i)] > 0.0) || !sym[(i, i)].is_finite()) {
        return false;
    }
    let d: Vec<f64> = (0..n).map(|i| 1.0 / sym[(i, i)].sqrt()).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| sym[(i, j)] * d[i] * d[j]);
    nalgebra::Cholesky::new(scaled).is_some()
}

/// Orthonormal basis for the range of `v` by column-pivoted QR on unit-normalized columns.
pub fn orthonormal_basis(v: &DMatrix<f64>, rank_tol: f64) -> Result<DMatrix<f64>> {
    let (n, r) = v.shape();
    if r == 0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    let mut scaled = v.clone();
    for j in 0..r {
        let norm = scaled.column(j).norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::RankDeficientBasis {
                rank: 0,
                expected: r,
            });
        }
        scaled.column_mut(j).unscale_mut(norm);
    }
    let qr = nalgebra::ColPivQR::new(scaled);
    let rmat = qr.r();
    let k = n.min(r);
    let lead = rmat[(0, 0)].abs();
    let rank = (0..k)
        .filter(|&i| rmat[(i, i)].abs() > rank_tol * lead)
        .count();
    if rank < r {
        return Err(Error::RankDeficientBasis { rank, expected: r });
    }
    Ok(qr.q().columns(0, r).into_owned())
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn to_complex(v: &DVector<f64>) -> DVector<Complex64> {
    v.map(|x| Complex64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            4,
            4,
            &[
                4.0, -1.0, 0.5, 2.0, //
                1.0, 3.0, -2.0, 0.0, //
                0.0, 1.5, -1.0, 1.0, //
                2.0, 0.0, 1.0, 5.0,
            ],
        )
    }

    #[test]
    fn lu_solves_plain_and_transposed_systems() {
        let m = test_matrix();
        let lu = Lu::new(&m);
        let rhs = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let x = lu.solve(&rhs);
        assert!((&m * &x - &rhs).amax() < 1e-13);
        let y = lu.solve_transpose(&rhs);
        assert!((m.transpose() * &y - &rhs).amax() < 1e-13);
    }

    #[test]
    fn complex_lu_transpose_is_not_conjugated() {
        let m = test_matrix().map(|v| Complex64::new(v, 0.3 * v));
        let lu = Lu::new(&m);
        let rhs = DVector::from_fn(4, |i, _| Complex64::new(i as f64, 1.0 - i as f64));
        let y = lu.solve_transpose(&rhs);
        assert!((m.transpose() * &y - &rhs).camax() < 1e-13);
    }

    #[test]
    fn rcond_tracks_singularity() {
        let well = Lu::new(&DMatrix::<f64>::identity(5, 5)).rcond();
        assert!((well - 1.0).abs() < 1e-12);
        let mut m = DMatrix::<f64>::identity(3, 3);
        m[(2, 2)] = 1e-17;
        assert!(Lu::new(&m).rcond() < 1e-15);
        let zero = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(Lu::new(&zero).rcond(), 0.0);
    }

    #[test]
    fn rcond_estimate_is_within_a_small_factor() {
        let m = test_matrix();
        let inv = m.clone().try_inverse().unwrap();
        let norm1 = |a: &DMatrix<f64>| {
            (0..a.ncols())
                .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let exact = 1.0 / (norm1(&m) * norm1(&inv));
        let est = Lu::new(&m).rcond();
        assert!(est >= exact * 0.999 && est <= exact * 10.0, "{est} vs {exact}");
    }

    #[test]
    fn complex_schur_reconstructs_matrix() {
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 2.0, 0.0, 1.0, //
                -2.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, -1.0, 3.0, //
                0.0, 0.0, -3.0, -1.0,
            ],
        );
        let (u, t) = complex_schur(&m).unwrap();
        for i in 0..4 {
            for j in 0..i {
                assert!(t[(i, j)].norm() < 1e-14);
            }
        }
        let recon = &u * &t * u.adjoint();
        let err = (recon - m.map(|v| Complex64::new(v, 0.0))).camax();
        assert!(err < 1e-12, "{err}");
        let unit = u.adjoint() * &u - DMatrix::<Complex64>::identity(4, 4);
        assert!(unit.camax() < 1e-13);
    }

    #[test]
    fn orthonormal_basis_detects_rank_loss() {
        let v = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, 1.0, 2.0]);
        assert!(matches!(
            orthonormal_basis(&v, 1e-10),
            Err(Error::RankDeficientBasis { rank: 1, expected: 2 })
        ));
        let w = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 3.0]);
        let q = orthonormal_basis(&w, 1e-10).unwrap();
        assert!((q.transpose() * &q - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn positive_definite_test() {
        let pd = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(is_positive_definite(&pd));
        assert!(!is_positive_definite(&indef));
    }
}
