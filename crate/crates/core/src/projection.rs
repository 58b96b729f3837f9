//! Interpolatory projection bases and reduced models.
//!
//! For shifts `s_1..s_r`, `V` has columns `(s_j I - A)^{-1} b` and `W` has columns
//! `(s_j I - A)^{-T} c`. The Petrov-Galerkin model built from their ranges is a rational
//! Hermite interpolant of `H` at every shift. For SSS systems `V = W` and the one-sided
//! compression `A_r = Q^T A Q`, `b_r = c_r = Q^T b` gives the same transfer function while
//! staying SSS.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Lu};
use crate::lti::{ResolventAt, StateSpaceSystem, POLE_SEPARATION_TOL};

/// Rank threshold for the pivoted QR of unit-normalized basis columns.
pub const RANK_TOL: f64 = 1e-10;
/// Reciprocal condition of `W^T V` below which the oblique projection is refused.
pub const GRAMIAN_RCOND_TOL: f64 = 1e-13;
const CONJUGATE_TOL: f64 = 1e-12;

/// Sorts ascending by real part, then imaginary part.
pub fn canonical_sort(v: &mut [Complex64]) {
    v.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
}

/// Interpolation points, kept in canonical order and closed under conjugation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShiftSet {
    #[serde(with = "crate::serde_util::complex_vec")]
    shifts: Vec<Complex64>,
}

impl ShiftSet {
    pub fn new(mut shifts: Vec<Complex64>) -> Result<Self> {
        if shifts.is_empty() {
            return Err(Error::invalid("shifts", "at least one shift required"));
        }
        if shifts.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("shifts", "shifts must be finite"));
        }
        canonical_sort(&mut shifts);
        // Pair up conjugates and snap them to exact conjugates.
        let n = shifts.len();
        let mut paired = vec![false; n];
        for i in 0..n {
            if shifts[i].im <= 0.0 || paired[i] {
                continue;
            }
            let target = shifts[i].conj();
            let j = (0..n)
                .filter(|&j| !paired[j] && shifts[j].im < 0.0)
                .find(|&j| (shifts[j] - target).norm() <= CONJUGATE_TOL * (1.0 + target.norm()))
                .ok_or_else(|| {
                    Error::invalid("shifts", format!("{} has no conjugate partner", shifts[i]))
                })?;
            shifts[j] = target;
            paired[i] = true;
            paired[j] = true;
        }
        if let Some(k) = (0..n).find(|&k| shifts[k].im < 0.0 && !paired[k]) {
            return Err(Error::invalid("shifts", format!("{} has no conjugate partner", shifts[k])));
        }
        canonical_sort(&mut shifts);
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (shifts[i], shifts[j]);
                if (a - b).norm() <= POLE_SEPARATION_TOL * a.norm().max(b.norm()) {
                    return Err(Error::invalid("shifts", format!("{a} and {b} are not distinct")));
                }
            }
        }
        Ok(ShiftSet { shifts })
    }

    pub fn real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.shifts
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    pub fn is_real_positive(&self) -> bool {
        self.shifts.iter().all(|z| z.im == 0.0 && z.re > 0.0)
    }

    /// `max_i |new_i - old_i| / max_i |old_i|` in canonical order.
    pub fn relative_change_from(&self, old: &ShiftSet) -> f64 {
        if self.len() != old.len() {
            return f64::INFINITY;
        }
        let num = self
            .shifts
            .iter()
            .zip(&old.shifts)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let den = old.shifts.iter().map(|z| z.norm()).fold(0.0, f64::max);
        num / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    PetrovGalerkin,
    Symmetric,
}

/// Real interpolatory bases; conjugate shift pairs contribute real and imaginary parts.
#[derive(Debug, Clone)]
pub struct ProjectionBasis {
    pub v: DMatrix<f64>,
    pub w: DMatrix<f64>,
    /// Orthonormal basis of `range(V)`.
    pub q: DMatrix<f64>,
}

impl ProjectionBasis {
    pub fn order(&self) -> usize {
        self.v.ncols()
    }
}

pub fn build_bases(sys: &StateSpaceSystem, shifts: &ShiftSet) -> Result<ProjectionBasis> {
    let n = sys.order();
    let r = shifts.len();
    if r > n {
        return Err(Error::invalid("shifts", format!("{r} shifts exceed order {n}")));
    }
    let b = linalg::to_complex(sys.b());
    let c = linalg::to_complex(sys.c());
    let mut v = DMatrix::zeros(n, r);
    let mut w = DMatrix::zeros(n, r);
    let mut col = 0;
    for &s in shifts.as_slice() {
        if s.im < 0.0 {
            continue;
        }
        let res = ResolventAt::new(sys, s)?;
        let x = res.solve(&b);
        let y = res.solve_transpose(&c);
        v.set_column(col, &x.map(|z| z.re));
        w.set_column(col, &y.map(|z| z.re));
        col += 1;
        if s.im > 0.0 {
            v.set_column(col, &x.map(|z| z.im));
            w.set_column(col, &y.map(|z| z.im));
            col += 1;
        }
    }
    debug_assert_eq!(col, r);
    let q = linalg::orthonormal_basis(&v, RANK_TOL)?;
    linalg::orthonormal_basis(&w, RANK_TOL)?;
    Ok(ProjectionBasis { v, w, q })
}

/// Projected reduced model.
///
/// `PetrovGalerkin`: `A_r = (W^T V)^{-1} W^T A V`, `b_r = (W^T V)^{-1} W^T b`, `c_r = V^T c`,
/// evaluated on orthonormalized ranges. `Symmetric`: `A_r = Q^T A Q`, `b_r = Q^T b`,
/// `c_r = Q^T c` (exactly `b_r` for SSS input).
pub fn reduce(
    sys: &StateSpaceSystem,
    basis: &ProjectionBasis,
    mode: ProjectionMode,
) -> Result<StateSpaceSystem> {
    match mode {
        ProjectionMode::Symmetric => compress(sys, &basis.q),
        ProjectionMode::PetrovGalerkin => {
            let qv = linalg::orthonormal_basis(&basis.v, RANK_TOL)?;
            let qw = linalg::orthonormal_basis(&basis.w, RANK_TOL)?;
            let g = qw.transpose() * &qv;
            let lu = Lu::new(&g);
            let rcond = lu.rcond();
            if !(rcond >= GRAMIAN_RCOND_TOL) {
                return Err(Error::SingularGramian { rcond });
            }
            let wa = qw.transpose() * sys.a() * &qv;
            let r = g.nrows();
            let mut ar = DMatrix::zeros(r, r);
            for j in 0..r {
                ar.set_column(j, &lu.solve(&wa.column(j).into_owned()));
            }
            let br = lu.solve(&(qw.transpose() * sys.b()));
            let cr = qv.transpose() * sys.c();
            StateSpaceSystem::new(ar, br, cr)
        }
    }
}

/// One-sided compression `(Q^T A Q, Q^T b, Q^T c)` for a basis with orthonormal columns.
pub fn compress(sys: &StateSpaceSystem, q: &DMatrix<f64>) -> Result<StateSpaceSystem> {
    let mut ar = q.transpose() * sys.a() * q;
    let br: DVector<f64> = q.transpose() * sys.b();
    if sys.is_sss() {
        ar = linalg::symmetrize(&ar);
        return StateSpaceSystem::new(ar, br.clone(), br);
    }
    let cr = q.transpose() * sys.c();
    StateSpaceSystem::new(ar, br, cr)
}

/// Relative interpolation residuals at one shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HermiteResidual {
    #[serde(with = "complex_scalar")]
    pub shift: Complex64,
    pub value_residual: f64,
    pub derivative_residual: f64,
}

/// `|H(s_i) - H_r(s_i)| / (1 + |H(s_i)|)` and the same for first derivatives.
pub fn check_hermite(
    sys: &StateSpaceSystem,
    red: &StateSpaceSystem,
    shifts: &[Complex64],
) -> Result<Vec<HermiteResidual>> {
    shifts
        .iter()
        .map(|&s| {
            let full = ResolventAt::new(sys, s)?.derivatives(sys, 1);
            let reduced = ResolventAt::new(red, s)?.derivatives(red, 1);
            Ok(HermiteResidual {
                shift: s,
                value_residual: (full[0] - reduced[0]).norm() / (1.0 + full[0].norm()),
                derivative_residual: (full[1] - reduced[1]).norm() / (1.0 + full[1].norm()),
            })
        })
        .collect()
}

pub(crate) mod complex_scalar {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}
