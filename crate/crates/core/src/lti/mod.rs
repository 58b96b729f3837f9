//! SISO state-space systems, transfer-function evaluation and the SSS/ZIP taxonomy.
//!
//! A system is `x' = A x + b u`, `y = c^T x` with transfer function
//! `H(s) = c^T (sI - A)^{-1} b`. State-space-symmetric (SSS) realizations have `A = A^T`
//! and `c = b`; ZIP transfer functions have distinct real negative poles with positive
//! residues.

mod io;

pub use io::{read_system_file, system_from_json, system_to_json, SystemFile};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ShiftedLu};

/// Asymmetry allowed in `A - A^T` and `b - c`, relative to `1 + max|A|`.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Residues at or below this fraction of the residue sum are treated as zero.
pub const MINIMALITY_TOL: f64 = 1e-12;
/// Relative separation below which two eigenvalues count as repeated.
pub const POLE_SEPARATION_TOL: f64 = 1e-10;
/// Reciprocal condition of `sI - A` below which `s` is treated as a pole.
pub const SINGULAR_SHIFT_RCOND: f64 = 1e-14;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Dense realization `(A, b, c)` of a SISO LTI system.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceSystem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
}

impl StateSpaceSystem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::invalid("n", "order must be positive"));
        }
        if a.ncols() != n {
            return Err(Error::invalid(
                "A",
                format!("expected {n}x{n}, got {}x{}", a.nrows(), a.ncols()),
            ));
        }
        if b.len() != n {
            return Err(Error::invalid("b", format!("expected length {n}, got {}", b.len())));
        }
        if c.len() != n {
            return Err(Error::invalid("c", format!("expected length {n}, got {}", c.len())));
        }
        for (name, finite) in [
            ("A", a.iter().all(|v| v.is_finite())),
            ("b", b.iter().all(|v| v.is_finite())),
            ("c", c.iter().all(|v| v.is_finite())),
        ] {
            if !finite {
                return Err(Error::invalid(name, "entries must be finite"));
            }
        }
        Ok(StateSpaceSystem { a, b, c })
    }

    /// Builds a system from row-major `A` rows.
    pub fn from_rows(a_rows: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<Self> {
        let n = a_rows.len();
        if let Some((i, row)) = a_rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::invalid(
                "A",
                format!("row {i} has {} entries, expected {n}", row.len()),
            ));
        }
        let a = DMatrix::from_fn(n, n, |i, j| a_rows[i][j]);
        Self::new(a, DVector::from_column_slice(b), DVector::from_column_slice(c))
    }

    /// Diagonal realization `A = diag(poles)`.
    pub fn diagonal(poles: &[f64], b: &[f64], c: &[f64]) -> Result<Self> {
        let a = DMatrix::from_diagonal(&DVector::from_column_slice(poles));
        Self::new(a, DVector::from_column_slice(b), DVector::from_column_slice(c))
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        if self.has_symmetric_a() {
            let (vals, _) = linalg::sym_eigen(&self.a);
            return Ok(vals.into_iter().map(|v| Complex64::new(v, 0.0)).collect());
        }
        linalg::eigenvalues(&self.a)
    }

    /// Returns the first eigenvalue with nonnegative real part, if any.
    pub fn unstable_eigenvalue(&self) -> Result<Option<Complex64>> {
        Ok(self.eigenvalues()?.into_iter().find(|z| z.re >= 0.0))
    }

    pub fn is_stable(&self) -> Result<bool> {
        Ok(self.unstable_eigenvalue()?.is_none())
    }

    pub fn asymmetry(&self) -> (f64, f64) {
        let a_asym = linalg::max_abs(&(&self.a - self.a.transpose()));
        let bc = (&self.b - &self.c).amax();
        (a_asym, bc)
    }

    fn has_symmetric_a(&self) -> bool {
        let scale = 1.0 + self.a.amax();
        linalg::max_abs(&(&self.a - self.a.transpose())) <= SYMMETRY_TOL * scale
    }

    /// `A = A^T` and `c = b` within [`SYMMETRY_TOL`].
    pub fn is_sss(&self) -> bool {
        let (a_asym, bc) = self.asymmetry();
        let a_scale = 1.0 + self.a.amax();
        let b_scale = 1.0 + self.b.amax().max(self.c.amax());
        a_asym <= SYMMETRY_TOL * a_scale && bc <= SYMMETRY_TOL * b_scale
    }

    /// `H(s)`, `H'(s)` or `H''(s)`.
    pub fn transfer(&self, s: Complex64, order: usize) -> Result<Complex64> {
        eval_transfer(self, s, order)
    }
}

/// Factorization of `sI - A` reused for every derivative order at one point.
#[derive(Debug, Clone)]
pub struct ResolventAt {
    s: Complex64,
    lu: ShiftedLu,
}

impl ResolventAt {
    pub fn new(sys: &StateSpaceSystem, s: Complex64) -> Result<Self> {
        let lu = ShiftedLu::new(&sys.a, s);
        let rcond = lu.rcond();
        if !(rcond >= SINGULAR_SHIFT_RCOND) {
            return Err(Error::SingularShift { shift: s, rcond });
        }
        Ok(ResolventAt { s, lu })
    }

    pub fn shift(&self) -> Complex64 {
        self.s
    }

    /// `(sI - A)^{-1} rhs`
    pub fn solve(&self, rhs: &DVector<Complex64>) -> DVector<Complex64> {
        self.lu.solve(rhs)
    }

    /// `(sI - A)^{-T} rhs`
    pub fn solve_transpose(&self, rhs: &DVector<Complex64>) -> DVector<Complex64> {
        self.lu.solve_transpose(rhs)
    }

    /// `[H(s), H'(s), ..., H^(max_order)(s)]` from repeated solves.
    pub fn derivatives(&self, sys: &StateSpaceSystem, max_order: usize) -> Vec<Complex64> {
        let c = linalg::to_complex(&sys.c);
        let mut x = linalg::to_complex(&sys.b);
        let mut out = Vec::with_capacity(max_order + 1);
        let mut factor = 1.0;
        for k in 0..=max_order {
            x = self.lu.solve(&x);
            if k > 0 {
                factor *= -(k as f64);
            }
            out.push(c.iter().zip(x.iter()).map(|(ci, xi)| ci * xi).sum::<Complex64>() * factor);
        }
        out
    }
}

/// Evaluates `H^(order)(s)` for `order` in `{0, 1, 2}`.
pub fn eval_transfer(sys: &StateSpaceSystem, s: Complex64, order: usize) -> Result<Complex64> {
    if order > 2 {
        return Err(Error::invalid("order", format!("must be 0, 1 or 2, got {order}")));
    }
    let res = ResolventAt::new(sys, s)?;
    Ok(res.derivatives(sys, order)[order])
}

/// Poles and residues of a strictly proper transfer function, `H(s) = sum phi_i / (s - lambda_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleResidueForm {
    #[serde(with = "crate::serde_util::complex_vec")]
    pub poles: Vec<Complex64>,
    #[serde(with = "crate::serde_util::complex_vec")]
    pub residues: Vec<Complex64>,
}

impl PoleResidueForm {
    pub fn new(poles: Vec<Complex64>, residues: Vec<Complex64>) -> Result<Self> {
        if poles.len() != residues.len() {
            return Err(Error::invalid(
                "residues",
                format!("{} residues for {} poles", residues.len(), poles.len()),
            ));
        }
        Ok(PoleResidueForm { poles, residues })
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    pub fn eval(&self, s: Complex64, order: usize) -> Complex64 {
        let mut fact = 1.0;
        for k in 1..=order {
            fact *= k as f64;
        }
        let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
        self.poles
            .iter()
            .zip(&self.residues)
            .map(|(&p, &r)| r / (s - p).powi(order as i32 + 1))
            .sum::<Complex64>()
            * (sign * fact)
    }

    /// Real diagonal realization when all poles and residues are real.
    ///
    /// Positive residues give an SSS realization `b = c = sqrt(phi)`; otherwise `b = 1, c = phi`.
    /// Complex conjugate pairs become 2x2 rotation blocks.
    pub fn realize(&self) -> Result<StateSpaceSystem> {
        let n = self.len();
        if n == 0 {
            return Err(Error::invalid("poles", "at least one pole required"));
        }
        let is_real = |z: &Complex64| z.im == 0.0;
        let all_real = self.poles.iter().all(is_real) && self.residues.iter().all(is_real);
        if all_real {
            let poles: Vec<f64> = self.poles.iter().map(|z| z.re).collect();
            let res: Vec<f64> = self.residues.iter().map(|z| z.re).collect();
            if res.iter().all(|&r| r >= 0.0) {
                let b: Vec<f64> = res.iter().map(|r| r.sqrt()).collect();
                return StateSpaceSystem::diagonal(&poles, &b, &b);
            }
            return StateSpaceSystem::diagonal(&poles, &vec![1.0; n], &res);
        }
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        let mut c = DVector::zeros(n);
        let mut used = vec![false; n];
        let mut k = 0;
        for i in 0..n {
            if used[i] {
                continue;
            }
            let (p, r) = (self.poles[i], self.residues[i]);
            used[i] = true;
            if p.im == 0.0 {
                if r.im != 0.0 {
                    return Err(Error::invalid("residues", format!("real pole {p} has complex residue {r}")));
                }
                a[(k, k)] = p.re;
                b[k] = 1.0;
                c[k] = r.re;
                k += 1;
                continue;
            }
            let partner = (0..n)
                .find(|&j| !used[j] && (self.poles[j] - p.conj()).norm() <= 1e-12 * (1.0 + p.norm()))
                .ok_or_else(|| Error::invalid("poles", format!("pole {p} lacks its conjugate")))?;
            if (self.residues[partner] - r.conj()).norm() > 1e-12 * (1.0 + r.norm()) {
                return Err(Error::invalid("residues", format!("residues of pair {p} are not conjugate")));
            }
            used[partner] = true;
            // (alpha + i beta)/(s - sigma - i omega) + conj  ==  c^T (sI - A)^{-1} b below
            let (sigma, omega) = (p.re, p.im);
            a[(k, k)] = sigma;
            a[(k, k + 1)] = omega;
            a[(k + 1, k)] = -omega;
            a[(k + 1, k + 1)] = sigma;
            b[k] = 1.0;
            c[k] = 2.0 * r.re;
            c[k + 1] = 2.0 * r.im;
            k += 2;
        }
        StateSpaceSystem::new(a, b, c)
    }
}

fn coincide(a: Complex64, b: Complex64, rel: f64) -> bool {
    (a - b).norm() <= rel * a.norm().max(b.norm())
}

fn check_distinct(poles: &[Complex64]) -> Result<()> {
    for i in 0..poles.len() {
        for j in i + 1..poles.len() {
            if coincide(poles[i], poles[j], POLE_SEPARATION_TOL) {
                return Err(Error::RepeatedPoles {
                    a: poles[i],
                    b: poles[j],
                });
            }
        }
    }
    Ok(())
}

/// Pole-residue form by diagonalization.
///
/// Symmetric `A` uses the orthonormal eigenbasis, `phi_i = (q_i^T b)(q_i^T c)`; general `A`
/// uses left/right eigenvectors from inverse iteration.
pub fn to_pole_residue(sys: &StateSpaceSystem) -> Result<PoleResidueForm> {
    if sys.has_symmetric_a() {
        let (vals, q) = linalg::sym_eigen(&sys.a);
        let poles: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        check_distinct(&poles)?;
        let qb = q.transpose() * &sys.b;
        let qc = q.transpose() * &sys.c;
        let residues = (0..vals.len())
            .map(|i| Complex64::new(qb[i] * qc[i], 0.0))
            .collect();
        return PoleResidueForm::new(poles, residues);
    }
    let mut poles = linalg::eigenvalues(&sys.a)?;
    poles.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    check_distinct(&poles)?;
    let mut residues = vec![C0; poles.len()];
    for i in 0..poles.len() {
        if poles[i].im < 0.0 {
            continue;
        }
        residues[i] = general_residue(sys, poles[i])?;
    }
    for i in 0..poles.len() {
        if poles[i].im < 0.0 {
            let target = poles[i].conj();
            let j = (0..poles.len())
                .filter(|&j| poles[j].im > 0.0)
                .min_by(|&x, &y| (poles[x] - target).norm().total_cmp(&(poles[y] - target).norm()))
                .ok_or(Error::EigenFailure)?;
            residues[i] = residues[j].conj();
        }
    }
    PoleResidueForm::new(poles, residues)
}

fn general_residue(sys: &StateSpaceSystem, lambda: Complex64) -> Result<Complex64> {
    let n = sys.order();
    let eps = 1e-10 * (1.0 + lambda.norm());
    let mu = lambda + Complex64::new(eps, 0.5 * eps);
    let lu = ShiftedLu::new(&sys.a, mu);
    let start = DVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.1 * i as f64, 0.05 * (i % 3) as f64));
    let mut v = start.clone();
    let mut w = start;
    for _ in 0..3 {
        v = lu.solve(&v);
        let nv = v.norm();
        v.unscale_mut(nv);
        w = lu.solve_transpose(&w);
        let nw = w.norm();
        w.unscale_mut(nw);
    }
    if !v.iter().chain(w.iter()).all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::EigenFailure);
    }
    let b = linalg::to_complex(&sys.b);
    let c = linalg::to_complex(&sys.c);
    let dot = |x: &DVector<Complex64>, y: &DVector<Complex64>| x.iter().zip(y.iter()).map(|(p, q)| p * q).sum::<Complex64>();
    let wv = dot(&w, &v);
    if wv.norm() == 0.0 {
        return Err(Error::RepeatedPoles { a: lambda, b: lambda });
    }
    Ok(dot(&c, &v) * dot(&w, &b) / wv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SystemClass {
    Sss,
    Zip,
    General,
}

/// Outcome of [`classify`]. `class` reports the strongest label; the flags are independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: SystemClass,
    pub sss: bool,
    pub zip: bool,
    pub stable: bool,
    pub a_asymmetry: f64,
    pub bc_mismatch: f64,
    /// Why the ZIP test failed, when it did.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zip_failure: Option<String>,
}

/// Minimal pole-residue data of the transfer function: negligible residues dropped,
/// repeated poles merged. Only valid for symmetric `A`.
fn merged_symmetric_modes(sys: &StateSpaceSystem) -> (Vec<f64>, Vec<f64>) {
    let (vals, q) = linalg::sym_eigen(&sys.a);
    let qb = q.transpose() * &sys.b;
    let qc = q.transpose() * &sys.c;
    let mut poles: Vec<f64> = Vec::new();
    let mut residues: Vec<f64> = Vec::new();
    for (i, &lam) in vals.iter().enumerate() {
        let phi = qb[i] * qc[i];
        match poles.last() {
            Some(&last) if (lam - last).abs() <= POLE_SEPARATION_TOL * lam.abs().max(last.abs()) => {
                *residues.last_mut().unwrap() += phi;
            }
            _ => {
                poles.push(lam);
                residues.push(phi);
            }
        }
    }
    let total: f64 = residues.iter().map(|r| r.abs()).sum();
    let keep: Vec<usize> = (0..poles.len())
        .filter(|&i| residues[i].abs() > MINIMALITY_TOL * total)
        .collect();
    (
        keep.iter().map(|&i| poles[i]).collect(),
        keep.iter().map(|&i| residues[i]).collect(),
    )
}

fn zip_failure(poles: &[Complex64], residues: &[Complex64]) -> Option<String> {
    if poles.is_empty() {
        return Some("transfer function is identically zero".into());
    }
    for (p, r) in poles.iter().zip(residues) {
        if p.im != 0.0 || p.re >= 0.0 {
            return Some(format!("pole {p} is not real negative"));
        }
        if r.im.abs() > 1e-12 * (1.0 + r.re.abs()) || r.re <= 0.0 {
            return Some(format!("residue {r} at pole {p} is not positive"));
        }
    }
    None
}

/// Labels a realization SSS, ZIP or GENERAL.
///
/// The ZIP test uses the residue characterization on the minimal transfer-function data:
/// distinct real negative poles with positive residues.
pub fn classify(sys: &StateSpaceSystem) -> Classification {
    let (a_asymmetry, bc_mismatch) = sys.asymmetry();
    let sss = sys.is_sss();
    let stable = sys.is_stable().unwrap_or(false);
    let zip_failure = if sys.has_symmetric_a() {
        let (poles, residues) = merged_symmetric_modes(sys);
        let poles: Vec<Complex64> = poles.into_iter().map(|p| Complex64::new(p, 0.0)).collect();
        let residues: Vec<Complex64> = residues.into_iter().map(|r| Complex64::new(r, 0.0)).collect();
        zip_failure(&poles, &residues)
    } else {
        match to_pole_residue(sys) {
            Ok(pr) => {
                let total: f64 = pr.residues.iter().map(|r| r.norm()).sum();
                let keep: Vec<usize> = (0..pr.len())
                    .filter(|&i| pr.residues[i].norm() > MINIMALITY_TOL * total)
                    .collect();
                let poles: Vec<Complex64> = keep.iter().map(|&i| pr.poles[i]).collect();
                let residues: Vec<Complex64> = keep.iter().map(|&i| pr.residues[i]).collect();
                zip_failure(&poles, &residues)
            }
            Err(e) => Some(e.to_string()),
        }
    };
    let zip = zip_failure.is_none();
    let class = if sss {
        SystemClass::Sss
    } else if zip {
        SystemClass::Zip
    } else {
        SystemClass::General
    };
    Classification {
        class,
        sss,
        zip,
        stable,
        a_asymmetry,
        bc_mismatch,
        zip_failure,
    }
}

/// Minimal SSS realization: diagonalize, drop unobservable modes, merge repeated poles.
///
/// The result is diagonal with `b = c = sqrt(phi)` and hence ZIP.
pub fn minimal_sss_realization(sys: &StateSpaceSystem) -> Result<StateSpaceSystem> {
    if !sys.is_sss() {
        let (a, bc) = sys.asymmetry();
        return Err(Error::NotSss(format!("max|A-A^T| = {a:.3e}, max|b-c| = {bc:.3e}")));
    }
    let (vals, _) = linalg::sym_eigen(&sys.a);
    if let Some(&top) = vals.iter().rev().find(|&&v| v >= 0.0) {
        return Err(Error::UnstableSystem {
            eigenvalue: Complex64::new(top, 0.0),
        });
    }
    let (poles, residues) = merged_symmetric_modes(sys);
    if poles.is_empty() {
        return Err(Error::invalid("b", "every mode is unobservable; transfer function is zero"));
    }
    let b: Vec<f64> = residues.iter().map(|r| r.max(0.0).sqrt()).collect();
    StateSpaceSystem::diagonal(&poles, &b, &b)
}
