//! The IRKA fixed-point iteration: interpolate at `s`, reduce, mirror the reduced poles.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lti::StateSpaceSystem;
use crate::projection::{self, canonical_sort, HermiteResidual, ProjectionMode, ShiftSet};

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    MirrorSpectrumLogspace,
    RandomLoguniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrkaConfig {
    pub r: usize,
    pub tol: f64,
    pub max_sweeps: usize,
    pub init: InitStrategy,
    pub perturb_eps: f64,
}

impl IrkaConfig {
    pub fn new(r: usize) -> Self {
        IrkaConfig {
            r,
            tol: 1e-10,
            max_sweeps: 200,
            init: InitStrategy::MirrorSpectrumLogspace,
            perturb_eps: 1e-8,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.r == 0 || self.r >= n {
            return Err(Error::invalid("r", format!("r must be < n (r = {}, n = {n})", self.r)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        if self.max_sweeps == 0 {
            return Err(Error::invalid("max_sweeps", "must be at least 1"));
        }
        if !(self.perturb_eps > 0.0) {
            return Err(Error::invalid("perturb_eps", "must be positive"));
        }
        Ok(())
    }
}

/// Starting shifts on the positive real axis spanning `[min |Re lambda|, max |Re lambda|]`.
pub fn initial_shifts(
    sys: &StateSpaceSystem,
    r: usize,
    strategy: InitStrategy,
    seed: u64,
) -> Result<ShiftSet> {
    if r == 0 {
        return Err(Error::invalid("r", "must be positive"));
    }
    let eigs = sys.eigenvalues()?;
    if let Some(&eigenvalue) = eigs.iter().find(|z| !(z.re < 0.0)) {
        return Err(Error::UnstableSystem { eigenvalue });
    }
    let mut lo = eigs.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
    let mut hi = eigs.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    if hi <= lo * (1.0 + 1e-8) {
        lo /= 2.0;
        hi = 4.0 * lo;
    }
    let ratio = hi / lo;
    let values: Vec<f64> = match strategy {
        InitStrategy::MirrorSpectrumLogspace if r == 1 => vec![(lo * hi).sqrt()],
        InitStrategy::MirrorSpectrumLogspace => (0..r)
            .map(|k| lo * ratio.powf(k as f64 / (r - 1) as f64))
            .collect(),
        InitStrategy::RandomLoguniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out: Vec<f64> = Vec::with_capacity(r);
            while out.len() < r {
                let v = lo * ratio.powf(rng.random::<f64>());
                if out.iter().all(|&w| (v - w).abs() > 1e-8 * v.max(w)) {
                    out.push(v);
                }
            }
            out
        }
    };
    ShiftSet::real(&values)
}

fn mode_for(sys: &StateSpaceSystem) -> ProjectionMode {
    if sys.is_sss() {
        ProjectionMode::Symmetric
    } else {
        ProjectionMode::PetrovGalerkin
    }
}

/// Reduced model interpolating at `shifts` (symmetric projection for SSS input).
pub fn reduced_model(sys: &StateSpaceSystem, shifts: &ShiftSet) -> Result<StateSpaceSystem> {
    let basis = projection::build_bases(sys, shifts)?;
    projection::reduce(sys, &basis, mode_for(sys))
}

/// Reduced poles sorted so that their mirrors `-lambda` come out in canonical order.
pub fn reduced_poles(red: &StateSpaceSystem) -> Result<Vec<Complex64>> {
    let mut mirrored: Vec<Complex64> = if red.is_sss() {
        linalg::sym_eigen(red.a()).0.iter().map(|&v| Complex64::new(-v, 0.0)).collect()
    } else {
        red.eigenvalues()?.iter().map(|z| -z).collect()
    };
    canonical_sort(&mut mirrored);
    Ok(mirrored.into_iter().map(|z| -z).collect())
}

fn mirror(poles: &[Complex64]) -> Result<Vec<Complex64>> {
    let mirrored: Vec<Complex64> = poles.iter().map(|z| -z).collect();
    if let Some(&shift) = mirrored.iter().find(|z| !(z.re > 0.0)) {
        return Err(Error::MirroredShiftInvalid { shift });
    }
    Ok(mirrored)
}

/// One IRKA sweep: `s -> -lambda(A_r(s))` in canonical order.
pub fn shift_map(sys: &StateSpaceSystem, shifts: &ShiftSet) -> Result<ShiftSet> {
    let red = reduced_model(sys, shifts)?;
    ShiftSet::new(mirror(&reduced_poles(&red)?)?)
}

fn coincident(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= 1e-8 * a.norm().max(b.norm())
}

/// Separates shifts closer than `1e-8` relative by `+-eps |s|` along the real axis.
/// Returns whether anything moved.
fn separate(shifts: &mut Vec<Complex64>, eps: f64) -> bool {
    let mut moved = false;
    // A nearly real conjugate pair becomes two real shifts.
    let mut upper: Vec<Complex64> = Vec::with_capacity(shifts.len());
    let mut extra_real = Vec::new();
    for &z in shifts.iter() {
        if z.im < 0.0 {
            continue;
        }
        if z.im > 0.0 && coincident(z, z.conj()) {
            let d = eps * z.norm();
            extra_real.push(Complex64::new(z.re - d, 0.0));
            extra_real.push(Complex64::new(z.re + d, 0.0));
            moved = true;
        } else {
            upper.push(z);
        }
    }
    upper.extend(extra_real);
    for _ in 0..16 {
        canonical_sort(&mut upper);
        let clash = (0..upper.len().saturating_sub(1)).find(|&i| {
            (i + 1..upper.len()).any(|j| coincident(upper[i], upper[j]))
        });
        let Some(i) = clash else { break };
        let j = (i + 1..upper.len()).find(|&j| coincident(upper[i], upper[j])).expect("clash");
        let d = eps * upper[i].norm();
        upper[i].re -= d;
        upper[j].re += d;
        moved = true;
    }
    let mut out: Vec<Complex64> = Vec::with_capacity(shifts.len());
    for z in upper {
        out.push(z);
        if z.im > 0.0 {
            out.push(z.conj());
        }
    }
    canonical_sort(&mut out);
    *shifts = out;
    moved
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub shifts_in: ShiftSet,
    #[serde(with = "crate::serde_util::complex_vec")]
    pub reduced_poles: Vec<Complex64>,
    pub shift_change: f64,
    /// Coincident mirrored poles were pushed apart before the next sweep.
    pub perturbed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub trace_version: u32,
    pub sweeps: Vec<SweepRecord>,
    pub converged: bool,
    /// Shifts the final model interpolates at.
    pub final_shifts: ShiftSet,
    pub final_model: StateSpaceSystem,
    #[serde(with = "crate::serde_util::complex_vec")]
    pub final_poles: Vec<Complex64>,
    /// `max_i |s_i + lambda~_i| / (1 + |s_i|)` in canonical order.
    pub fixed_point_residual: f64,
    /// Hermite residuals of the final model at its own mirrored poles.
    pub optimality: Vec<HermiteResidual>,
    pub max_optimality_residual: f64,
}

impl IterationTrace {
    pub fn last_change(&self) -> f64 {
        self.sweeps.last().map_or(f64::INFINITY, |s| s.shift_change)
    }

    /// `Err(NotConverged)` for a trace that ran out of sweeps.
    pub fn ensure_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NotConverged {
                sweeps: self.sweeps.len(),
                last_change: self.last_change(),
            })
        }
    }

    /// Final shifts as `[re, im]` in canonical order.
    pub fn final_shift_values(&self) -> &[Complex64] {
        self.final_shifts.as_slice()
    }
}

/// Runs IRKA from `shifts0`. Running out of sweeps is not an error: the returned trace has
/// `converged == false` (see [`IterationTrace::ensure_converged`]).
pub fn run_irka(sys: &StateSpaceSystem, cfg: &IrkaConfig, shifts0: &ShiftSet) -> Result<IterationTrace> {
    cfg.validate(sys.order())?;
    if shifts0.len() != cfg.r {
        return Err(Error::invalid(
            "shifts",
            format!("{} initial shifts for r = {}", shifts0.len(), cfg.r),
        ));
    }
    if let Some(eigenvalue) = sys.unstable_eigenvalue()? {
        return Err(Error::UnstableSystem { eigenvalue });
    }
    let mut shifts = shifts0.clone();
    let mut sweeps = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_sweeps {
        let red = reduced_model(sys, &shifts)?;
        let poles = reduced_poles(&red)?;
        let mut next = mirror(&poles)?;
        let perturbed = separate(&mut next, cfg.perturb_eps);
        let next = ShiftSet::new(next)?;
        let shift_change = next.relative_change_from(&shifts);
        sweeps.push(SweepRecord {
            shifts_in: shifts,
            reduced_poles: poles,
            shift_change,
            perturbed,
        });
        shifts = next;
        if shift_change <= cfg.tol {
            converged = true;
            break;
        }
    }
    let final_model = reduced_model(sys, &shifts)?;
    let final_poles = reduced_poles(&final_model)?;
    let mirrored: Vec<Complex64> = final_poles.iter().map(|z| -z).collect();
    let fixed_point_residual = shifts
        .as_slice()
        .iter()
        .zip(&mirrored)
        .map(|(s, m)| (s - m).norm() / (1.0 + s.norm()))
        .fold(0.0, f64::max);
    let optimality = if mirrored.iter().all(|z| z.re > 0.0) {
        projection::check_hermite(sys, &final_model, &mirrored)?
    } else {
        Vec::new()
    };
    let max_optimality_residual = optimality
        .iter()
        .map(|h| h.value_residual.max(h.derivative_residual))
        .fold(0.0, f64::max);
    Ok(IterationTrace {
        trace_version: TRACE_VERSION,
        sweeps,
        converged,
        final_shifts: shifts,
        final_model,
        final_poles,
        fixed_point_residual,
        optimality,
        max_optimality_residual,
    })
}
