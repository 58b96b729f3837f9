//! Test-system generators. Every output is SSS.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::lti::StateSpaceSystem;

pub const DEFAULT_DELTA: f64 = 1e-2;

/// `A = -(G G^T + delta I)` with `G` standard normal scaled by `1/sqrt(n)`, and
/// `b = c` uniform in `[0.1, 1)`.
pub fn random_sss(n: usize, seed: u64, delta: f64) -> Result<StateSpaceSystem> {
    if n == 0 {
        return Err(Error::invalid("n", "must be positive"));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid("delta", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (n as f64).sqrt();
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal) * scale);
    let a = -linalg::symmetrize(&(&g * g.transpose())) - DMatrix::identity(n, n) * delta;
    let b = DVector::from_fn(n, |_, _| rng.random_range(0.1..1.0));
    StateSpaceSystem::new(a, b.clone(), b)
}

/// RC ladder of `n` nodes with unit capacitances and series resistance `resistance`, driven
/// and observed at the first node: `A = -(1/R) L` with `L` the path Laplacian plus a unit
/// ground conductance at node 1.
pub fn rc_ladder(n: usize, resistance: f64) -> Result<StateSpaceSystem> {
    if n == 0 {
        return Err(Error::invalid("n", "must be positive"));
    }
    if !(resistance > 0.0) || !resistance.is_finite() {
        return Err(Error::invalid("resistance", "must be positive"));
    }
    let g = 1.0 / resistance;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = if i + 1 == n { -g } else { -2.0 * g };
        if i + 1 < n {
            a[(i, i + 1)] = g;
            a[(i + 1, i)] = g;
        }
    }
    let mut b = DVector::zeros(n);
    b[0] = 1.0;
    StateSpaceSystem::new(a, b.clone(), b)
}

/// Diagonal SSS realization `A = diag(poles)`, `b = c = sqrt(residues)`.
pub fn diagonal(poles: &[f64], residues: &[f64]) -> Result<StateSpaceSystem> {
    if poles.is_empty() {
        return Err(Error::invalid("poles", "at least one pole required"));
    }
    if poles.len() != residues.len() {
        return Err(Error::invalid(
            "residues",
            format!("{} residues for {} poles", residues.len(), poles.len()),
        ));
    }
    if let Some(p) = poles.iter().find(|p| !(**p < 0.0)) {
        return Err(Error::invalid("poles", format!("{p} is not negative")));
    }
    if let Some(r) = residues.iter().find(|r| !(**r >= 0.0)) {
        return Err(Error::invalid("residues", format!("{r} is negative")));
    }
    let b: Vec<f64> = residues.iter().map(|r| r.sqrt()).collect();
    StateSpaceSystem::diagonal(poles, &b, &b)
}
