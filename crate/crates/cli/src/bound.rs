//! Rigorous tail bound on the overlap with a distant eigenspace after a
//! local quench, together with its regime-of-validity check.

use adsweep_core::{CoreError, Result};
use serde::{Deserialize, Serialize};

/// Inputs of the overlap bound.
///
/// `lambda` is the energy of the pre-error state, `c` the largest energy
/// jump a single-qubit error can cause, and `f` the energy of the target
/// eigenspace. `dim` is the lattice dimension, `sigma` the interaction
/// range (correlation length), and `m` the number of local Hamiltonian
/// terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    pub lambda: f64,
    pub c: f64,
    pub f: f64,
    pub dim: u32,
    pub sigma: f64,
    pub m: u64,
}

/// Result of evaluating the bound: `root_pf` bounds √p_f, and `valid`
/// reports whether the premise |λ+c−f| > 2^D √(mσ) holds so the bound is
/// meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub root_pf: f64,
    pub exponent: f64,
    pub valid: bool,
}

/// Evaluate √p_f ≤ exp{ −[(λ+c−f)²σ]^{1/(D+1)} / (m^{1/(D+1)} D σ) }.
///
/// The exponent is never positive, so the bound always lies in (0, 1].
pub fn concentration_bound(q: &BoundQuery) -> Result<BoundResult> {
    if !(q.sigma > 0.0) || !q.sigma.is_finite() {
        return Err(CoreError::Invalid(format!(
            "correlation length must be positive, got {}",
            q.sigma
        )));
    }
    if q.m < 1 {
        return Err(CoreError::Invalid("term count m must be at least 1".into()));
    }
    if q.dim < 1 {
        return Err(CoreError::Invalid("lattice dimension must be at least 1".into()));
    }
    for (name, v) in [("lambda", q.lambda), ("c", q.c), ("f", q.f)] {
        if !v.is_finite() {
            return Err(CoreError::Invalid(format!("{name} must be finite, got {v}")));
        }
    }

    let gap = q.lambda + q.c - q.f;
    let d = f64::from(q.dim);
    let inv = 1.0 / (d + 1.0);
    let exponent = -((gap * gap * q.sigma).powf(inv)) / ((q.m as f64).powf(inv) * d * q.sigma);
    let root_pf = exponent.exp();
    let valid = gap.abs() > 2f64.powi(q.dim as i32) * (q.m as f64 * q.sigma).sqrt();
    Ok(BoundResult { root_pf, exponent, valid })
}
