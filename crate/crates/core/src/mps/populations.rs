//! Local-flip sector populations of an MPS relative to a product reference.
//!
//! The weight in the k-flips-from-reference sector is read off a generating
//! function: with M_i(θ) = |s_i⟩⟨s_i| + e^{iθ} |f_i⟩⟨f_i| (f_i the spinor
//! orthogonal to the reference s_i), G(θ) = ⟨ψ| ∏_i M_i(θ) |ψ⟩ = Σ_k p_k
//! e^{ikθ}. Sampling θ at the (n+1)-th roots of unity and inverting the DFT
//! yields every p_k in n+1 transfer contractions.

use super::{merge_left, merge_right, split_right, Mps};
use crate::error::{CoreError, Result};
use crate::models::{flip_spinor, LocalSpinor};
use crate::C64;
use ndarray::Array2;

fn weighted_transfer(mps: &Mps, reference: &[LocalSpinor], theta: f64) -> C64 {
    let phase = C64::new(0.0, theta).exp();
    let mut env = Array2::<C64>::ones((1, 1));
    for (t, sref) in mps.tensors.iter().zip(reference) {
        let f = flip_spinor(sref);
        let mut m = [[C64::new(0.0, 0.0); 2]; 2];
        for s in 0..2 {
            for sp in 0..2 {
                m[s][sp] = sref[s] * sref[sp].conj() + phase * f[s] * f[sp].conj();
            }
        }
        // Apply M to the ket tensor's physical leg.
        let (a, _, c) = t.dim();
        let mut tm = t.clone();
        for i in 0..a {
            for j in 0..c {
                let v0 = t[[i, 0, j]];
                let v1 = t[[i, 1, j]];
                tm[[i, 0, j]] = m[0][0] * v0 + m[0][1] * v1;
                tm[[i, 1, j]] = m[1][0] * v0 + m[1][1] * v1;
            }
        }
        let tmp = env.dot(&merge_right(&tm));
        let tmp = split_right(&tmp, c);
        let (ab, _, _) = tmp.dim();
        let tmp =
            Array2::from_shape_vec((ab * 2, c), tmp.iter().copied().collect()).unwrap();
        let bra = merge_left(t).mapv(|v| v.conj());
        env = bra.t().dot(&tmp);
    }
    env[[0, 0]]
}

/// Populations (p_0..p_k_max, p_rest) of the flip sectors relative to the
/// product reference. The state should be normalized; the reference spinors
/// must be unit length.
pub fn hamming_populations(
    mps: &Mps,
    reference: &[LocalSpinor],
    k_max: usize,
) -> Result<(Vec<f64>, f64)> {
    let n = mps.n();
    if reference.len() != n {
        return Err(CoreError::Invalid(format!(
            "reference has {} sites, state has {n}",
            reference.len()
        )));
    }
    for (i, s) in reference.iter().enumerate() {
        let nrm = (s[0].norm_sqr() + s[1].norm_sqr()).sqrt();
        if (nrm - 1.0).abs() > 1e-10 {
            return Err(CoreError::Invalid(format!(
                "reference spinor {i} is not normalized (|s| = {nrm})"
            )));
        }
    }
    let m = n + 1;
    let g: Vec<C64> = (0..m)
        .map(|j| weighted_transfer(mps, reference, 2.0 * std::f64::consts::PI * j as f64 / m as f64))
        .collect();
    let mut p = vec![0.0f64; m];
    for (k, pk) in p.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (j, gj) in g.iter().enumerate() {
            let ang = -2.0 * std::f64::consts::PI * (k * j) as f64 / m as f64;
            acc += *gj * C64::new(0.0, ang).exp();
        }
        let v = acc / m as f64;
        if v.im.abs() > 1e-8 || v.re < -1e-8 {
            return Err(CoreError::Numerical(format!(
                "flip-sector weight p_{k} = {v} is not a probability"
            )));
        }
        *pk = v.re.max(0.0);
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(CoreError::Numerical(format!(
            "flip-sector weights sum to {total}, expected 1 (state not normalized?)"
        )));
    }
    let k_top = k_max.min(n);
    let head = p[..=k_top].to_vec();
    let rest = p[k_top + 1..].iter().sum();
    Ok((head, rest))
}
