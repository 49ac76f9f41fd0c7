//! Quadratic (free-fermion) engine for the ZZXZ family on the Bz = 0 line.
//!
//! The chain maps onto 2n Majorana operators
//! c_{2i} = (∏_{j<i} X_j) Z_i and c_{2i+1} = (∏_{j<i} X_j) Y_i, so that
//! X_i = i c_{2i} c_{2i+1} and Z_i Z_{i+1} = i c_{2i+1} c_{2i+2}. The
//! Hamiltonian is H = (i/4) Σ_kl h_kl c_k c_l with a real antisymmetric
//! tridiagonal h (h[2i, 2i+1] = 2 Bx, h[2i+1, 2i+2] = 2 J).
//!
//! Gaussian states are tracked via the covariance matrix
//! Γ_kl = (i/2) ⟨[c_k, c_l]⟩, which is real antisymmetric and satisfies
//! Γ² = -1 for pure states. Time evolution is Γ ← e^{h dt} Γ e^{hᵀ dt};
//! the propagator is built as a banded Taylor series, which keeps each
//! step at O(n² · bandwidth) instead of O(n³).

use crate::error::{CoreError, Result};
use crate::models::{
    ModelFamily, ModelSpec, NoiseEvent, PauliAxis, SweepSchedule, noise_step_index, window_steps,
};
use crate::C64;
use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};

/// TFIM-line Hamiltonian in Majorana form; only (n, J, Bx) are needed
/// because h is tridiagonal with alternating entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MajoranaHamiltonian {
    pub n: usize,
    pub j: f64,
    pub bx: f64,
}

impl MajoranaHamiltonian {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        if spec.family != ModelFamily::Zzxz {
            return Err(CoreError::Invalid(
                "free-fermion engine requires the ZZXZ family".into(),
            ));
        }
        if spec.params.axial != 0.0 {
            return Err(CoreError::Invalid(format!(
                "free-fermion engine requires Bz = 0, got Bz = {}",
                spec.params.axial
            )));
        }
        Ok(MajoranaHamiltonian { n: spec.n, j: spec.params.j, bx: spec.params.bx })
    }

    pub fn set_couplings(&mut self, spec: &ModelSpec) -> Result<()> {
        let new = MajoranaHamiltonian::from_spec(spec)?;
        if new.n != self.n {
            return Err(CoreError::Invalid("set_couplings cannot change the chain".into()));
        }
        *self = new;
        Ok(())
    }

    /// Superdiagonal h[k, k+1] for k = 0..2n-2: field on even k, bond on odd.
    pub fn superdiag(&self, out: &mut [f64]) {
        for (k, v) in out.iter_mut().enumerate() {
            *v = if k % 2 == 0 { 2.0 * self.bx } else { 2.0 * self.j };
        }
    }

    /// Full 2n × 2n antisymmetric matrix.
    pub fn dense(&self) -> Array2<f64> {
        let m2 = 2 * self.n;
        let mut sup = vec![0.0; m2 - 1];
        self.superdiag(&mut sup);
        let mut h = Array2::<f64>::zeros((m2, m2));
        for (k, &v) in sup.iter().enumerate() {
            h[[k, k + 1]] = v;
            h[[k + 1, k]] = -v;
        }
        h
    }

    /// Max row sum of |h|, an operator-norm bound for the generator.
    pub fn max_row_sum(&self) -> f64 {
        2.0 * self.bx.abs() + 2.0 * self.j.abs()
    }

    /// ⟨H⟩ = (1/4) Σ h ∘ Γ, reduced to the superdiagonal band.
    pub fn energy(&self, state: &CovarianceState) -> f64 {
        let m2 = 2 * self.n;
        let mut e = 0.0;
        for k in 0..m2 - 1 {
            let hk = if k % 2 == 0 { 2.0 * self.bx } else { 2.0 * self.j };
            e += hk * state.gamma[[k, k + 1]];
        }
        0.5 * e
    }
}

/// Gaussian state of the chain.
#[derive(Debug, Clone)]
pub struct CovarianceState {
    pub n: usize,
    pub gamma: Array2<f64>,
    /// True when the ground space had zero modes and one member was chosen.
    pub ground_degenerate: bool,
}

/// Canonical decomposition h = R · blkdiag([[0, -ω], [ω, 0]]) · Rᵀ with R
/// orthogonal; ω sorted ascending (zero modes first).
pub struct CanonicalForm {
    pub omegas: Vec<f64>,
    pub r: Array2<f64>,
    pub n_zero: usize,
}

pub fn canonical_form(h: &Array2<f64>) -> Result<CanonicalForm> {
    let m2 = h.nrows();
    if m2 != h.ncols() || m2 % 2 != 0 || m2 == 0 {
        return Err(CoreError::Invalid(format!("h must be even square, got {m2}")));
    }
    let mut m = Array2::<C64>::zeros((m2, m2));
    for i in 0..m2 {
        for jx in 0..m2 {
            m[[i, jx]] = C64::new(0.0, h[[i, jx]]);
        }
    }
    let (evals, vecs) = m.eigh(UPLO::Lower)?;
    let scale = evals[m2 - 1].abs().max(1.0);

    // The backend's eigenvector conjugation convention varies with memory
    // layout; the reconstruction h = R D Rᵀ disambiguates it.
    let mut best: Option<CanonicalForm> = None;
    let mut best_defect = f64::INFINITY;
    for conjugate in [true, false] {
        let cf = assemble_modes(&evals, &vecs, conjugate, scale)?;
        let defect = reconstruction_defect(h, &cf);
        if defect < best_defect {
            best_defect = defect;
            best = Some(cf);
        }
        if best_defect <= 1e-8 * scale {
            break;
        }
    }
    if best_defect > 1e-8 * scale {
        return Err(CoreError::Numerical(format!(
            "canonical form does not reproduce h (defect {best_defect:.2e})"
        )));
    }
    Ok(best.unwrap())
}

fn assemble_modes(
    evals: &Array1<f64>,
    vecs: &Array2<C64>,
    conjugate: bool,
    scale: f64,
) -> Result<CanonicalForm> {
    let m2 = evals.len();
    let ztol = 1e-10 * scale;
    let im_sign = if conjugate { -1.0 } else { 1.0 };

    let zero_cols: Vec<usize> = (0..m2).filter(|&k| evals[k].abs() <= ztol).collect();
    if zero_cols.len() % 2 != 0 {
        return Err(CoreError::Numerical(format!(
            "odd zero-mode count {} in canonical form",
            zero_cols.len()
        )));
    }

    let mut r = Array2::<f64>::zeros((m2, m2));
    let mut omegas = Vec::with_capacity(m2 / 2);

    // Zero eigenspace is conjugation-closed: extract a real orthonormal
    // basis from the real and imaginary parts of its eigenvectors.
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(zero_cols.len());
    'fill: for &k in &zero_cols {
        let col = vecs.column(k);
        for part in 0..2 {
            let mut v: Array1<f64> = col
                .iter()
                .map(|c| if part == 0 { c.re } else { c.im })
                .collect();
            for _ in 0..2 {
                for b in &basis {
                    let d = b.dot(&v);
                    v.scaled_add(-d, b);
                }
            }
            let nrm = v.dot(&v).sqrt();
            if nrm > 1e-6 {
                basis.push(v / nrm);
            }
            if basis.len() == zero_cols.len() {
                break 'fill;
            }
        }
    }
    if basis.len() != zero_cols.len() {
        return Err(CoreError::Numerical(
            "could not span the zero-mode space with a real basis".into(),
        ));
    }
    for (idx, b) in basis.iter().enumerate() {
        r.column_mut(idx).assign(b);
    }
    for _ in 0..zero_cols.len() / 2 {
        omegas.push(0.0);
    }

    let mut col = zero_cols.len();
    let sqrt2 = std::f64::consts::SQRT_2;
    for k in 0..m2 {
        if evals[k] > ztol {
            let v = vecs.column(k);
            for i in 0..m2 {
                r[[i, col]] = sqrt2 * v[i].re;
                r[[i, col + 1]] = sqrt2 * im_sign * v[i].im;
            }
            omegas.push(evals[k]);
            col += 2;
        }
    }
    if col != m2 {
        return Err(CoreError::Numerical(format!(
            "canonical form found {col} of {m2} mode vectors"
        )));
    }

    // Near-degenerate ±ω doublets (ω below the eigensolver's resolution, e.g.
    // exponentially split edge modes deep in the ordered phase) come back
    // arbitrarily mixed, leaving Re/Im mode pairs skewed inside their plane.
    // One Gram-Schmidt sweep restores orthonormality without leaving that
    // plane; the reconstruction audit below remains the arbiter.
    for jx in 0..m2 {
        let mut v = r.column(jx).to_owned();
        for _ in 0..2 {
            for prev in 0..jx {
                let p = r.column(prev);
                let d = p.dot(&v);
                v.scaled_add(-d, &p);
            }
        }
        let nrm = v.dot(&v).sqrt();
        if nrm < 0.5 {
            return Err(CoreError::Numerical(format!(
                "mode vector {jx} collapsed while orthonormalizing (norm {nrm:.2e})"
            )));
        }
        r.column_mut(jx).assign(&(v / nrm));
    }

    let gram = r.t().dot(&r);
    let mut defect: f64 = 0.0;
    for i in 0..m2 {
        for jx in 0..m2 {
            let want = if i == jx { 1.0 } else { 0.0 };
            defect = defect.max((gram[[i, jx]] - want).abs());
        }
    }
    if defect > 1e-8 {
        return Err(CoreError::Numerical(format!(
            "canonical mode matrix not orthogonal (defect {defect:.2e})"
        )));
    }

    Ok(CanonicalForm { omegas, r, n_zero: zero_cols.len() / 2 })
}

/// max |R D Rᵀ - h| with D the canonical block-diagonal of the ω's.
fn reconstruction_defect(h: &Array2<f64>, cf: &CanonicalForm) -> f64 {
    let m2 = h.nrows();
    // D Rᵀ: row 2m = -ω_m y_mᵀ, row 2m+1 = ω_m x_mᵀ.
    let mut drt = Array2::<f64>::zeros((m2, m2));
    for (m, &w) in cf.omegas.iter().enumerate() {
        for jx in 0..m2 {
            drt[[2 * m, jx]] = -w * cf.r[[jx, 2 * m + 1]];
            drt[[2 * m + 1, jx]] = w * cf.r[[jx, 2 * m]];
        }
    }
    let rec = cf.r.dot(&drt);
    let mut defect: f64 = 0.0;
    for i in 0..m2 {
        for jx in 0..m2 {
            defect = defect.max((rec[[i, jx]] - h[[i, jx]]).abs());
        }
    }
    defect
}

/// Single-particle energies ω_k ≥ 0, ascending; the many-body spectrum is
/// E_gs + Σ_{k ∈ S} ω_k over occupation subsets S.
pub fn single_particle_energies(h: &MajoranaHamiltonian) -> Result<Vec<f64>> {
    Ok(canonical_form(&h.dense())?.omegas)
}

fn covariance_from_modes(r: &Array2<f64>, flip_first_block: bool) -> Array2<f64> {
    let m2 = r.nrows();
    // S = blkdiag([[0, 1], [-1, 0]]) · Rᵀ, then Γ = R · S.
    let mut s_mat = Array2::<f64>::zeros((m2, m2));
    for m in 0..m2 / 2 {
        let sign = if m == 0 && flip_first_block { -1.0 } else { 1.0 };
        let x = r.column(2 * m);
        let y = r.column(2 * m + 1);
        for jx in 0..m2 {
            s_mat[[2 * m, jx]] = sign * y[jx];
            s_mat[[2 * m + 1, jx]] = -sign * x[jx];
        }
    }
    r.dot(&s_mat)
}

/// Ground state at the given couplings, as (state, energy).
///
/// With zero modes the ground space is degenerate; the member with even
/// string parity (pf Γ = +1) is chosen deterministically.
pub fn ground_covariance(h: &MajoranaHamiltonian) -> Result<(CovarianceState, f64)> {
    let cf = canonical_form(&h.dense())?;
    let energy = -0.5 * cf.omegas.iter().sum::<f64>();
    let mut gamma = covariance_from_modes(&cf.r, false);
    let degenerate = cf.n_zero > 0;
    if degenerate && parity_sign(&gamma)? < 0.0 {
        gamma = covariance_from_modes(&cf.r, true);
    }
    Ok((CovarianceState { n: h.n, gamma, ground_degenerate: degenerate }, energy))
}

/// Conjugate Γ by a single Pauli: P c_k P = ±c_k, so Γ ← D Γ D with D the
/// sign pattern of the Pauli's (anti)commutation with each Majorana.
pub fn apply_pauli_error(state: &mut CovarianceState, site: usize, axis: PauliAxis) -> Result<()> {
    let m2 = 2 * state.n;
    if site >= state.n {
        return Err(CoreError::Invalid(format!(
            "site {site} out of range for n = {}",
            state.n
        )));
    }
    let mut d = vec![1.0f64; m2];
    match axis {
        PauliAxis::X => {
            d[2 * site] = -1.0;
            d[2 * site + 1] = -1.0;
        }
        PauliAxis::Y => {
            d[2 * site] = -1.0;
            for v in d.iter_mut().skip(2 * site + 2) {
                *v = -1.0;
            }
        }
        PauliAxis::Z => {
            d[2 * site + 1] = -1.0;
            for v in d.iter_mut().skip(2 * site + 2) {
                *v = -1.0;
            }
        }
    }
    for i in 0..m2 {
        for jx in 0..m2 {
            state.gamma[[i, jx]] *= d[i] * d[jx];
        }
    }
    Ok(())
}

pub fn apply_noise(state: &mut CovarianceState, ev: &NoiseEvent) -> Result<()> {
    if ev.enabled {
        apply_pauli_error(state, ev.site, ev.axis)?;
    }
    Ok(())
}

/// max |Γ² + 1|; zero for pure Gaussian states.
pub fn purity_defect(gamma: &Array2<f64>) -> f64 {
    let g2 = gamma.dot(gamma);
    let m2 = gamma.nrows();
    let mut defect: f64 = 0.0;
    for i in 0..m2 {
        for jx in 0..m2 {
            let want = if i == jx { -1.0 } else { 0.0 };
            defect = defect.max((g2[[i, jx]] - want).abs());
        }
    }
    defect
}

/// Sign of the Pfaffian of an antisymmetric matrix, which for a covariance
/// matrix equals the string parity ⟨∏_i X_i⟩ = ±1.
///
/// Householder reflections tridiagonalize Γ; pf then factorizes into the
/// superdiagonal pivots times det of the accumulated reflections.
pub fn parity_sign(gamma: &Array2<f64>) -> Result<f64> {
    let m2 = gamma.nrows();
    if m2 % 2 != 0 || m2 != gamma.ncols() {
        return Err(CoreError::Invalid("parity needs an even antisymmetric matrix".into()));
    }
    let mut a = gamma.clone();
    let mut reflections = 0usize;
    for k in 0..m2.saturating_sub(2) {
        let col = a.slice(s![k + 1.., k]).to_owned();
        let alpha = col.dot(&col).sqrt();
        if alpha < 1e-9 {
            // Only even columns carry Pfaffian pivots; a zero odd column
            // simply decouples two blocks.
            if k % 2 == 0 {
                return Err(CoreError::Numerical(format!(
                    "parity pivot {k} vanished (|col| = {alpha:.2e})"
                )));
            }
            continue;
        }
        let tail: f64 = col.slice(s![1..]).dot(&col.slice(s![1..]));
        if tail.sqrt() <= 1e-14 * alpha {
            continue;
        }
        let mut v = col;
        v[0] += if v[0] >= 0.0 { alpha } else { -alpha };
        let w = 2.0 / v.dot(&v);
        // Left: A[k+1.., :] ← H A[k+1.., :].
        {
            let sub = a.slice(s![k + 1.., ..]).to_owned();
            let t = v.dot(&sub);
            let mut subm = a.slice_mut(s![k + 1.., ..]);
            for (i, vi) in v.iter().enumerate() {
                let c = w * vi;
                for (jx, tj) in t.iter().enumerate() {
                    subm[[i, jx]] -= c * tj;
                }
            }
        }
        // Right: A[:, k+1..] ← A[:, k+1..] H.
        {
            let sub = a.slice(s![.., k + 1..]).to_owned();
            let t = sub.dot(&v);
            let mut subm = a.slice_mut(s![.., k + 1..]);
            for (i, ti) in t.iter().enumerate() {
                let c = w * ti;
                for (jx, vj) in v.iter().enumerate() {
                    subm[[i, jx]] -= c * vj;
                }
            }
        }
        reflections += 1;
    }
    let mut sign = if reflections % 2 == 0 { 1.0 } else { -1.0 };
    for m in 0..m2 / 2 {
        let p = a[[2 * m, 2 * m + 1]];
        if p.abs() < 1e-6 {
            return Err(CoreError::Numerical(format!(
                "parity pivot {m} ill-conditioned ({p:.2e})"
            )));
        }
        sign *= p.signum();
    }
    Ok(sign)
}

#[derive(Debug, Clone, Copy)]
pub struct CovEvolveOptions {
    /// Absolute cutoff terminating the propagator's Taylor tail.
    pub taylor_tol: f64,
    /// Max ‖h‖·dt per substep; larger steps are split.
    pub theta_max: f64,
    /// Bandwidth cap of the truncated propagator.
    pub bw_cap: usize,
    /// Steps between purity audits.
    pub purity_stride: usize,
    /// Purity defect treated as an integrator failure.
    pub purity_tol: f64,
}

impl Default for CovEvolveOptions {
    fn default() -> Self {
        CovEvolveOptions {
            taylor_tol: 1e-17,
            theta_max: 0.5,
            bw_cap: 40,
            purity_stride: 512,
            purity_tol: 1e-6,
        }
    }
}

/// Banded storage of O = exp(h τ) plus sandwich workspaces.
struct BandedPropagator {
    m2: usize,
    bw: usize,
    o: Array2<f64>,
    term: Array2<f64>,
    next: Array2<f64>,
    z: Array2<f64>,
    zt: Array2<f64>,
    w: Array2<f64>,
}

impl BandedPropagator {
    fn new(m2: usize) -> Self {
        let zeros = || Array2::<f64>::zeros((m2, m2));
        BandedPropagator {
            m2,
            bw: 0,
            o: zeros(),
            term: zeros(),
            next: zeros(),
            z: zeros(),
            zt: zeros(),
            w: zeros(),
        }
    }

    fn zero_band(mat: &mut Array2<f64>, bw: usize) {
        let m2 = mat.nrows();
        for i in 0..m2 {
            let lo = i.saturating_sub(bw);
            let hi = (i + bw + 1).min(m2);
            mat.slice_mut(s![i, lo..hi]).fill(0.0);
        }
    }

    /// O ← exp(h τ) with h tridiagonal (superdiagonal `sup`), truncated when
    /// the next term falls below `tol` in max norm.
    fn build(&mut self, sup: &[f64], tau: f64, tol: f64, bw_cap: usize) -> Result<()> {
        let m2 = self.m2;
        let prev = self.bw + 1;
        Self::zero_band(&mut self.o, prev.min(bw_cap + 1));
        Self::zero_band(&mut self.term, prev.min(bw_cap + 1));
        Self::zero_band(&mut self.next, prev.min(bw_cap + 1));
        for i in 0..m2 {
            self.o[[i, i]] = 1.0;
            self.term[[i, i]] = 1.0;
        }
        let mut bw_term = 0usize;
        for k in 1..=bw_cap {
            // next = h · term · (τ/k); h[i, i+1] = sup[i], h[i, i-1] = -sup[i-1].
            let c = tau / k as f64;
            let mut max_abs: f64 = 0.0;
            for i in 0..m2 {
                let lo = i.saturating_sub(bw_term + 1);
                let hi = (i + bw_term + 2).min(m2);
                for jx in lo..hi {
                    let up = if i + 1 < m2 { sup[i] * self.term[[i + 1, jx]] } else { 0.0 };
                    let dn = if i > 0 { -sup[i - 1] * self.term[[i - 1, jx]] } else { 0.0 };
                    let v = c * (up + dn);
                    self.next[[i, jx]] = v;
                    max_abs = max_abs.max(v.abs());
                }
            }
            bw_term += 1;
            std::mem::swap(&mut self.term, &mut self.next);
            for i in 0..m2 {
                let lo = i.saturating_sub(bw_term);
                let hi = (i + bw_term + 1).min(m2);
                for jx in lo..hi {
                    self.o[[i, jx]] += self.term[[i, jx]];
                }
            }
            if max_abs <= tol {
                self.bw = bw_term;
                return Ok(());
            }
        }
        Err(CoreError::Numerical(format!(
            "propagator band cap {bw_cap} exceeded; reduce dt"
        )))
    }

    /// out[i, :] = Σ_{|k-i| ≤ bw} O[i, k] · x[k, :].
    fn banded_mul(&self, x: &Array2<f64>, out: &mut Array2<f64>) {
        let m2 = self.m2;
        let bw = self.bw;
        let os = self.o.as_slice().expect("contiguous");
        let xs = x.as_slice().expect("contiguous");
        let outs = out.as_slice_mut().expect("contiguous");
        for i in 0..m2 {
            let orow = &mut outs[i * m2..(i + 1) * m2];
            orow.fill(0.0);
            let lo = i.saturating_sub(bw);
            let hi = (i + bw + 1).min(m2);
            for k in lo..hi {
                let c = os[i * m2 + k];
                if c != 0.0 {
                    let xrow = &xs[k * m2..(k + 1) * m2];
                    for (o, xv) in orow.iter_mut().zip(xrow) {
                        *o += c * *xv;
                    }
                }
            }
        }
    }

    /// Γ ← O Γ Oᵀ, exactly re-antisymmetrized.
    fn sandwich(&mut self, gamma: &mut Array2<f64>) {
        let m2 = self.m2;
        let mut z = std::mem::replace(&mut self.z, Array2::zeros((0, 0)));
        self.banded_mul(gamma, &mut z);
        for i in 0..m2 {
            for jx in 0..m2 {
                self.zt[[jx, i]] = z[[i, jx]];
            }
        }
        self.z = z;
        let mut w = std::mem::replace(&mut self.w, Array2::zeros((0, 0)));
        self.banded_mul(&self.zt.clone(), &mut w);
        // w = O Γᵀ Oᵀ = -Γ'; average the two skew halves.
        for i in 0..m2 {
            gamma[[i, i]] = 0.0;
            for jx in i + 1..m2 {
                let v = 0.5 * (w[[jx, i]] - w[[i, jx]]);
                gamma[[i, jx]] = v;
                gamma[[jx, i]] = -v;
            }
        }
        self.w = w;
    }
}

/// Evolve the covariance state along the schedule, applying `noise` at its
/// step boundary. Mirrors the dense engine's observer protocol: the observer
/// runs at every step boundary (after noise when they coincide) with
/// `(step_index, t, state)`.
pub fn evolve_covariance<F>(
    schedule: &SweepSchedule,
    state: &mut CovarianceState,
    noise: Option<&NoiseEvent>,
    opts: &CovEvolveOptions,
    mut observer: F,
) -> Result<()>
where
    F: FnMut(usize, f64, &CovarianceState) -> Result<()>,
{
    if state.n != schedule.n {
        return Err(CoreError::Invalid(format!(
            "state has {} sites, schedule has {}",
            state.n, schedule.n
        )));
    }
    if schedule.family != ModelFamily::Zzxz
        || schedule.vertices.iter().any(|v| v.axial != 0.0)
    {
        return Err(CoreError::Invalid(
            "free-fermion engine requires a ZZXZ schedule with Bz = 0".into(),
        ));
    }
    let total = schedule.total_duration();
    let steps = window_steps(0.0, total, schedule.dt)?;
    let noise_at = noise.and_then(|ev| noise_step_index(0.0, total, steps, ev));
    let mut ham = MajoranaHamiltonian::from_spec(&schedule.params_at_clamped(0.0))?;
    let m2 = 2 * schedule.n;
    let mut prop = BandedPropagator::new(m2);
    let mut sup = vec![0.0; m2 - 1];

    for k in 0..=steps {
        let t = k as f64 * schedule.dt;
        if noise_at == Some(k) {
            apply_noise(state, noise.unwrap())?;
        }
        observer(k, t, state)?;
        if k == steps {
            break;
        }
        let t_mid = t + 0.5 * schedule.dt;
        ham.set_couplings(&schedule.params_at_clamped(t_mid))?;
        let theta = ham.max_row_sum() * schedule.dt;
        let nsub = (theta / opts.theta_max).ceil().max(1.0) as usize;
        let tau = schedule.dt / nsub as f64;
        ham.superdiag(&mut sup);
        prop.build(&sup, tau, opts.taylor_tol, opts.bw_cap)?;
        for _ in 0..nsub {
            prop.sandwich(&mut state.gamma);
        }
        if opts.purity_stride > 0 && (k + 1) % opts.purity_stride == 0 {
            let defect = purity_defect(&state.gamma);
            if defect > opts.purity_tol {
                return Err(CoreError::Drift {
                    what: "covariance purity",
                    value: defect,
                    tol: opts.purity_tol,
                    t: t + schedule.dt,
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::DenseHamiltonian;
    use crate::models::Couplings;
    use approx::assert_abs_diff_eq;

    fn tfim(n: usize, j: f64, bx: f64) -> MajoranaHamiltonian {
        let spec = ModelSpec::new(ModelFamily::Zzxz, n, Couplings::zzxz(j, bx, 0.0)).unwrap();
        MajoranaHamiltonian::from_spec(&spec).unwrap()
    }

    #[test]
    fn rejects_axial_field() {
        let spec = ModelSpec::new(ModelFamily::Zzxz, 4, Couplings::zzxz(1.0, 1.0, 0.5)).unwrap();
        assert!(MajoranaHamiltonian::from_spec(&spec).is_err());
    }

    #[test]
    fn field_only_ground() {
        let h = tfim(3, 0.0, 1.0);
        let (state, e) = ground_covariance(&h).unwrap();
        assert_abs_diff_eq!(e, -3.0, epsilon = 1e-12);
        assert!(!state.ground_degenerate);
        assert_abs_diff_eq!(h.energy(&state), -3.0, epsilon = 1e-10);
        // Γ[2i, 2i+1] = ⟨X_i⟩ = -1 in the ground state of +Bx Σ X.
        for i in 0..3 {
            assert_abs_diff_eq!(state.gamma[[2 * i, 2 * i + 1]], -1.0, epsilon = 1e-10);
        }
        let omegas = single_particle_energies(&h).unwrap();
        for w in omegas {
            assert_abs_diff_eq!(w, 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn bond_only_ground_picks_even_parity() {
        let h = tfim(2, 1.0, 0.0);
        let (state, e) = ground_covariance(&h).unwrap();
        assert_abs_diff_eq!(e, -1.0, epsilon = 1e-12);
        assert!(state.ground_degenerate);
        assert_abs_diff_eq!(parity_sign(&state.gamma).unwrap(), 1.0, epsilon = 1e-12);
        assert!(purity_defect(&state.gamma) < 1e-10);
        let omegas = single_particle_energies(&h).unwrap();
        assert_abs_diff_eq!(omegas[0], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(omegas[1], 2.0, epsilon = 1e-10);
    }

    #[test]
    fn ground_energy_matches_dense_engine() {
        for (j, bx) in [(1.3, 0.8), (0.4, 1.1), (2.0, 1.0)] {
            let spec =
                ModelSpec::new(ModelFamily::Zzxz, 8, Couplings::zzxz(j, bx, 0.0)).unwrap();
            let ff = MajoranaHamiltonian::from_spec(&spec).unwrap();
            let (state, e_ff) = ground_covariance(&ff).unwrap();
            let (e_dense, _) = DenseHamiltonian::new(spec).unwrap().ground_state().unwrap();
            assert_abs_diff_eq!(e_ff, e_dense, epsilon = 1e-10);
            assert_abs_diff_eq!(ff.energy(&state), e_dense, epsilon = 1e-9);
            assert!(purity_defect(&state.gamma) < 1e-9);
        }
    }

    #[test]
    fn pauli_kick_energies_in_pure_field() {
        let h = tfim(5, 0.0, 1.0);
        let (ground, _) = ground_covariance(&h).unwrap();
        // X commutes with Σ X_i: no energy change.
        let mut s = ground.clone();
        apply_pauli_error(&mut s, 2, PauliAxis::X).unwrap();
        assert_abs_diff_eq!(h.energy(&s), -5.0, epsilon = 1e-10);
        // Y and Z flip one X eigenvalue: +2 Bx each.
        for axis in [PauliAxis::Y, PauliAxis::Z] {
            let mut s = ground.clone();
            apply_pauli_error(&mut s, 2, axis).unwrap();
            assert_abs_diff_eq!(h.energy(&s), -3.0, epsilon = 1e-10);
            assert!(purity_defect(&s.gamma) < 1e-9);
        }
    }

    #[test]
    fn pauli_kick_parity_flips() {
        let h = tfim(3, 0.0, 1.0);
        let (ground, _) = ground_covariance(&h).unwrap();
        // Each site sits in the X = -1 state, so ⟨∏ X⟩ = (-1)³.
        assert_abs_diff_eq!(parity_sign(&ground.gamma).unwrap(), -1.0, epsilon = 1e-12);
        let mut s = ground.clone();
        apply_pauli_error(&mut s, 1, PauliAxis::X).unwrap();
        assert_abs_diff_eq!(parity_sign(&s.gamma).unwrap(), -1.0, epsilon = 1e-12);
        for axis in [PauliAxis::Y, PauliAxis::Z] {
            let mut s = ground.clone();
            apply_pauli_error(&mut s, 1, axis).unwrap();
            assert_abs_diff_eq!(parity_sign(&s.gamma).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_hamiltonian_is_stationary() {
        let p = Couplings::zzxz(1.0, 1.0, 0.0);
        let sched = SweepSchedule::line(ModelFamily::Zzxz, 6, p, p, 2.0, 0.01).unwrap();
        let ham = tfim(6, 1.0, 1.0);
        let (mut state, e0) = ground_covariance(&ham).unwrap();
        evolve_covariance(&sched, &mut state, None, &CovEvolveOptions::default(), |_, _, _| {
            Ok(())
        })
        .unwrap();
        assert_abs_diff_eq!(ham.energy(&state), e0, epsilon = 1e-8);
        assert!(purity_defect(&state.gamma) < 1e-8);
    }

    #[test]
    fn sweep_tracks_dense_engine() {
        let sched = crate::models::default_tfim_sweep(4, 2.0, 0.01).unwrap();
        // Dense reference.
        let spinors = crate::models::initial_product(
            &sched,
            crate::models::InitialStateChoice::Auto,
        )
        .unwrap();
        let mut psi = crate::exact::DenseState::product(&spinors);
        let mut h_dense = DenseHamiltonian::new(sched.params_at_clamped(0.0)).unwrap();
        let mut dense_energies = Vec::new();
        crate::exact::evolve_dense(
            &sched,
            &mut psi,
            None,
            &crate::exact::EvolveOptions::default(),
            |k, t, st| {
                if k % 50 == 0 {
                    h_dense.set_params(sched.params_at_clamped(t))?;
                    dense_energies.push(h_dense.energy(st));
                }
                Ok(())
            },
        )
        .unwrap();
        // Covariance run.
        let mut ham = tfim(4, 0.0, 1.0);
        let (mut state, _) = ground_covariance(&ham).unwrap();
        let mut ff_energies = Vec::new();
        evolve_covariance(
            &sched,
            &mut state,
            None,
            &CovEvolveOptions::default(),
            |k, t, st| {
                if k % 50 == 0 {
                    ham.set_couplings(&sched.params_at_clamped(t))?;
                    ff_energies.push(ham.energy(st));
                }
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(dense_energies.len(), ff_energies.len());
        for (a, b) in dense_energies.iter().zip(&ff_energies) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-6);
        }
    }
}
