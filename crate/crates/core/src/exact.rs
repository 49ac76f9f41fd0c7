//! Dense state-vector engine.
//!
//! States live in the computational Z basis with little-endian site order:
//! bit `i` of an amplitude index is site `i`, bit value 0 meaning spin up
//! (Z = +1). The propagator is a matrix-free Taylor expansion of
//! exp(-i H dt) with the Hamiltonian sampled at the step midpoint, so the
//! global error is O(dt²) while each step is resolved to machine precision.

use crate::error::{CoreError, Result};
use crate::models::{
    LocalSpinor, ModelFamily, ModelSpec, NoiseEvent, PauliAxis, SweepSchedule, flip_spinor,
    noise_step_index, window_steps,
};
use crate::C64;
use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};

/// Largest chain the dense propagator accepts (2^14 amplitudes).
pub const DENSE_EVOLVE_CAP: usize = 14;
/// Largest chain for full spectra (2^12 × 2^12 symmetric eigenproblems).
pub const DENSE_SPECTRUM_CAP: usize = 12;

#[derive(Debug, Clone)]
pub struct DenseState {
    pub n: usize,
    pub amps: Vec<C64>,
}

impl DenseState {
    pub fn from_amps(n: usize, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != 1 << n {
            return Err(CoreError::Invalid(format!(
                "amplitude count {} does not match n = {n}",
                amps.len()
            )));
        }
        Ok(DenseState { n, amps })
    }

    pub fn product(spinors: &[LocalSpinor]) -> Self {
        let n = spinors.len();
        let dim = 1usize << n;
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        for (x, a) in amps.iter_mut().enumerate() {
            let mut v = C64::new(1.0, 0.0);
            for (s, sp) in spinors.iter().enumerate() {
                v *= sp[(x >> s) & 1];
            }
            *a = v;
        }
        DenseState { n, amps }
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let nrm = self.norm();
        if nrm > 0.0 {
            let inv = 1.0 / nrm;
            for a in &mut self.amps {
                *a *= inv;
            }
        }
    }

    /// ⟨self|other⟩.
    pub fn overlap(&self, other: &DenseState) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// In-place single-site unitary, `u` row-major.
    pub fn apply_local(&mut self, site: usize, u: [[C64; 2]; 2]) {
        let m = 1usize << site;
        for x in 0..self.amps.len() {
            if x & m == 0 {
                let a0 = self.amps[x];
                let a1 = self.amps[x | m];
                self.amps[x] = u[0][0] * a0 + u[0][1] * a1;
                self.amps[x | m] = u[1][0] * a0 + u[1][1] * a1;
            }
        }
    }

    pub fn apply_pauli(&mut self, site: usize, axis: PauliAxis) {
        self.apply_local(site, axis.matrix());
    }

    pub fn apply_noise(&mut self, ev: &NoiseEvent) {
        if ev.enabled {
            self.apply_pauli(ev.site, ev.axis);
        }
    }
}

/// Matrix-free Hamiltonian: a cached diagonal plus structured off-diagonals.
#[derive(Debug, Clone)]
pub struct DenseHamiltonian {
    pub spec: ModelSpec,
    diag: Vec<f64>,
}

impl DenseHamiltonian {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        if spec.n > DENSE_EVOLVE_CAP {
            return Err(CoreError::Capacity {
                what: "dense engine",
                n: spec.n,
                cap: DENSE_EVOLVE_CAP,
            });
        }
        let mut h = DenseHamiltonian { spec, diag: vec![0.0; 1 << spec.n] };
        h.rebuild_diag();
        Ok(h)
    }

    pub fn set_params(&mut self, spec: ModelSpec) -> Result<()> {
        if spec.n != self.spec.n || spec.family != self.spec.family {
            return Err(CoreError::Invalid(
                "set_params cannot change the chain or family".into(),
            ));
        }
        self.spec = spec;
        self.rebuild_diag();
        Ok(())
    }

    fn rebuild_diag(&mut self) {
        let n = self.spec.n;
        let p = self.spec.params;
        let (zz, z_field) = match self.spec.family {
            ModelFamily::Zzxz => (p.j, p.axial),
            ModelFamily::HeisenbergX => (0.5 * p.axial, 0.0),
        };
        for (x, d) in self.diag.iter_mut().enumerate() {
            let mut e = 0.0;
            let mut z_prev = 1.0 - 2.0 * ((x & 1) as f64);
            e += z_field * z_prev;
            for s in 1..n {
                let z = 1.0 - 2.0 * (((x >> s) & 1) as f64);
                e += zz * z_prev * z + z_field * z;
                z_prev = z;
            }
            *d = e;
        }
    }

    pub fn norm_bound(&self) -> f64 {
        self.spec.norm_bound()
    }

    /// y = H x, allocation free.
    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let n = self.spec.n;
        let p = self.spec.params;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = x[i] * self.diag[i];
        }
        if p.bx != 0.0 {
            for s in 0..n {
                let m = 1usize << s;
                for i in 0..x.len() {
                    y[i] += x[i ^ m] * p.bx;
                }
            }
        }
        if self.spec.family == ModelFamily::HeisenbergX && p.j != 0.0 {
            // (J/2)(XX + YY) hops |01⟩ ↔ |10⟩ with amplitude J.
            for s in 0..n - 1 {
                let m0 = 1usize << s;
                let m1 = 1usize << (s + 1);
                let mask = m0 | m1;
                for i in 0..x.len() {
                    if (i & m0 == 0) != (i & m1 == 0) {
                        y[i] += x[i ^ mask] * p.j;
                    }
                }
            }
        }
    }

    /// Re⟨ψ|H|ψ⟩.
    pub fn energy(&self, psi: &DenseState) -> f64 {
        let mut y = vec![C64::new(0.0, 0.0); psi.amps.len()];
        self.apply_into(&psi.amps, &mut y);
        psi.amps
            .iter()
            .zip(&y)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    /// Full real symmetric matrix (spectrum-capped).
    pub fn matrix(&self) -> Result<Array2<f64>> {
        let n = self.spec.n;
        if n > DENSE_SPECTRUM_CAP {
            return Err(CoreError::Capacity {
                what: "dense spectrum",
                n,
                cap: DENSE_SPECTRUM_CAP,
            });
        }
        let dim = 1usize << n;
        let p = self.spec.params;
        let mut m = Array2::<f64>::zeros((dim, dim));
        for x in 0..dim {
            m[[x, x]] = self.diag[x];
            if p.bx != 0.0 {
                for s in 0..n {
                    m[[x ^ (1 << s), x]] += p.bx;
                }
            }
            if self.spec.family == ModelFamily::HeisenbergX && p.j != 0.0 {
                for s in 0..n - 1 {
                    let m0 = 1usize << s;
                    let m1 = 1usize << (s + 1);
                    if (x & m0 == 0) != (x & m1 == 0) {
                        m[[x ^ (m0 | m1), x]] += p.j;
                    }
                }
            }
        }
        Ok(m)
    }

    /// Ground energy and state by full diagonalization (spectrum-capped).
    pub fn ground_state(&self) -> Result<(f64, DenseState)> {
        let (evals, evecs) = self.matrix()?.eigh(UPLO::Lower)?;
        let amps = evecs.column(0).iter().map(|&v| C64::new(v, 0.0)).collect();
        Ok((evals[0], DenseState { n: self.spec.n, amps }))
    }

    /// All eigenvalues, ascending (spectrum-capped).
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let (evals, _) = self.matrix()?.eigh(UPLO::Lower)?;
        Ok(evals.to_vec())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Per-step norm drift treated as an integrator failure.
    pub drift_tol: f64,
    /// Relative tail bound terminating the Taylor series.
    pub taylor_tol: f64,
    /// Max ‖H‖·dt per substep; larger steps are split.
    pub theta_max: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { drift_tol: 1e-9, taylor_tol: 1e-16, theta_max: 0.5 }
    }
}

struct TaylorWorkspace {
    term: Vec<C64>,
    next: Vec<C64>,
}

impl TaylorWorkspace {
    fn new(dim: usize) -> Self {
        TaylorWorkspace {
            term: vec![C64::new(0.0, 0.0); dim],
            next: vec![C64::new(0.0, 0.0); dim],
        }
    }

    /// ψ ← exp(-i H τ) ψ via the series Σ (-iτ)^k H^k / k!.
    fn apply_exp(
        &mut self,
        h: &DenseHamiltonian,
        psi: &mut [C64],
        tau: f64,
        tol: f64,
    ) -> Result<()> {
        const MAX_TERMS: usize = 64;
        self.term.copy_from_slice(psi);
        for k in 1..=MAX_TERMS {
            h.apply_into(&self.term, &mut self.next);
            let c = C64::new(0.0, -tau / k as f64);
            let mut term_norm_sq = 0.0;
            for (t, nx) in self.term.iter_mut().zip(&self.next) {
                *t = c * nx;
                term_norm_sq += t.norm_sqr();
            }
            for (p, t) in psi.iter_mut().zip(&self.term) {
                *p += t;
            }
            let acc_norm_sq: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
            if term_norm_sq <= tol * tol * acc_norm_sq.max(1e-300) {
                return Ok(());
            }
        }
        Err(CoreError::Numerical(format!(
            "propagator series did not converge within {MAX_TERMS} terms (|H|·dt too large)"
        )))
    }
}

/// Evolve `psi` along the schedule, applying `noise` at its step boundary.
///
/// The observer runs at every step boundary (after the noise event when both
/// land on the same boundary) with `(step_index, t, state)`; step 0 is the
/// initial state.
pub fn evolve_dense<F>(
    schedule: &SweepSchedule,
    psi: &mut DenseState,
    noise: Option<&NoiseEvent>,
    opts: &EvolveOptions,
    mut observer: F,
) -> Result<()>
where
    F: FnMut(usize, f64, &DenseState) -> Result<()>,
{
    if psi.n != schedule.n {
        return Err(CoreError::Invalid(format!(
            "state has {} sites, schedule has {}",
            psi.n, schedule.n
        )));
    }
    if schedule.n > DENSE_EVOLVE_CAP {
        return Err(CoreError::Capacity {
            what: "dense engine",
            n: schedule.n,
            cap: DENSE_EVOLVE_CAP,
        });
    }
    let total = schedule.total_duration();
    let steps = window_steps(0.0, total, schedule.dt)?;
    let noise_at = noise.and_then(|ev| noise_step_index(0.0, total, steps, ev));
    let mut h = DenseHamiltonian::new(schedule.params_at_clamped(0.0))?;
    let mut ws = TaylorWorkspace::new(psi.amps.len());

    for k in 0..=steps {
        let t = k as f64 * schedule.dt;
        if noise_at == Some(k) {
            psi.apply_noise(noise.unwrap());
        }
        observer(k, t, psi)?;
        if k == steps {
            break;
        }
        let t_mid = t + 0.5 * schedule.dt;
        h.set_params(schedule.params_at_clamped(t_mid))?;
        let bound = h.norm_bound().max(1e-12);
        let nsub = ((bound * schedule.dt) / opts.theta_max).ceil().max(1.0) as usize;
        let tau = schedule.dt / nsub as f64;
        for _ in 0..nsub {
            ws.apply_exp(&h, &mut psi.amps, tau, opts.taylor_tol)?;
        }
        let nrm = psi.norm();
        if (nrm - 1.0).abs() > opts.drift_tol {
            return Err(CoreError::Drift {
                what: "state norm",
                value: (nrm - 1.0).abs(),
                tol: opts.drift_tol,
                t: t + schedule.dt,
            });
        }
        let inv = 1.0 / nrm;
        for a in &mut psi.amps {
            *a *= inv;
        }
    }
    Ok(())
}

/// Instantaneous spectrum with the state's populations in that eigenbasis.
/// `groups` lists (start, len) runs of degenerate eigenvalues.
#[derive(Debug, Clone)]
pub struct SpectrumSnapshot {
    pub t: f64,
    pub eigenvalues: Vec<f64>,
    pub populations: Vec<f64>,
    pub groups: Vec<(usize, usize)>,
}

impl SpectrumSnapshot {
    /// Total population of the ground (possibly degenerate) eigenspace.
    pub fn ground_fidelity(&self) -> f64 {
        let (start, len) = self.groups[0];
        self.populations[start..start + len].iter().sum()
    }

    /// Population summed over each degenerate group, in energy order.
    pub fn group_populations(&self) -> Vec<f64> {
        self.groups
            .iter()
            .map(|&(s, l)| self.populations[s..s + l].iter().sum())
            .collect()
    }
}

/// Runs of eigenvalues equal to within a 1e-9 relative tolerance.
pub fn degeneracy_groups(evals: &[f64]) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=evals.len() {
        let split = i == evals.len() || {
            let gap = evals[i] - evals[i - 1];
            gap > 1e-9 * evals[i].abs().max(1.0)
        };
        if split {
            groups.push((start, i - start));
            start = i;
        }
    }
    groups
}

/// Diagonalize H and project `psi` onto its eigenbasis.
pub fn spectrum_populations(
    h: &DenseHamiltonian,
    psi: &DenseState,
    t: f64,
) -> Result<SpectrumSnapshot> {
    let (evals, evecs) = h.matrix()?.eigh(UPLO::Lower)?;
    let psi_arr = Array1::from_iter(psi.amps.iter().copied());
    let mut populations = Vec::with_capacity(evals.len());
    for m in 0..evals.len() {
        let col = evecs.column(m);
        let mut dot = C64::new(0.0, 0.0);
        for (v, a) in col.iter().zip(psi_arr.iter()) {
            dot += a * *v;
        }
        populations.push(dot.norm_sqr());
    }
    let evals = evals.to_vec();
    let groups = degeneracy_groups(&evals);
    Ok(SpectrumSnapshot { t, eigenvalues: evals, populations, groups })
}

/// Populations of the k-local-flip sectors relative to a product reference:
/// rotate each site so the reference spinor becomes |0⟩, then bin weight by
/// Hamming weight. Returns (p_0..p_k_max, p_rest).
pub fn excitation_populations(
    psi: &DenseState,
    reference: &[LocalSpinor],
    k_max: usize,
) -> Result<(Vec<f64>, f64)> {
    if reference.len() != psi.n {
        return Err(CoreError::Invalid(format!(
            "reference has {} sites, state has {}",
            reference.len(),
            psi.n
        )));
    }
    let mut rotated = psi.clone();
    for (s, sp) in reference.iter().enumerate() {
        let f = flip_spinor(sp);
        let u = [
            [sp[0].conj(), sp[1].conj()],
            [f[0].conj(), f[1].conj()],
        ];
        rotated.apply_local(s, u);
    }
    let mut pops = vec![0.0; k_max.min(psi.n) + 1];
    let mut rest = 0.0;
    for (x, a) in rotated.amps.iter().enumerate() {
        let k = x.count_ones() as usize;
        let w = a.norm_sqr();
        if k < pops.len() {
            pops[k] += w;
        } else {
            rest += w;
        }
    }
    Ok((pops, rest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Couplings, initial_product, InitialStateChoice};
    use approx::assert_abs_diff_eq;

    fn spec(family: ModelFamily, n: usize, params: Couplings) -> ModelSpec {
        ModelSpec::new(family, n, params).unwrap()
    }

    #[test]
    fn two_site_zz_spectrum() {
        let h = DenseHamiltonian::new(spec(ModelFamily::Zzxz, 2, Couplings::zzxz(1.0, 0.0, 0.0)))
            .unwrap();
        let e = h.eigenvalues().unwrap();
        let want = [-1.0, -1.0, 1.0, 1.0];
        for (a, b) in e.iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_site_field_spectrum() {
        let h = DenseHamiltonian::new(spec(ModelFamily::Zzxz, 2, Couplings::zzxz(0.0, 1.0, 0.0)))
            .unwrap();
        let e = h.eigenvalues().unwrap();
        let want = [-2.0, 0.0, 0.0, 2.0];
        for (a, b) in e.iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_site_heisenberg_spectrum() {
        let h = DenseHamiltonian::new(spec(
            ModelFamily::HeisenbergX,
            2,
            Couplings::heisenberg_x(1.0, 1.0, 0.0),
        ))
        .unwrap();
        let e = h.eigenvalues().unwrap();
        let want = [-1.5, 0.5, 0.5, 0.5];
        for (a, b) in e.iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn matrix_matches_apply() {
        let h = DenseHamiltonian::new(spec(
            ModelFamily::HeisenbergX,
            4,
            Couplings::heisenberg_x(0.8, -0.4, 0.6),
        ))
        .unwrap();
        let m = h.matrix().unwrap();
        // Symmetry.
        for i in 0..16 {
            for j in 0..16 {
                assert_abs_diff_eq!(m[[i, j]], m[[j, i]], epsilon = 1e-14);
            }
        }
        // Matrix-free apply agrees column by column.
        let mut x = vec![C64::new(0.0, 0.0); 16];
        let mut y = vec![C64::new(0.0, 0.0); 16];
        for j in 0..16 {
            x.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            x[j] = C64::new(1.0, 0.0);
            h.apply_into(&x, &mut y);
            for i in 0..16 {
                assert_abs_diff_eq!(y[i].re, m[[i, j]], epsilon = 1e-14);
                assert_abs_diff_eq!(y[i].im, 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn pauli_applications_are_involutions() {
        let sched = crate::models::default_zzxz_sweep(3, 1.0, 0.1).unwrap();
        let sp = initial_product(&sched, InitialStateChoice::Auto).unwrap();
        let psi0 = DenseState::product(&sp);
        for axis in [PauliAxis::X, PauliAxis::Y, PauliAxis::Z] {
            let mut psi = psi0.clone();
            psi.apply_pauli(1, axis);
            psi.apply_pauli(1, axis);
            let ov = psi0.overlap(&psi);
            assert_abs_diff_eq!(ov.re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(ov.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ground_state_is_stationary() {
        let p = Couplings::zzxz(1.0, 0.7, 0.3);
        let sched = SweepSchedule::line(ModelFamily::Zzxz, 4, p, p, 2.0, 0.02).unwrap();
        let h = DenseHamiltonian::new(spec(ModelFamily::Zzxz, 4, p)).unwrap();
        let (e0, gs) = h.ground_state().unwrap();
        let mut psi = gs.clone();
        evolve_dense(&sched, &mut psi, None, &EvolveOptions::default(), |_, _, _| Ok(()))
            .unwrap();
        assert_abs_diff_eq!(h.energy(&psi), e0, epsilon = 1e-10);
        assert_abs_diff_eq!(gs.overlap(&psi).norm(), 1.0, epsilon = 1e-10);
    }

    fn final_state(dt: f64) -> DenseState {
        let sched = crate::models::default_zzxz_sweep(4, 1.0, dt).unwrap();
        let sp = initial_product(&sched, InitialStateChoice::Auto).unwrap();
        let mut psi = DenseState::product(&sp);
        evolve_dense(&sched, &mut psi, None, &EvolveOptions::default(), |_, _, _| Ok(()))
            .unwrap();
        psi
    }

    #[test]
    fn integrator_error_scales_as_dt_squared() {
        let reference = final_state(0.003125);
        let err = |psi: &DenseState| {
            psi.amps
                .iter()
                .zip(&reference.amps)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt()
        };
        let e1 = err(&final_state(0.05));
        let e2 = err(&final_state(0.025));
        let ratio = e1 / e2;
        assert!(
            (3.3..4.7).contains(&ratio),
            "second-order convergence violated: ratio = {ratio}"
        );
    }

    #[test]
    fn excitation_populations_count_flips() {
        let sched = crate::models::default_tfim_sweep(4, 1.0, 0.1).unwrap();
        let reference = initial_product(&sched, InitialStateChoice::Auto).unwrap();
        // One flipped site → all weight in the k = 1 sector.
        let mut spinors = reference.clone();
        spinors[2] = flip_spinor(&spinors[2]);
        let psi = DenseState::product(&spinors);
        let (pops, rest) = excitation_populations(&psi, &reference, 3).unwrap();
        assert_abs_diff_eq!(pops[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pops[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rest, 0.0, epsilon = 1e-12);
        // Equal superposition of the reference and one flip → 1/2 and 1/2.
        let a = DenseState::product(&reference);
        let mut amps = a.amps.clone();
        for (v, w) in amps.iter_mut().zip(&psi.amps) {
            *v = (*v + w) / C64::new(std::f64::consts::SQRT_2, 0.0);
        }
        let mixed = DenseState::from_amps(4, amps).unwrap();
        let (pops, rest) = excitation_populations(&mixed, &reference, 3).unwrap();
        assert_abs_diff_eq!(pops[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pops[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pops[2] + pops[3] + rest, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn field_ground_populations_after_pauli_kick() {
        // At J = 0, Bx = 1 the spectrum of X_0 + X_1 is {-2, 0, 0, 2}. A σ^y
        // on site 0 moves the ground state entirely into the middle group.
        let p = Couplings::zzxz(0.0, 1.0, 0.0);
        let h = DenseHamiltonian::new(spec(ModelFamily::Zzxz, 2, p)).unwrap();
        let (_, gs) = h.ground_state().unwrap();
        let snap = spectrum_populations(&h, &gs, 0.0).unwrap();
        assert_abs_diff_eq!(snap.ground_fidelity(), 1.0, epsilon = 1e-12);
        assert_eq!(snap.groups.len(), 3);
        let mut kicked = gs.clone();
        kicked.apply_pauli(0, PauliAxis::Y);
        let snap = spectrum_populations(&h, &kicked, 0.0).unwrap();
        assert_abs_diff_eq!(snap.ground_fidelity(), 0.0, epsilon = 1e-12);
        let groups = snap.group_populations();
        assert_abs_diff_eq!(groups[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(groups[2], 0.0, epsilon = 1e-12);
        // An X kick only rephases the X-basis ground state.
        let mut xkick = gs.clone();
        xkick.apply_pauli(0, PauliAxis::X);
        let snap = spectrum_populations(&h, &xkick, 0.0).unwrap();
        assert_abs_diff_eq!(snap.ground_fidelity(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn noise_event_fires_once_at_its_boundary() {
        let sched = crate::models::default_tfim_sweep(4, 1.0, 0.01).unwrap();
        let sp = initial_product(&sched, InitialStateChoice::Auto).unwrap();
        let mut noisy = DenseState::product(&sp);
        let ev = NoiseEvent { t_apply: 0.05, site: 2, axis: PauliAxis::Y, enabled: true };
        let mut h = DenseHamiltonian::new(sched.params_at_clamped(0.0)).unwrap();
        let mut energies = Vec::new();
        evolve_dense(&sched, &mut noisy, Some(&ev), &EvolveOptions::default(), |k, t, psi| {
            if k % 5 == 0 {
                h.set_params(sched.params_at_clamped(t))?;
                energies.push((t, h.energy(psi)));
            }
            Ok(())
        })
        .unwrap();
        // Before the kick the state tracks the ground energy; at the kick the
        // energy jumps by 2 Bx = 2 (one flipped X eigenstate).
        let e_before = energies[0].1;
        let e_at = energies[1].1;
        assert_abs_diff_eq!(e_before, -4.0, epsilon = 1e-6);
        assert!(e_at - e_before > 1.9, "kick should cost ≈ 2: {e_before} → {e_at}");
    }
}
