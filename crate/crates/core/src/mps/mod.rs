//! Matrix-product-state engine.
//!
//! Site tensors have shape (χ_left, 2, χ_right). A mixed-canonical gauge is
//! maintained around `center`: tensors left of it are left-orthonormal,
//! tensors right of it right-orthonormal. Two-site updates truncate by
//! relative discarded weight and renormalize the kept spectrum, so the state
//! norm is exactly preserved while `cum_trunc` accounts for the discarded
//! fraction.

pub mod checkpoint;
pub mod evolve;
pub mod populations;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use evolve::{ground_state_imaginary_tebd, tebd_evolve};
pub use populations::hamming_populations;

use crate::error::{CoreError, Result};
use crate::exact::DenseState;
use crate::models::{Couplings, LocalSpinor, ModelFamily, ModelSpec, NoiseEvent, PauliAxis};
use crate::C64;
use ndarray::{Array2, Array3};
use ndarray_linalg::{JobSvd, SVDDC, QR};

/// Largest chain `to_dense` will materialize (2^16 amplitudes).
pub const DENSIFY_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDirection {
    Left,
    Right,
}

#[derive(Debug, Clone)]
pub struct Mps {
    pub tensors: Vec<Array3<C64>>,
    pub center: usize,
    /// Relative discarded-weight cutoff per truncation.
    pub cutoff: f64,
    /// Hard bond-dimension cap; exceeding it is a capacity error.
    pub chi_cap: usize,
    /// Accumulated discarded-weight fraction over all truncations.
    pub cum_trunc: f64,
}

fn merge_left(t: &Array3<C64>) -> Array2<C64> {
    let (a, s, c) = t.dim();
    Array2::from_shape_vec((a * s, c), t.iter().copied().collect()).unwrap()
}

fn merge_right(t: &Array3<C64>) -> Array2<C64> {
    let (a, s, c) = t.dim();
    Array2::from_shape_vec((a, s * c), t.iter().copied().collect()).unwrap()
}

fn split_left(m: &Array2<C64>, a: usize) -> Array3<C64> {
    let (rows, c) = m.dim();
    debug_assert_eq!(rows % a, 0);
    Array3::from_shape_vec((a, rows / a, c), m.iter().copied().collect()).unwrap()
}

fn split_right(m: &Array2<C64>, c: usize) -> Array3<C64> {
    let (a, cols) = m.dim();
    debug_assert_eq!(cols % c, 0);
    Array3::from_shape_vec((a, cols / c, c), m.iter().copied().collect()).unwrap()
}

/// Product state with all bond dimensions 1, center at site 0.
pub fn product_mps(spinors: &[LocalSpinor], cutoff: f64, chi_cap: usize) -> Mps {
    let tensors = spinors
        .iter()
        .map(|s| Array3::from_shape_vec((1, 2, 1), vec![s[0], s[1]]).unwrap())
        .collect();
    Mps { tensors, center: 0, cutoff, chi_cap, cum_trunc: 0.0 }
}

impl Mps {
    pub fn n(&self) -> usize {
        self.tensors.len()
    }

    pub fn max_chi(&self) -> usize {
        self.tensors.iter().map(|t| t.dim().2).max().unwrap_or(1)
    }

    /// Norm from the center tensor (exact in mixed-canonical gauge).
    pub fn norm(&self) -> f64 {
        self.tensors[self.center]
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn normalize(&mut self) {
        let nrm = self.norm();
        if nrm > 0.0 {
            let inv = C64::new(1.0 / nrm, 0.0);
            self.tensors[self.center].mapv_inplace(|v| v * inv);
        }
    }

    fn move_center_right(&mut self) -> Result<()> {
        let c = self.center;
        let (a, _, _) = self.tensors[c].dim();
        let m = merge_left(&self.tensors[c]);
        let (q, r) = m.qr()?;
        self.tensors[c] = split_left(&q, a);
        let nxt = merge_right(&self.tensors[c + 1]);
        let (_, _, cr) = self.tensors[c + 1].dim();
        self.tensors[c + 1] = split_right(&r.dot(&nxt), cr);
        self.center = c + 1;
        Ok(())
    }

    fn move_center_left(&mut self) -> Result<()> {
        let c = self.center;
        let (_, _, cr) = self.tensors[c].dim();
        let m = merge_right(&self.tensors[c]);
        // LQ through the QR of the conjugate transpose: M = Lᴴ→ M = R† Q†.
        let mh = m.t().mapv(|v| v.conj());
        let (q, r) = mh.qr()?;
        let qh = q.t().mapv(|v| v.conj());
        let l = r.t().mapv(|v| v.conj());
        self.tensors[c] = split_right(&qh, cr);
        let prev = merge_left(&self.tensors[c - 1]);
        let (al, _, _) = self.tensors[c - 1].dim();
        self.tensors[c - 1] = split_left(&prev.dot(&l), al);
        self.center = c - 1;
        Ok(())
    }

    pub fn move_center_to(&mut self, site: usize) -> Result<()> {
        if site >= self.n() {
            return Err(CoreError::Invalid(format!(
                "center target {site} out of range for n = {}",
                self.n()
            )));
        }
        while self.center < site {
            self.move_center_right()?;
        }
        while self.center > site {
            self.move_center_left()?;
        }
        Ok(())
    }

    /// In-place single-site operator (no gauge or bond change).
    pub fn apply_single_site(&mut self, site: usize, u: [[C64; 2]; 2]) {
        let t = &mut self.tensors[site];
        let (a, _, c) = t.dim();
        for i in 0..a {
            for j in 0..c {
                let v0 = t[[i, 0, j]];
                let v1 = t[[i, 1, j]];
                t[[i, 0, j]] = u[0][0] * v0 + u[0][1] * v1;
                t[[i, 1, j]] = u[1][0] * v0 + u[1][1] * v1;
            }
        }
    }

    pub fn apply_pauli(&mut self, site: usize, axis: PauliAxis) {
        self.apply_single_site(site, axis.matrix());
    }

    pub fn apply_noise(&mut self, ev: &NoiseEvent) {
        if ev.enabled {
            self.apply_pauli(ev.site, ev.axis);
        }
    }

    /// Two-site gate on (bond, bond+1) followed by an SVD split.
    ///
    /// The kept spectrum is renormalized so the norm is preserved exactly;
    /// the discarded fraction is added to `cum_trunc`. Exceeding `chi_cap`
    /// is a capacity error stamped with `t_context`.
    pub fn apply_two_site(
        &mut self,
        bond: usize,
        gate: &Array2<C64>,
        dir: SweepDirection,
        t_context: f64,
    ) -> Result<()> {
        let n = self.n();
        if bond + 1 >= n {
            return Err(CoreError::Invalid(format!("bond {bond} out of range")));
        }
        if self.center < bond {
            self.move_center_to(bond)?;
        } else if self.center > bond + 1 {
            self.move_center_to(bond + 1)?;
        }
        let (a, _, _) = self.tensors[bond].dim();
        let (_, _, c) = self.tensors[bond + 1].dim();
        let theta = merge_left(&self.tensors[bond]).dot(&merge_right(&self.tensors[bond + 1]));

        // Gate on the merged physical pair: rows of `theta` are (a, s0),
        // columns are (s1, c).
        let mut theta2 = Array2::<C64>::zeros((a * 2, 2 * c));
        for i in 0..a {
            for j in 0..c {
                for p in 0..4 {
                    let (t0, t1) = (p / 2, p % 2);
                    let mut acc = C64::new(0.0, 0.0);
                    for q in 0..4 {
                        let (s0, s1) = (q / 2, q % 2);
                        acc += gate[[p, q]] * theta[[i * 2 + s0, s1 * c + j]];
                    }
                    theta2[[i * 2 + t0, t1 * c + j]] = acc;
                }
            }
        }

        let (u, sv, vt) = theta2.svddc(JobSvd::Some)?;
        let u = u.ok_or_else(|| CoreError::Numerical("svd returned no U".into()))?;
        let vt = vt.ok_or_else(|| CoreError::Numerical("svd returned no Vᵀ".into()))?;
        let weights: Vec<f64> = sv.iter().map(|s| s * s).collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(CoreError::Numerical("two-site block has zero norm".into()));
        }
        // Smallest keep with tail weight ≤ cutoff · total.
        let budget = self.cutoff * total;
        let mut tail = 0.0;
        let mut keep = weights.len();
        while keep > 1 && tail + weights[keep - 1] <= budget {
            tail += weights[keep - 1];
            keep -= 1;
        }
        if keep > self.chi_cap {
            return Err(CoreError::ChiCap { t: t_context, needed: keep, cap: self.chi_cap });
        }
        self.cum_trunc += tail / total;
        let rescale = (total / (total - tail)).sqrt();

        let mut uk = u.slice(ndarray::s![.., ..keep]).to_owned();
        let mut vk = vt.slice(ndarray::s![..keep, ..]).to_owned();
        match dir {
            SweepDirection::Right => {
                for (k, mut row) in vk.outer_iter_mut().enumerate() {
                    let w = C64::new(sv[k] * rescale, 0.0);
                    row.mapv_inplace(|v| v * w);
                }
                self.center = bond + 1;
            }
            SweepDirection::Left => {
                for k in 0..keep {
                    let w = C64::new(sv[k] * rescale, 0.0);
                    uk.column_mut(k).mapv_inplace(|v| v * w);
                }
                self.center = bond;
            }
        }
        self.tensors[bond] = split_left(&uk, a);
        self.tensors[bond + 1] = split_right(&vk, c);
        Ok(())
    }

    /// ⟨self|other⟩ by full transfer contraction (gauge independent).
    pub fn overlap(&self, other: &Mps) -> Result<C64> {
        if self.n() != other.n() {
            return Err(CoreError::Invalid("overlap needs equal lengths".into()));
        }
        let mut env = Array2::<C64>::ones((1, 1));
        for (ts, to) in self.tensors.iter().zip(&other.tensors) {
            let (_, _, cr) = to.dim();
            let tmp = env.dot(&merge_right(to)); // (a_s, 2 c_o)
            let tmp = split_right(&tmp, cr); // (a_s, 2, c_o)
            let (as_, _, co) = tmp.dim();
            let tmp = Array2::from_shape_vec((as_ * 2, co), tmp.iter().copied().collect())
                .unwrap();
            let sh = merge_left(ts).mapv(|v| v.conj());
            env = sh.t().dot(&tmp); // (c_s, c_o)
        }
        Ok(env[[0, 0]])
    }

    /// Expectation of a single-site operator; moves the center there.
    pub fn expect_single(&mut self, site: usize, op: [[C64; 2]; 2]) -> Result<C64> {
        self.move_center_to(site)?;
        let t = &self.tensors[site];
        let (a, _, c) = t.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..a {
            for j in 0..c {
                for s in 0..2 {
                    for sp in 0..2 {
                        acc += t[[i, s, j]].conj() * op[s][sp] * t[[i, sp, j]];
                    }
                }
            }
        }
        Ok(acc)
    }

    /// Expectation of a two-site operator on (bond, bond+1).
    pub fn expect_two(&mut self, bond: usize, op: &Array2<C64>) -> Result<C64> {
        self.move_center_to(bond)?;
        let theta = merge_left(&self.tensors[bond]).dot(&merge_right(&self.tensors[bond + 1]));
        let (a2, c2) = theta.dim();
        let (a, c) = (a2 / 2, c2 / 2);
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..a {
            for j in 0..c {
                for p in 0..4 {
                    let (t0, t1) = (p / 2, p % 2);
                    let bra = theta[[i * 2 + t0, t1 * c + j]].conj();
                    for q in 0..4 {
                        let (s0, s1) = (q / 2, q % 2);
                        acc += bra * op[[p, q]] * theta[[i * 2 + s0, s1 * c + j]];
                    }
                }
            }
        }
        Ok(acc)
    }

    /// ⟨H⟩ for the given couplings; sweeps the center across the chain.
    pub fn energy(&mut self, spec: &ModelSpec) -> Result<f64> {
        if spec.n != self.n() {
            return Err(CoreError::Invalid(format!(
                "spec has {} sites, state has {}",
                spec.n,
                self.n()
            )));
        }
        let field = field_operator(spec.family, &spec.params);
        let mut total = 0.0;
        self.move_center_to(0)?;
        for i in 0..self.n() {
            if let Some(f) = field {
                total += self.expect_single(i, f)?.re;
            }
            if i + 1 < self.n() {
                let bond = bond_operator(spec.family, &spec.params);
                total += self.expect_two(i, &bond)?.re;
            }
        }
        Ok(total)
    }

    /// Materialize the full state vector (capped); site i maps to bit i.
    pub fn to_dense(&self) -> Result<DenseState> {
        let n = self.n();
        if n > DENSIFY_CAP {
            return Err(CoreError::Capacity { what: "mps densification", n, cap: DENSIFY_CAP });
        }
        // Fold left to right; the fold index grows big-endian (site 0 is the
        // highest bit), so a bit reversal restores the engine convention.
        let mut v = Array2::<C64>::ones((1, 1));
        for t in &self.tensors {
            let (_, _, cr) = t.dim();
            let rows = v.nrows();
            let m = v.dot(&merge_right(t)); // (rows, 2 cr)
            let mut folded = Array2::<C64>::zeros((rows * 2, cr));
            for x in 0..rows {
                for s in 0..2 {
                    for j in 0..cr {
                        folded[[x * 2 + s, j]] = m[[x, s * cr + j]];
                    }
                }
            }
            v = folded;
        }
        let dim = 1usize << n;
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        for x in 0..dim {
            let mut y = 0usize;
            for b in 0..n {
                if x & (1 << b) != 0 {
                    y |= 1 << (n - 1 - b);
                }
            }
            amps[x] = v[[y, 0]];
        }
        DenseState::from_amps(n, amps)
    }
}

/// Single-site field term of the family, `None` when it vanishes.
pub fn field_operator(family: ModelFamily, p: &Couplings) -> Option<[[C64; 2]; 2]> {
    let (bx, bz) = match family {
        ModelFamily::Zzxz => (p.bx, p.axial),
        ModelFamily::HeisenbergX => (p.bx, 0.0),
    };
    if bx == 0.0 && bz == 0.0 {
        return None;
    }
    Some([
        [C64::new(bz, 0.0), C64::new(bx, 0.0)],
        [C64::new(bx, 0.0), C64::new(-bz, 0.0)],
    ])
}

/// Two-site coupling term of the family as a 4×4 matrix on (s0, s1).
pub fn bond_operator(family: ModelFamily, p: &Couplings) -> Array2<C64> {
    let mut op = Array2::<C64>::zeros((4, 4));
    let zsign = |s: usize| 1.0 - 2.0 * s as f64;
    match family {
        ModelFamily::Zzxz => {
            for s0 in 0..2 {
                for s1 in 0..2 {
                    let d = s0 * 2 + s1;
                    op[[d, d]] = C64::new(p.j * zsign(s0) * zsign(s1), 0.0);
                }
            }
        }
        ModelFamily::HeisenbergX => {
            // (1/2)(J XX + J YY + Jz ZZ): ZZ is diagonal, XX + YY hops
            // |01⟩ ↔ |10⟩ with amplitude 2.
            for s0 in 0..2 {
                for s1 in 0..2 {
                    let d = s0 * 2 + s1;
                    op[[d, d]] = C64::new(0.5 * p.axial * zsign(s0) * zsign(s1), 0.0);
                }
            }
            op[[1, 2]] += C64::new(p.j, 0.0);
            op[[2, 1]] += C64::new(p.j, 0.0);
        }
    }
    op
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::DenseHamiltonian;
    use crate::models::{flip_spinor, Couplings, ModelSpec};
    use approx::assert_abs_diff_eq;

    fn asym_spinors(n: usize) -> Vec<LocalSpinor> {
        (0..n)
            .map(|i| {
                let th = 0.3 + 0.4 * i as f64;
                [
                    C64::new(th.cos(), 0.1 * (i as f64).sin()),
                    C64::new(th.sin(), -0.05 * i as f64),
                ]
            })
            .map(|[a, b]| {
                let nrm = (a.norm_sqr() + b.norm_sqr()).sqrt();
                [a / nrm, b / nrm]
            })
            .collect()
    }

    #[test]
    fn product_densification_matches_dense_engine() {
        let sp = asym_spinors(3);
        let mps = product_mps(&sp, 1e-10, 16);
        let dense = DenseState::product(&sp);
        let got = mps.to_dense().unwrap();
        for (a, b) in got.amps.iter().zip(&dense.amps) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-13);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-13);
        }
    }

    #[test]
    fn gauge_moves_preserve_state() {
        let sp = asym_spinors(5);
        let mut mps = product_mps(&sp, 1e-10, 16);
        // Entangle one pair so the bond dimensions are nontrivial.
        let gate = evolve::tests_gate_cnotish();
        mps.apply_two_site(1, &gate, SweepDirection::Right, 0.0).unwrap();
        let before = mps.to_dense().unwrap();
        mps.move_center_to(4).unwrap();
        mps.move_center_to(0).unwrap();
        let after = mps.to_dense().unwrap();
        let ov = before.overlap(&after);
        assert_abs_diff_eq!(ov.re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ov.im, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mps.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_gate_is_inert() {
        let sp = asym_spinors(4);
        let mut mps = product_mps(&sp, 1e-12, 16);
        let id = Array2::<C64>::eye(4);
        mps.apply_two_site(2, &id, SweepDirection::Right, 0.0).unwrap();
        assert_eq!(mps.center, 3);
        let got = mps.to_dense().unwrap();
        let want = DenseState::product(&sp);
        let ov = got.overlap(&want).norm();
        assert_abs_diff_eq!(ov, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mps.cum_trunc, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn chi_cap_is_enforced() {
        let sp = asym_spinors(4);
        let mut mps = product_mps(&sp, 1e-12, 1);
        let gate = evolve::tests_gate_cnotish();
        let err = mps.apply_two_site(1, &gate, SweepDirection::Right, 3.25).unwrap_err();
        match err {
            CoreError::ChiCap { t, needed, cap } => {
                assert_abs_diff_eq!(t, 3.25, epsilon = 1e-12);
                assert!(needed > 1);
                assert_eq!(cap, 1);
            }
            other => panic!("expected ChiCap, got {other:?}"),
        }
    }

    #[test]
    fn truncation_renormalizes_and_accounts() {
        let sp = asym_spinors(4);
        let mut mps = product_mps(&sp, 0.4, 16);
        let gate = evolve::tests_gate_cnotish();
        mps.apply_two_site(1, &gate, SweepDirection::Right, 0.0).unwrap();
        assert!(mps.cum_trunc > 0.0, "aggressive cutoff must discard weight");
        assert_abs_diff_eq!(mps.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn energy_matches_dense_engine_on_products() {
        let sp = asym_spinors(5);
        let mut mps = product_mps(&sp, 1e-12, 32);
        let dense = DenseState::product(&sp);
        for (family, params) in [
            (ModelFamily::Zzxz, Couplings::zzxz(1.2, 0.7, -0.4)),
            (ModelFamily::HeisenbergX, Couplings::heisenberg_x(0.9, 0.5, 0.8)),
        ] {
            let spec = ModelSpec::new(family, 5, params).unwrap();
            let h = DenseHamiltonian::new(spec).unwrap();
            let want = h.energy(&dense);
            let got = mps.energy(&spec).unwrap();
            assert_abs_diff_eq!(got, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn energy_matches_dense_engine_on_entangled_states() {
        let sp = asym_spinors(5);
        let mut mps = product_mps(&sp, 1e-14, 32);
        let gate = evolve::tests_gate_cnotish();
        mps.apply_two_site(0, &gate, SweepDirection::Right, 0.0).unwrap();
        mps.apply_two_site(2, &gate, SweepDirection::Right, 0.0).unwrap();
        mps.apply_two_site(3, &gate, SweepDirection::Left, 0.0).unwrap();
        let dense = mps.to_dense().unwrap();
        let spec = ModelSpec::new(ModelFamily::Zzxz, 5, Couplings::zzxz(0.8, 1.1, 0.3)).unwrap();
        let h = DenseHamiltonian::new(spec).unwrap();
        let got = mps.energy(&spec).unwrap();
        assert_abs_diff_eq!(got, h.energy(&dense), epsilon = 1e-10);
    }

    #[test]
    fn pauli_noise_on_product_state() {
        let sp = asym_spinors(4);
        let mut mps = product_mps(&sp, 1e-12, 16);
        let mut dense = DenseState::product(&sp);
        mps.apply_pauli(2, PauliAxis::Y);
        dense.apply_pauli(2, PauliAxis::Y);
        let got = mps.to_dense().unwrap();
        let ov = got.overlap(&dense);
        assert_abs_diff_eq!(ov.re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ov.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn overlap_between_mps_states() {
        let sp = asym_spinors(4);
        let mut a = product_mps(&sp, 1e-12, 16);
        let b = product_mps(&sp, 1e-12, 16);
        assert_abs_diff_eq!(a.overlap(&b).unwrap().re, 1.0, epsilon = 1e-12);
        // Flipping one site makes the states orthogonal.
        let mut sp2 = sp.clone();
        sp2[1] = flip_spinor(&sp2[1]);
        let c = product_mps(&sp2, 1e-12, 16);
        assert!(a.overlap(&c).unwrap().norm() < 1e-12);
        // Entangling then undoing the gauge leaves the overlap intact.
        let gate = evolve::tests_gate_cnotish();
        a.apply_two_site(1, &gate, SweepDirection::Right, 0.0).unwrap();
        let d = a.overlap(&b).unwrap();
        assert!(d.norm() < 1.0);
    }
}
