//! Property suite for the structural invariants every engine must keep:
//! normalization, antisymmetry, purity, probability simplexes, Pauli
//! involution, seed determinism, and second-order time-step convergence.

use adsweep_core::exact::{
    evolve_dense, excitation_populations, spectrum_populations, DenseHamiltonian, DenseState,
    EvolveOptions,
};
use adsweep_core::freefermion::{
    apply_pauli_error, evolve_covariance, ground_covariance, purity_defect, CovEvolveOptions,
    MajoranaHamiltonian,
};
use adsweep_core::models::{
    default_zzxz_sweep, initial_product, Couplings, InitialStateChoice, LocalSpinor, ModelFamily,
    ModelSpec, NoiseEvent, PauliAxis, SweepSchedule,
};
use adsweep_core::mps::{hamming_populations, product_mps, tebd_evolve};
use adsweep_core::randomcircuit::{chain_distribution, spread_study, FirstLayer};
use adsweep_core::C64;
use proptest::prelude::*;

fn axis_strategy() -> impl Strategy<Value = PauliAxis> {
    prop_oneof![Just(PauliAxis::X), Just(PauliAxis::Y), Just(PauliAxis::Z)]
}

fn family_strategy() -> impl Strategy<Value = ModelFamily> {
    prop_oneof![Just(ModelFamily::Zzxz), Just(ModelFamily::HeisenbergX)]
}

/// Arbitrary normalized single-site spinors, one per site.
fn spinor_chain(n: usize) -> impl Strategy<Value = Vec<LocalSpinor>> {
    proptest::collection::vec((0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU), n).prop_map(
        |angles| {
            angles
                .into_iter()
                .map(|(theta, phi)| {
                    [
                        C64::new((theta / 2.0).cos(), 0.0),
                        C64::from_polar((theta / 2.0).sin(), phi),
                    ]
                })
                .collect()
        },
    )
}

fn short_sweep(family: ModelFamily, n: usize, a: Couplings, b: Couplings) -> SweepSchedule {
    SweepSchedule::line(family, n, a, b, 1.5, 0.01).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dense_evolution_preserves_normalization(
        family in family_strategy(),
        n in 3usize..=6,
        j in 0.1f64..2.5,
        axial in -1.0f64..1.0,
        site in 0usize..6,
        axis in axis_strategy(),
        frac in 0.05f64..0.95,
    ) {
        let site = site % n;
        let sched = short_sweep(family, n, Couplings { j: 0.0, bx: 1.0, axial: 0.0 },
                                Couplings { j, bx: 1.0, axial });
        let noise = NoiseEvent { t_apply: frac * 1.5, site, axis, enabled: true };
        let spinors = initial_product(&sched, InitialStateChoice::Auto).unwrap();
        let mut psi = DenseState::product(&spinors);
        let mut worst = 0.0f64;
        evolve_dense(&sched, &mut psi, Some(&noise), &EvolveOptions::default(), |_, _, st| {
            worst = worst.max((st.norm() - 1.0).abs());
            Ok(())
        }).unwrap();
        worst = worst.max((psi.norm() - 1.0).abs());
        prop_assert!(worst < 1e-10, "norm drift {worst}");
    }

    #[test]
    fn mps_evolution_preserves_normalization(
        family in family_strategy(),
        n in 4usize..=7,
        j in 0.1f64..2.0,
        site in 0usize..7,
        axis in axis_strategy(),
    ) {
        let site = site % n;
        let sched = short_sweep(family, n, Couplings { j: 0.0, bx: 1.0, axial: 0.0 },
                                Couplings { j, bx: 1.0, axial: 0.3 });
        let noise = NoiseEvent { t_apply: 0.4, site, axis, enabled: true };
        let spinors = initial_product(&sched, InitialStateChoice::Auto).unwrap();
        let mut mps = product_mps(&spinors, 1e-12, 64);
        let mut worst = 0.0f64;
        tebd_evolve(&sched, &mut mps, Some(&noise), |_, _, st| {
            worst = worst.max((st.norm() - 1.0).abs());
            Ok(())
        }).unwrap();
        worst = worst.max((mps.norm() - 1.0).abs());
        prop_assert!(worst < 1e-8, "norm drift {worst}");
    }

    #[test]
    fn covariance_stays_antisymmetric_and_pure(
        n in 4usize..=12,
        j_final in 0.2f64..3.0,
        site in 0usize..12,
        axis in axis_strategy(),
    ) {
        let site = site % n;
        let sched = SweepSchedule::line(
            ModelFamily::Zzxz, n,
            Couplings::zzxz(0.0, 1.0, 0.0),
            Couplings::zzxz(j_final, 1.0, 0.0),
            2.0, 0.01,
        ).unwrap();
        let h0 = MajoranaHamiltonian::from_spec(&sched.params_at_clamped(0.0)).unwrap();

        // Generator antisymmetry is exact by construction.
        let hd = h0.dense();
        for i in 0..2 * n {
            for k in 0..2 * n {
                prop_assert_eq!(hd[[i, k]], -hd[[k, i]]);
            }
        }

        let (mut state, _) = ground_covariance(&h0).unwrap();
        let noise = NoiseEvent { t_apply: 0.5, site, axis, enabled: true };
        let mut worst_skew = 0.0f64;
        let mut worst_purity = 0.0f64;
        evolve_covariance(&sched, &mut state, Some(&noise), &CovEvolveOptions::default(), |_, _, st| {
            let g = &st.gamma;
            for i in 0..2 * n {
                for k in 0..2 * n {
                    worst_skew = worst_skew.max((g[[i, k]] + g[[k, i]]).abs());
                }
            }
            worst_purity = worst_purity.max(purity_defect(g));
            Ok(())
        }).unwrap();
        prop_assert!(worst_skew < 1e-9, "antisymmetry defect {worst_skew}");
        prop_assert!(worst_purity < 1e-6, "purity defect {worst_purity}");
    }

    #[test]
    fn populations_form_a_probability_simplex(
        family in family_strategy(),
        n in 3usize..=6,
        spin_seed in spinor_chain(6),
        j in 0.2f64..2.0,
    ) {
        let spinors: Vec<LocalSpinor> = spin_seed[..n].to_vec();
        let psi = DenseState::product(&spinors);

        let spec = ModelSpec::new(family, n, Couplings { j, bx: 0.7, axial: 0.4 }).unwrap();
        let h = DenseHamiltonian::new(spec.clone()).unwrap();
        let snap = spectrum_populations(&h, &psi, 0.0).unwrap();
        let total: f64 = snap.populations.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-8, "spectrum populations sum {total}");
        prop_assert!(snap.populations.iter().all(|&p| (-1e-12..=1.0 + 1e-9).contains(&p)));
        prop_assert!(snap.eigenvalues.windows(2).all(|w| w[0] <= w[1] + 1e-12));

        let (pops, rest) = excitation_populations(&psi, &spinors, n).unwrap();
        let total: f64 = pops.iter().sum::<f64>() + rest;
        prop_assert!((total - 1.0).abs() < 1e-8, "excitation populations sum {total}");
        prop_assert!(pops.iter().all(|&p| (-1e-12..=1.0 + 1e-9).contains(&p)) && rest >= -1e-12);

        let mps = product_mps(&spinors, 1e-12, 32);
        let (mpops, mrest) = hamming_populations(&mps, &spinors, 2).unwrap();
        let total: f64 = mpops.iter().sum::<f64>() + mrest;
        prop_assert!((total - 1.0).abs() < 1e-8, "hamming populations sum {total}");
        prop_assert!(mpops.iter().all(|&p| (-1e-12..=1.0 + 1e-9).contains(&p)) && mrest >= -1e-12);
    }

    #[test]
    fn markov_distribution_is_a_probability_simplex(
        n in 4usize..=24,
        t in 1usize..=10,
        seed in any::<u64>(),
    ) {
        let start = n / 2;
        let dist = chain_distribution(n, t, start, FirstLayer::Even, 300, seed).unwrap();
        prop_assert!(dist.defect() < 1e-12);
        prop_assert!(dist.probs().iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn pauli_twice_is_identity(
        n in 2usize..=7,
        spin_seed in spinor_chain(7),
        site in 0usize..7,
        axis in axis_strategy(),
    ) {
        let site = site % n;
        let spinors: Vec<LocalSpinor> = spin_seed[..n].to_vec();

        let reference = DenseState::product(&spinors);
        let mut psi = reference.clone();
        psi.apply_pauli(site, axis);
        psi.apply_pauli(site, axis);
        let fid = psi.overlap(&reference).norm();
        prop_assert!((fid - 1.0).abs() < 1e-12, "dense fidelity {fid}");

        let mut mps = product_mps(&spinors, 1e-12, 32);
        let mref = product_mps(&spinors, 1e-12, 32);
        mps.apply_pauli(site, axis);
        mps.apply_pauli(site, axis);
        let fid = mps.overlap(&mref).unwrap().norm();
        prop_assert!((fid - 1.0).abs() < 1e-12, "mps fidelity {fid}");
    }

    #[test]
    fn pauli_twice_fixes_covariance(
        n in 2usize..=20,
        j in 0.2f64..2.0,
        site in 0usize..20,
        axis in axis_strategy(),
    ) {
        let site = site % n;
        let spec = ModelSpec::new(ModelFamily::Zzxz, n, Couplings::zzxz(j, 1.0, 0.0)).unwrap();
        let h = MajoranaHamiltonian::from_spec(&spec).unwrap();
        let (state, _) = ground_covariance(&h).unwrap();
        let mut flipped = state.clone();
        apply_pauli_error(&mut flipped, site, axis).unwrap();
        apply_pauli_error(&mut flipped, site, axis).unwrap();
        let mut diff = 0.0f64;
        for (a, b) in flipped.gamma.iter().zip(state.gamma.iter()) {
            diff = diff.max((a - b).abs());
        }
        prop_assert_eq!(diff, 0.0);
    }

    #[test]
    fn schedules_are_piecewise_linear_and_loops_close(
        family in family_strategy(),
        verts in proptest::collection::vec((0.0f64..3.0, 0.1f64..2.0, -1.0f64..1.0), 2..5),
        frac in 0.0f64..1.0,
    ) {
        let vertices: Vec<Couplings> =
            verts.iter().map(|&(j, bx, axial)| Couplings { j, bx, axial }).collect();
        let sched = SweepSchedule::new(family, 8, vertices.clone(), 2.0, 0.05).unwrap();

        // Midpoint of any leg equals the average of its endpoints.
        let leg = (frac * sched.n_legs() as f64).floor().min(sched.n_legs() as f64 - 1.0);
        let t_mid = (leg + 0.5) * 2.0;
        let mid = sched.params_at(t_mid).unwrap().params;
        let a = sched.params_at(leg * 2.0).unwrap().params;
        let b = sched.params_at((leg + 1.0) * 2.0).unwrap().params;
        prop_assert!((mid.j - 0.5 * (a.j + b.j)).abs() < 1e-12);
        prop_assert!((mid.bx - 0.5 * (a.bx + b.bx)).abs() < 1e-12);
        prop_assert!((mid.axial - 0.5 * (a.axial + b.axial)).abs() < 1e-12);

        // Loops return to their starting point; construction is deterministic.
        let lp = SweepSchedule::closed_loop(family, 8, vertices.clone(), 2.0, 0.05).unwrap();
        let start = lp.params_at(0.0).unwrap().params;
        let end = lp.params_at(lp.total_duration()).unwrap().params;
        prop_assert_eq!((start.j, start.bx, start.axial), (end.j, end.bx, end.axial));
        let again = SweepSchedule::closed_loop(family, 8, vertices, 2.0, 0.05).unwrap();
        prop_assert_eq!(lp, again);
    }
}

#[test]
fn fixed_seed_reproduces_monte_carlo_runs() {
    let a = spread_study(30, 40, 15, FirstLayer::Even, 2000, 42).unwrap();
    let b = spread_study(30, 40, 15, FirstLayer::Even, 2000, 42).unwrap();
    assert_eq!(a.mean, b.mean);
    assert_eq!(a.dead, b.dead);
    assert_eq!(a.full, b.full);

    let c = spread_study(30, 40, 15, FirstLayer::Even, 2000, 43).unwrap();
    assert_ne!(a.mean, c.mean, "different seeds should not collide");

    let d1 = chain_distribution(24, 9, 12, FirstLayer::Odd, 1500, 7).unwrap();
    let d2 = chain_distribution(24, 9, 12, FirstLayer::Odd, 1500, 7).unwrap();
    assert_eq!(d1.probs(), d2.probs());
}

/// Both time-steppers converge at second order: halving dt cuts the final
/// energy error by ~4x against a fine-step reference.
#[test]
fn time_step_error_is_second_order() {
    let n = 6;
    let noise = NoiseEvent { t_apply: 0.9, site: 2, axis: PauliAxis::Y, enabled: true };

    let dense_final = |dt: f64| -> f64 {
        let sched = default_zzxz_sweep(n, 3.0, dt).unwrap();
        let spinors = initial_product(&sched, InitialStateChoice::Auto).unwrap();
        let mut psi = DenseState::product(&spinors);
        let ham = DenseHamiltonian::new(sched.params_at_clamped(0.0)).unwrap();
        let mut e = f64::NAN;
        evolve_dense(&sched, &mut psi, Some(&noise), &EvolveOptions::default(), |_, t, st| {
            let mut h = ham.clone();
            h.set_params(sched.params_at_clamped(t))?;
            e = h.energy(st);
            Ok(())
        })
        .unwrap();
        e
    };

    let mps_final = |dt: f64| -> f64 {
        let sched = default_zzxz_sweep(n, 3.0, dt).unwrap();
        let spinors = initial_product(&sched, InitialStateChoice::Auto).unwrap();
        let mut mps = product_mps(&spinors, 0.0, 64);
        let mut e = f64::NAN;
        tebd_evolve(&sched, &mut mps, Some(&noise), |_, t, st| {
            e = st.energy(&sched.params_at_clamped(t))?;
            Ok(())
        })
        .unwrap();
        e
    };

    // Each dt divides both t_apply and T so the noise lands on the same
    // boundary in every run and the residual is pure integrator error.
    let reference = dense_final(0.0005);
    let err_d1 = (dense_final(0.03) - reference).abs();
    let err_d2 = (dense_final(0.015) - reference).abs();
    let ratio_dense = err_d1 / err_d2;
    assert!(
        (2.8..6.0).contains(&ratio_dense),
        "dense halving ratio {ratio_dense} (errors {err_d1:.3e}, {err_d2:.3e})"
    );

    let reference = mps_final(0.000625);
    let err_m1 = (mps_final(0.02) - reference).abs();
    let err_m2 = (mps_final(0.01) - reference).abs();
    let ratio_mps = err_m1 / err_m2;
    assert!(
        (2.8..6.0).contains(&ratio_mps),
        "TEBD halving ratio {ratio_mps} (errors {err_m1:.3e}, {err_m2:.3e})"
    );
}
