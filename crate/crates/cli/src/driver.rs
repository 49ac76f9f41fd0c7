//! Experiment orchestration: paired clean/noisy runs on any engine, excess
//! energy extraction, depolarizing-channel averages, the sublattice-parity
//! study, and scaling-fit helpers.

use crate::records::{ResultRecord, Row, RunMetadata};
use adsweep_core::exact::{
    evolve_dense, excitation_populations, spectrum_populations, DenseHamiltonian, DenseState,
    EvolveOptions,
};
use adsweep_core::freefermion::{
    evolve_covariance, ground_covariance, single_particle_energies, CovEvolveOptions,
    MajoranaHamiltonian,
};
use adsweep_core::models::{
    initial_product, window_steps, EngineChoice, ExperimentConfig, NoiseEvent, ResolvedRun,
    SiteRule,
};
use adsweep_core::mps::{ground_state_imaginary_tebd, hamming_populations, product_mps, tebd_evolve};
use adsweep_core::{CoreError, Result};
use std::collections::BTreeSet;
use std::time::Instant;

pub fn code_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

/// Step boundaries at which rows are recorded: about `count` indices spread
/// uniformly over `0..=steps`, always including both endpoints.
fn sample_steps(steps: usize, count: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    if count <= 1 {
        out.insert(0);
        out.insert(steps);
        return out;
    }
    if count > steps {
        out.extend(0..=steps);
        return out;
    }
    for i in 0..count {
        let k = (i as f64 * steps as f64 / (count - 1) as f64).round() as usize;
        out.insert(k.min(steps));
    }
    out
}

struct Sampler {
    energy: BTreeSet<usize>,
    pops: BTreeSet<usize>,
}

impl Sampler {
    fn new(steps: usize, samples: usize, pop_samples: usize) -> Self {
        let energy = sample_steps(steps, samples.max(2));
        // Population rows are a subset of the energy rows.
        let keys: Vec<usize> = energy.iter().copied().collect();
        let picks = sample_steps(keys.len() - 1, pop_samples.max(2));
        let pops = picks.into_iter().map(|i| keys[i]).collect();
        Sampler { energy, pops }
    }
}

/// Split a full per-group population vector into (p_0..p_kMax, p_rest).
fn split_populations(mut groups: Vec<f64>, k_max: usize) -> (Vec<f64>, f64) {
    let keep = k_max + 1;
    let rest = if groups.len() > keep { groups.split_off(keep).iter().sum() } else { 0.0 };
    groups.resize(keep, 0.0);
    (groups, rest)
}

/// One evolution on the engine chosen by `run`, recording sampled rows.
/// `with_noise = false` drops the noise event (the paired clean run).
pub fn run_one(
    run: &ResolvedRun,
    config: &ExperimentConfig,
    with_noise: bool,
) -> Result<Vec<Row>> {
    let sched = &run.schedule;
    let plan = &config.observables;
    let noise: Option<&NoiseEvent> = if with_noise { run.noise.as_ref() } else { None };
    let total = sched.total_duration();
    let steps = window_steps(0.0, total, sched.dt)?;
    let sampler = Sampler::new(steps, plan.samples, plan.population_samples);
    let spec0 = sched.params_at_clamped(0.0);
    let spinors = initial_product(sched, config.initial);
    let mut rows: Vec<Row> = Vec::with_capacity(sampler.energy.len());

    match run.engine {
        EngineChoice::Exact => {
            let mut ham = DenseHamiltonian::new(spec0)?;
            let mut psi = match &spinors {
                Some(s) => DenseState::product(s),
                None => ham.ground_state()?.1,
            };
            evolve_dense(sched, &mut psi, noise, &EvolveOptions::default(), |k, t, st| {
                if !sampler.energy.contains(&k) {
                    return Ok(());
                }
                let spec = sched.params_at_clamped(t);
                ham.set_params(spec)?;
                let energy = ham.energy(st);
                let mut fidelity = None;
                let mut populations = None;
                if sampler.pops.contains(&k) {
                    if plan.fidelity || plan.eigen_populations {
                        let snap = spectrum_populations(&ham, st, t)?;
                        if plan.fidelity {
                            fidelity = Some(snap.ground_fidelity());
                        }
                        if plan.eigen_populations {
                            populations =
                                Some(split_populations(snap.group_populations(), plan.k_max));
                        }
                    }
                    if populations.is_none() && plan.excitations {
                        if let Some(refs) = &spinors {
                            populations = Some(excitation_populations(st, refs, plan.k_max)?);
                        }
                    }
                }
                rows.push(Row {
                    t,
                    params: spec.params,
                    energy,
                    delta_e: None,
                    fidelity,
                    populations,
                    max_chi: None,
                    trunc_weight: None,
                });
                Ok(())
            })?;
        }
        EngineChoice::FreeFermion => {
            let mut ham = MajoranaHamiltonian::from_spec(&spec0)?;
            let (mut state, _) = ground_covariance(&ham)?;
            evolve_covariance(sched, &mut state, noise, &CovEvolveOptions::default(), |k, t, st| {
                if !sampler.energy.contains(&k) {
                    return Ok(());
                }
                let spec = sched.params_at_clamped(t);
                ham.set_couplings(&spec)?;
                rows.push(Row {
                    t,
                    params: spec.params,
                    energy: ham.energy(st),
                    delta_e: None,
                    fidelity: None,
                    populations: None,
                    max_chi: None,
                    trunc_weight: None,
                });
                Ok(())
            })?;
        }
        EngineChoice::Mps => {
            let mut mps = match &spinors {
                Some(s) => product_mps(s, config.mps.cutoff, config.mps.chi_cap),
                None => ground_state_imaginary_tebd(&spec0, &config.mps, 1e-9)?.0,
            };
            tebd_evolve(sched, &mut mps, noise, |k, t, st| {
                if !sampler.energy.contains(&k) {
                    return Ok(());
                }
                let spec = sched.params_at_clamped(t);
                let energy = st.energy(&spec)?;
                let mut populations = None;
                if sampler.pops.contains(&k) && plan.excitations {
                    if let Some(refs) = &spinors {
                        populations = Some(hamming_populations(st, refs, plan.k_max)?);
                    }
                }
                rows.push(Row {
                    t,
                    params: spec.params,
                    energy,
                    delta_e: None,
                    fidelity: None,
                    populations,
                    max_chi: Some(st.max_chi()),
                    trunc_weight: Some(st.cum_trunc),
                });
                Ok(())
            })?;
        }
        EngineChoice::Auto => {
            return Err(CoreError::Invalid("engine choice was not resolved".into()));
        }
    }
    Ok(rows)
}

/// δ_E(t) = E_noisy(t) − E_clean(t) between two records of the same
/// schedule, engine and dt, sampled on the same grid.
pub fn excess_energy(noisy: &ResultRecord, clean: &ResultRecord) -> Result<Vec<(f64, f64)>> {
    if noisy.n != clean.n
        || noisy.engine != clean.engine
        || noisy.config.family != clean.config.family
        || noisy.config.vertices != clean.config.vertices
        || noisy.config.t_rule != clean.config.t_rule
        || noisy.config.dt != clean.config.dt
    {
        return Err(CoreError::Invalid(
            "excess energy needs runs sharing schedule, engine and dt".into(),
        ));
    }
    if noisy.rows.len() != clean.rows.len() {
        return Err(CoreError::Invalid(format!(
            "row counts differ: {} vs {}",
            noisy.rows.len(),
            clean.rows.len()
        )));
    }
    let mut series = Vec::with_capacity(noisy.rows.len());
    for (a, b) in noisy.rows.iter().zip(&clean.rows) {
        if (a.t - b.t).abs() > 1e-9 * (1.0 + a.t.abs()) {
            return Err(CoreError::Invalid(format!(
                "sample times differ: {} vs {}",
                a.t, b.t
            )));
        }
        series.push((a.t, a.energy - b.energy));
    }
    Ok(series)
}

fn attach_delta(mut noisy: Vec<Row>, clean: &[Row]) -> Result<Vec<Row>> {
    if noisy.len() != clean.len() {
        return Err(CoreError::Numerical(format!(
            "paired runs sampled {} vs {} rows",
            noisy.len(),
            clean.len()
        )));
    }
    for (a, b) in noisy.iter_mut().zip(clean) {
        if (a.t - b.t).abs() > 1e-9 * (1.0 + a.t.abs()) {
            return Err(CoreError::Numerical(format!(
                "paired runs sampled t = {} vs {}",
                a.t, b.t
            )));
        }
        a.delta_e = Some(a.energy - b.energy);
    }
    Ok(noisy)
}

/// Run the config at every configured size. When noise is enabled each size
/// runs twice (clean and noisy) and the record carries δ_E per row.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let diags = config.validate();
    if !diags.is_empty() {
        return Err(CoreError::Invalid(diags.join("; ")));
    }
    let mut out = Vec::with_capacity(config.sizes.len());
    for &n in &config.sizes {
        let started = Instant::now();
        let run = config.resolve(n)?;
        let clean = run_one(&run, config, false)?;
        let rows = if run.noise.is_some() {
            attach_delta(run_one(&run, config, true)?, &clean)?
        } else {
            clean
        };
        out.push(ResultRecord {
            config: config.clone(),
            n,
            engine: run.engine,
            rows,
            metadata: RunMetadata {
                seed: config.seed,
                wall_seconds: started.elapsed().as_secs_f64(),
                code_version: code_version(),
            },
        });
    }
    Ok(out)
}

/// Quantum-trajectory average of the depolarizing channel with strength `p`:
/// the clean trajectory with weight 1−p and the X/Y/Z trajectories with
/// weight p/3 each. Rows carry the averaged energy, with δ_E against the
/// clean run; per-axis finals are returned alongside.
pub struct DepolarizingAverage {
    pub record: ResultRecord,
    /// Final energies of the (clean, X, Y, Z) trajectories.
    pub trajectory_finals: [f64; 4],
}

pub fn depolarizing_average(
    config: &ExperimentConfig,
    n: usize,
    p: f64,
) -> Result<DepolarizingAverage> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CoreError::Invalid(format!("channel strength must be in [0, 1], got {p}")));
    }
    if !config.noise.enabled {
        return Err(CoreError::Invalid(
            "depolarizing average needs an enabled noise block for site and time".into(),
        ));
    }
    let diags = config.validate();
    if !diags.is_empty() {
        return Err(CoreError::Invalid(diags.join("; ")));
    }
    let started = Instant::now();
    let run = config.resolve(n)?;
    let clean = run_one(&run, config, false)?;
    use adsweep_core::models::PauliAxis;
    let mut branches = Vec::with_capacity(3);
    for axis in [PauliAxis::X, PauliAxis::Y, PauliAxis::Z] {
        let mut cfg = config.clone();
        cfg.noise.axis = axis;
        let branch_run = cfg.resolve(n)?;
        branches.push(run_one(&branch_run, &cfg, true)?);
    }

    let mut rows = clean.clone();
    for (i, row) in rows.iter_mut().enumerate() {
        let avg = (1.0 - p) * clean[i].energy
            + p / 3.0 * branches.iter().map(|b| b[i].energy).sum::<f64>();
        row.energy = avg;
        row.delta_e = Some(avg - clean[i].energy);
        row.fidelity = None;
        row.populations = None;
    }
    let finals = [
        clean.last().map(|r| r.energy).unwrap_or(f64::NAN),
        branches[0].last().map(|r| r.energy).unwrap_or(f64::NAN),
        branches[1].last().map(|r| r.energy).unwrap_or(f64::NAN),
        branches[2].last().map(|r| r.energy).unwrap_or(f64::NAN),
    ];
    Ok(DepolarizingAverage {
        record: ResultRecord {
            config: config.clone(),
            n,
            engine: run.engine,
            rows,
            metadata: RunMetadata {
                seed: config.seed,
                wall_seconds: started.elapsed().as_secs_f64(),
                code_version: code_version(),
            },
        },
        trajectory_finals: finals,
    })
}

/// The same closed-loop run with the error on an even site and on the
/// adjacent odd site; everything else identical.
pub fn afm_parity_study(config: &ExperimentConfig, n: usize) -> Result<(ResultRecord, ResultRecord)> {
    if config.vertices.first() != config.vertices.last() {
        return Err(CoreError::Invalid("parity study needs a closed-loop schedule".into()));
    }
    if !config.noise.enabled {
        return Err(CoreError::Invalid("parity study needs noise enabled".into()));
    }
    let base = config.noise.site.evaluate(n);
    let even = base - base % 2;
    let odd = if even + 1 < n { even + 1 } else { even.saturating_sub(1) };
    let mut records = Vec::with_capacity(2);
    for site in [even, odd] {
        let mut cfg = config.clone();
        cfg.sizes = vec![n];
        cfg.noise.site = SiteRule::Index(site);
        records.extend(run_experiment(&cfg)?);
    }
    let odd_rec = records.pop().unwrap();
    let even_rec = records.pop().unwrap();
    Ok((even_rec, odd_rec))
}

/// Twice the largest single-particle energy at the schedule's final point:
/// the rigorous ceiling on the excess energy a single error can leave
/// behind on the free-fermion line.
pub fn final_energy_ceiling(config: &ExperimentConfig, n: usize) -> Result<f64> {
    let run = config.resolve(n)?;
    let spec = run.schedule.params_at_clamped(run.schedule.total_duration());
    let ham = MajoranaHamiltonian::from_spec(&spec)?;
    let omega = single_particle_energies(&ham)?;
    Ok(2.0 * omega.iter().cloned().fold(0.0, f64::max))
}

/// Least-squares slope and intercept of y against x.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let m = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = m * sxx - sx * sx;
    let slope = (m * sxy - sx * sy) / denom;
    (slope, (sy - slope * sx) / m)
}

/// Exponent of a power-law fit y = A·x^α via least squares in log-log.
pub fn log_log_exponent(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use adsweep_core::models::{
        Couplings, InitialStateChoice, ModelFamily, MpsSettings, NoiseTemplate, ObservablePlan,
        PauliAxis, TRule, TimeRule,
    };

    fn tfim_config(engine: EngineChoice, sizes: Vec<usize>) -> ExperimentConfig {
        ExperimentConfig {
            family: ModelFamily::Zzxz,
            sizes,
            vertices: vec![Couplings::zzxz(0.0, 1.0, 0.0), Couplings::zzxz(2.0, 1.0, 0.0)],
            t_rule: TRule::Fixed(2.0),
            dt: 0.01,
            noise: NoiseTemplate::default(),
            engine,
            initial: InitialStateChoice::Auto,
            mps: MpsSettings { cutoff: 1e-10, chi_cap: 64 },
            observables: ObservablePlan {
                samples: 9,
                k_max: 2,
                excitations: true,
                fidelity: false,
                eigen_populations: false,
                population_samples: 3,
            },
            seed: 3,
        }
    }

    #[test]
    fn sample_grids_cover_endpoints() {
        let s = sample_steps(100, 5);
        assert!(s.contains(&0) && s.contains(&100));
        assert_eq!(s.len(), 5);
        let all = sample_steps(3, 50);
        assert_eq!(all.len(), 4);
        let sampler = Sampler::new(200, 11, 3);
        assert!(sampler.pops.is_subset(&sampler.energy));
        assert!(sampler.pops.contains(&0) && sampler.pops.contains(&200));
    }

    #[test]
    fn rows_are_paired_and_zero_before_noise() {
        let cfg = tfim_config(EngineChoice::Exact, vec![6]);
        let records = run_experiment(&cfg).unwrap();
        assert_eq!(records.len(), 1);
        let rec = &records[0];
        assert!(rec.defects().is_empty());
        assert_eq!(rec.rows.len(), 9);
        let t_noise = 0.05 * 2.0;
        for row in &rec.rows {
            let d = row.delta_e.unwrap();
            if row.t < t_noise - 1e-12 {
                assert!(d.abs() < 1e-9, "pre-noise delta {d} at t = {}", row.t);
            }
        }
        assert!(rec.final_delta_e().unwrap() > 1e-3);
    }

    #[test]
    fn disabled_noise_gives_plain_rows() {
        let mut cfg = tfim_config(EngineChoice::Exact, vec![5]);
        cfg.noise.enabled = false;
        let rec = &run_experiment(&cfg).unwrap()[0];
        assert!(rec.rows.iter().all(|r| r.delta_e.is_none()));
    }

    #[test]
    fn excess_energy_checks_pairing_and_matches_driver() {
        let cfg = tfim_config(EngineChoice::Exact, vec![5]);
        let noisy = run_experiment(&cfg).unwrap().remove(0);
        let mut clean_cfg = cfg.clone();
        clean_cfg.noise.enabled = false;
        let clean = run_experiment(&clean_cfg).unwrap().remove(0);

        let series = excess_energy(&noisy, &clean).unwrap();
        for (row, (t, d)) in noisy.rows.iter().zip(&series) {
            assert_eq!(row.t, *t);
            assert!((row.delta_e.unwrap() - d).abs() < 1e-12);
        }

        let mut other = clean.clone();
        other.config.dt = 0.02;
        assert!(excess_energy(&noisy, &other).is_err());
    }

    #[test]
    fn clean_and_noiseless_pair_has_zero_excess() {
        let mut cfg = tfim_config(EngineChoice::Exact, vec![4]);
        cfg.noise.enabled = false;
        let a = run_experiment(&cfg).unwrap().remove(0);
        let b = run_experiment(&cfg).unwrap().remove(0);
        for (_, d) in excess_energy(&a, &b).unwrap() {
            assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn engines_see_the_same_physics() {
        let mut cfg = tfim_config(EngineChoice::Exact, vec![6]);
        cfg.dt = 0.002;
        cfg.mps = MpsSettings { cutoff: 1e-14, chi_cap: 64 };
        let e_exact = run_experiment(&cfg).unwrap()[0].final_energy().unwrap();
        cfg.engine = EngineChoice::FreeFermion;
        let e_ff = run_experiment(&cfg).unwrap()[0].final_energy().unwrap();
        assert!((e_exact - e_ff).abs() < 1e-6, "exact {e_exact} vs free-fermion {e_ff}");
    }

    #[test]
    fn single_flip_on_field_ground_costs_two() {
        // At J = 0, Bx = 1 an X error commutes with H while Y and Z each
        // cost 2: the depolarizing average at t = 0 jumps by 4p/3.
        let mut cfg = tfim_config(EngineChoice::Exact, vec![6]);
        cfg.noise.time = TimeRule::Absolute(0.0);
        cfg.noise.axis = PauliAxis::Y;
        let avg = depolarizing_average(&cfg, 6, 1.0).unwrap();
        let first = &avg.record.rows[0];
        assert!((first.delta_e.unwrap() - 4.0 / 3.0).abs() < 1e-9);

        let p0 = depolarizing_average(&cfg, 6, 0.0).unwrap();
        for row in &p0.record.rows {
            assert_eq!(row.delta_e.unwrap(), 0.0);
        }
    }

    #[test]
    fn fits_recover_known_laws() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let (slope, icept) = linear_fit(&xs, &ys);
        assert!((slope - 2.5).abs() < 1e-12 && (icept + 1.0).abs() < 1e-12);
        let ps: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(0.6)).collect();
        assert!((log_log_exponent(&xs, &ps) - 0.6).abs() < 1e-12);
    }
}
