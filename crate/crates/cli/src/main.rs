//! `adsweep` — experiment driver for adiabatic sweeps of 1D spin chains
//! under a single injected Pauli error.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical failure,
//! 3 capacity (size/bond-dimension cap) error.

use adsweep_cli::bound::{concentration_bound, BoundQuery};
use adsweep_cli::driver::{
    afm_parity_study, depolarizing_average, final_energy_ceiling, linear_fit, log_log_exponent,
    run_experiment,
};
use adsweep_cli::export::{export_records, gnuplot_stub, ExportFormat};
use adsweep_cli::records::ResultRecord;
use adsweep_core::models::{
    Couplings, EngineChoice, ExperimentConfig, InitialStateChoice, ModelFamily, MpsSettings,
    NoiseTemplate, ObservablePlan, TRule,
};
use adsweep_core::randomcircuit::{chain_distribution, return_probability, spread_study, FirstLayer};
use adsweep_core::{CoreError, ErrorClass};
use clap::{Parser, Subcommand, ValueEnum};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "adsweep",
    version,
    about = "Adiabatic sweeps of 1D spin chains under a single Pauli error"
)]
struct Cli {
    /// Experiment config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for exported data.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the config's engine.
    #[arg(long, global = true, value_enum)]
    engine: Option<EngineArg>,
    /// Export format.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Also write a gnuplot script stub next to the CSVs.
    #[arg(long, global = true)]
    plot: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    Exact,
    Mps,
    FreeFermion,
}

impl From<EngineArg> for EngineChoice {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Exact => EngineChoice::Exact,
            EngineArg::Mps => EngineChoice::Mps,
            EngineArg::FreeFermion => EngineChoice::FreeFermion,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for ExportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ExportFormat::Csv,
            FormatArg::Json => ExportFormat::Json,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FirstLayerArg {
    Even,
    Odd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the configured sweep at every size, paired clean/noisy.
    Sweep {
        /// Also export the depolarizing-channel average at this strength.
        #[arg(long)]
        depolarize: Option<f64>,
    },
    /// Multi-size sweep study reporting how the final excess energy scales.
    Scaling,
    /// Closed-loop run reporting the final excitation populations.
    #[command(name = "loop")]
    LoopRun,
    /// Same loop with the error on an even vs an adjacent odd site.
    Afm,
    /// Monte Carlo error-spread study on the brick-wall circuit chain.
    Markov {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 300)]
        layers: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Initial error site (defaults to the chain center).
        #[arg(long)]
        start: Option<usize>,
        #[arg(long, value_enum, default_value_t = FirstLayerArg::Even)]
        first: FirstLayerArg,
        /// Also export the damage distribution after this many layers.
        #[arg(long)]
        distribution_at: Option<usize>,
    },
    /// Evaluate the eigenspace-overlap bound.
    Bound {
        /// Energy of the pre-error state.
        #[arg(long)]
        lambda: f64,
        /// Largest energy jump a single-qubit error can cause.
        #[arg(long)]
        c: f64,
        /// Energy of the target eigenspace.
        #[arg(long)]
        f: f64,
        /// Lattice dimension.
        #[arg(long, default_value_t = 1)]
        dim: u32,
        /// Interaction range (correlation length).
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Number of local Hamiltonian terms.
        #[arg(long)]
        m: u64,
    },
    /// Validate a config and cross-check the engines at small size.
    Validate {
        /// Only validate the config; skip the engine cross-checks.
        #[arg(long)]
        config_only: bool,
    },
}

fn exit_code(err: &CoreError) -> u8 {
    match err.class() {
        ErrorClass::Validation => 1,
        ErrorClass::Numerical => 2,
        ErrorClass::Capacity => 3,
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CoreError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CoreError::Invalid("this subcommand needs --config".into()))?;
    let mut cfg = adsweep_cli::config::load_config(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(engine) = cli.engine {
        cfg.engine = engine.into();
    }
    Ok(cfg)
}

fn summarize(rec: &ResultRecord) -> String {
    let mut line = format!(
        "n = {:>3}  engine = {:<12} rows = {:>4}  E_final = {:+.9}",
        rec.n,
        format!("{:?}", rec.engine).to_lowercase(),
        rec.rows.len(),
        rec.final_energy().unwrap_or(f64::NAN),
    );
    if let Some(d) = rec.final_delta_e() {
        let _ = write!(line, "  delta_e = {d:+.9}");
    }
    if let Some(chi) = rec.max_chi() {
        let _ = write!(line, "  max_chi = {chi}");
    }
    line
}

fn export_and_report(
    cli: &Cli,
    stem: &str,
    cfg: &ExperimentConfig,
    records: &[ResultRecord],
) -> Result<(), CoreError> {
    for rec in records {
        let defects = rec.defects();
        if !defects.is_empty() {
            return Err(CoreError::Numerical(format!(
                "record n = {} violated invariants: {}",
                rec.n,
                defects.join("; ")
            )));
        }
        println!("{}", summarize(rec));
    }
    let files = export_records(&cli.out, stem, cfg, records, cli.format.into())?;
    if cli.plot && cli.format == FormatArg::Csv {
        let csvs: Vec<PathBuf> =
            files.iter().filter(|p| p.extension().is_some_and(|e| e == "csv")).cloned().collect();
        gnuplot_stub(&cli.out, stem, &csvs)?;
    }
    for f in &files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_sweep(cli: &Cli, depolarize: Option<f64>) -> Result<(), CoreError> {
    let cfg = load(cli)?;
    let records = run_experiment(&cfg)?;
    export_and_report(cli, "sweep", &cfg, &records)?;
    if let Some(p) = depolarize {
        let mut avg_records = Vec::new();
        for &n in &cfg.sizes {
            let avg = depolarizing_average(&cfg, n, p)?;
            println!(
                "n = {:>3}  depolarizing p = {p}: final averaged delta_e = {:+.9}",
                n,
                avg.record.final_delta_e().unwrap_or(f64::NAN)
            );
            avg_records.push(avg.record);
        }
        export_and_report(cli, "depolarized", &cfg, &avg_records)?;
    }
    Ok(())
}

fn cmd_scaling(cli: &Cli) -> Result<(), CoreError> {
    let cfg = load(cli)?;
    if !cfg.noise.enabled {
        return Err(CoreError::Invalid("scaling study needs noise enabled".into()));
    }
    let records = run_experiment(&cfg)?;
    export_and_report(cli, "scaling", &cfg, &records)?;

    let mut ns = Vec::new();
    let mut deltas = Vec::new();
    let mut summary = String::from("n,leg_duration,delta_e,energy_ceiling\n");
    for rec in &records {
        let d = rec.final_delta_e().ok_or_else(|| {
            CoreError::Numerical(format!("run n = {} produced no excess energy", rec.n))
        })?;
        let ceiling = if rec.engine == EngineChoice::FreeFermion {
            Some(final_energy_ceiling(&cfg, rec.n)?)
        } else {
            None
        };
        let t_leg = cfg.t_rule.evaluate(rec.n);
        match ceiling {
            Some(c) => {
                let _ = writeln!(summary, "{},{},{},{}", rec.n, t_leg, d, c);
                println!(
                    "n = {:>3}  T = {:>8.2}  delta_e = {d:+.6e}  ceiling 2*max omega = {c:.6e}  {}",
                    rec.n,
                    t_leg,
                    if d <= c { "within" } else { "EXCEEDS" }
                );
            }
            None => {
                let _ = writeln!(summary, "{},{},{},", rec.n, t_leg, d);
                println!("n = {:>3}  T = {:>8.2}  delta_e = {d:+.6e}", rec.n, t_leg);
            }
        }
        ns.push(rec.n as f64);
        deltas.push(d);
    }
    if ns.len() >= 2 {
        let (slope, _) = linear_fit(&ns, &deltas);
        println!("linear slope of delta_e vs n: {slope:+.6e}");
        if deltas.iter().all(|&d| d > 0.0) {
            println!("log-log exponent of delta_e vs n: {:+.4}", log_log_exponent(&ns, &deltas));
        }
    }
    std::fs::create_dir_all(&cli.out)?;
    let path = cli.out.join("scaling_summary.csv");
    std::fs::write(&path, summary)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn print_populations(label: &str, rec: &ResultRecord) {
    match rec.final_populations() {
        Some((pops, rest)) => {
            let body = pops
                .iter()
                .enumerate()
                .map(|(k, p)| format!("p{k} = {p:.6}"))
                .collect::<Vec<_>>()
                .join(", ");
            println!("{label} n = {:>3}: {body}, p_rest = {rest:.6}", rec.n);
        }
        None => println!("{label} n = {:>3}: no populations recorded", rec.n),
    }
}

fn cmd_loop(cli: &Cli) -> Result<(), CoreError> {
    let cfg = load(cli)?;
    if cfg.vertices.first() != cfg.vertices.last() {
        return Err(CoreError::Invalid(
            "loop subcommand needs a closed schedule (set schedule.closed = true)".into(),
        ));
    }
    let records = run_experiment(&cfg)?;
    export_and_report(cli, "loop", &cfg, &records)?;
    for rec in &records {
        print_populations("loop", rec);
    }
    Ok(())
}

fn cmd_afm(cli: &Cli) -> Result<(), CoreError> {
    let cfg = load(cli)?;
    let mut evens = Vec::new();
    let mut odds = Vec::new();
    for &n in &cfg.sizes {
        let (even, odd) = afm_parity_study(&cfg, n)?;
        print_populations("even-site", &even);
        print_populations(" odd-site", &odd);
        evens.push(even);
        odds.push(odd);
    }
    export_and_report(cli, "afm_even", &cfg, &evens)?;
    export_and_report(cli, "afm_odd", &cfg, &odds)?;
    Ok(())
}

fn cmd_markov(
    cli: &Cli,
    n: usize,
    layers: usize,
    samples: usize,
    start: Option<usize>,
    first: FirstLayerArg,
    distribution_at: Option<usize>,
) -> Result<(), CoreError> {
    let start = start.unwrap_or(n / 2);
    let first = match first {
        FirstLayerArg::Even => FirstLayer::Even,
        FirstLayerArg::Odd => FirstLayer::Odd,
    };
    let seed = cli.seed.unwrap_or(0);
    let study = spread_study(n, layers, start, first, samples, seed)?;
    let (ret, bands) = return_probability(n, layers, start, first, samples, seed)?;

    let mut csv = String::from("t,mean_q,sem,p_dead,dead_lo,dead_hi,p_full\n");
    for t in 0..=layers {
        let _ = writeln!(
            csv,
            "{t},{},{},{},{},{},{}",
            study.mean[t], study.sem[t], ret[t], bands[t].0, bands[t].1, study.full[t]
        );
    }
    std::fs::create_dir_all(&cli.out)?;
    let path = cli.out.join("markov.csv");
    std::fs::write(&path, csv)?;
    println!(
        "n = {n}, {layers} layers, {samples} trajectories: <q(final)> = {:.4} +- {:.4}, dead = {:.4}, full = {:.4}, unresolved = {:.2e}",
        study.mean[layers], study.sem[layers], ret[layers], study.full[layers], study.unresolved
    );
    println!("wrote {}", path.display());

    if let Some(t) = distribution_at {
        let dist = chain_distribution(n, t, start, first, samples, seed)?;
        let mut csv = String::from("q,prob\n");
        for (q, p) in dist.probs().iter().enumerate() {
            let _ = writeln!(csv, "{q},{p}");
        }
        let path = cli.out.join(format!("markov_distribution_t{t}.csv"));
        std::fs::write(&path, csv)?;
        println!("distribution after {t} layers: <q> = {:.4}", dist.mean());
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_bound(lambda: f64, c: f64, f: f64, dim: u32, sigma: f64, m: u64) -> Result<(), CoreError> {
    let q = BoundQuery { lambda, c, f, dim, sigma, m };
    let r = concentration_bound(&q)?;
    println!("gap lambda + c - f = {}", lambda + c - f);
    println!("exponent = {}", r.exponent);
    println!("sqrt(p_f) <= {}", r.root_pf);
    println!(
        "validity |lambda + c - f| > 2^D sqrt(m sigma): {}",
        if r.valid { "holds" } else { "NOT satisfied (bound not meaningful)" }
    );
    Ok(())
}

/// Cross-check the engines on small instances: the same noisy sweep must
/// give the same final energy on every engine that can run it.
fn cmd_validate(cli: &Cli, config_only: bool) -> Result<(), CoreError> {
    if let Some(path) = &cli.config {
        let cfg = adsweep_cli::config::load_config(path)?;
        let diags = cfg.validate();
        if diags.is_empty() {
            println!("config ok: {}", path.display());
        } else {
            for d in &diags {
                eprintln!("config problem: {d}");
            }
            return Err(CoreError::Invalid(format!("{} config problem(s)", diags.len())));
        }
    }
    if config_only {
        return Ok(());
    }

    let base = ExperimentConfig {
        family: ModelFamily::Zzxz,
        sizes: vec![6],
        vertices: vec![Couplings::zzxz(0.0, 1.0, 0.0), Couplings::zzxz(2.0, 1.0, 0.0)],
        t_rule: TRule::Fixed(2.0),
        dt: 0.002,
        noise: NoiseTemplate::default(),
        engine: EngineChoice::Exact,
        initial: InitialStateChoice::Auto,
        mps: MpsSettings { cutoff: 1e-15, chi_cap: 64 },
        observables: ObservablePlan {
            samples: 5,
            population_samples: 2,
            k_max: 2,
            excitations: true,
            fidelity: false,
            eigen_populations: false,
        },
        seed: 0,
    };
    let mut worst: f64 = 0.0;
    for (label, family, axial) in
        [("transverse-field Ising", ModelFamily::Zzxz, 0.0), ("Heisenberg + X field", ModelFamily::HeisenbergX, 0.4)]
    {
        let mut cfg = base.clone();
        cfg.family = family;
        cfg.vertices = match family {
            ModelFamily::Zzxz => base.vertices.clone(),
            ModelFamily::HeisenbergX => vec![
                Couplings::heisenberg_x(0.0, 0.0, 1.0),
                Couplings::heisenberg_x(1.2, axial, 1.0),
            ],
        };
        let exact = run_experiment(&cfg)?.remove(0);
        cfg.engine = EngineChoice::Mps;
        let mps = run_experiment(&cfg)?.remove(0);
        let max_gap = exact
            .rows
            .iter()
            .zip(&mps.rows)
            .map(|(a, b)| (a.energy - b.energy).abs())
            .fold(0.0, f64::max);
        println!("{label}: max |exact - mps| across sampled times = {max_gap:.3e}");
        worst = worst.max(max_gap);
        if family == ModelFamily::Zzxz {
            cfg.engine = EngineChoice::FreeFermion;
            let ff = run_experiment(&cfg)?.remove(0);
            let d_ff = (exact.final_energy().unwrap() - ff.final_energy().unwrap()).abs();
            worst = worst.max(d_ff);
            println!("{label}: |exact - freefermion| = {d_ff:.3e}");
        }
    }
    if worst > 1e-5 {
        return Err(CoreError::Numerical(format!(
            "engine cross-check disagreement {worst:.3e} exceeds 1e-5"
        )));
    }
    println!("engines agree within {worst:.3e}");
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CoreError> {
    match &cli.cmd {
        Cmd::Sweep { depolarize } => cmd_sweep(cli, *depolarize),
        Cmd::Scaling => cmd_scaling(cli),
        Cmd::LoopRun => cmd_loop(cli),
        Cmd::Afm => cmd_afm(cli),
        Cmd::Markov { n, layers, samples, start, first, distribution_at } => {
            cmd_markov(cli, *n, *layers, *samples, *start, *first, *distribution_at)
        }
        Cmd::Bound { lambda, c, f, dim, sigma, m } => cmd_bound(*lambda, *c, *f, *dim, *sigma, *m),
        Cmd::Validate { config_only } => cmd_validate(cli, *config_only),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
