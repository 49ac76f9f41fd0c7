//! Declarative experiment configuration: a TOML file with `model`,
//! `schedule`, `noise`, `engine` and `output` blocks, converted into the
//! engine-level [`ExperimentConfig`].
//!
//! The axial coupling key is family-specific: ZZXZ vertices use `bz`,
//! Heisenberg-with-X-field vertices use `jz`. Using the wrong key is a
//! validation error rather than a silent reinterpretation.

use adsweep_core::models::{
    Couplings, EngineChoice, ExperimentConfig, InitialStateChoice, ModelFamily, MpsSettings,
    NoiseTemplate, ObservablePlan, PauliAxis, SiteRule, TRule, TimeRule,
};
use adsweep_core::{CoreError, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    schedule: RawSchedule,
    #[serde(default)]
    noise: RawNoise,
    #[serde(default)]
    engine: RawEngine,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    family: ModelFamily,
    sizes: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    vertices: Vec<RawVertex>,
    /// Per-leg duration: a number or the symbolic rule "n^2/<den>".
    t: toml::Value,
    dt: f64,
    /// Append the first vertex at the end, closing the path.
    #[serde(default)]
    closed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVertex {
    #[serde(default)]
    j: f64,
    #[serde(default)]
    bx: f64,
    bz: Option<f64>,
    jz: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawNoise {
    enabled: bool,
    axis: PauliAxis,
    site: RawSite,
    time_fraction: Option<f64>,
    time_absolute: Option<f64>,
}

impl Default for RawNoise {
    fn default() -> Self {
        RawNoise {
            enabled: true,
            axis: PauliAxis::Y,
            site: RawSite::Name("center".into()),
            time_fraction: None,
            time_absolute: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawSite {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawEngine {
    kind: EngineChoice,
    initial: InitialStateChoice,
    cutoff: f64,
    chi_cap: usize,
}

impl Default for RawEngine {
    fn default() -> Self {
        let mps = MpsSettings::default();
        RawEngine {
            kind: EngineChoice::Auto,
            initial: InitialStateChoice::Auto,
            cutoff: mps.cutoff,
            chi_cap: mps.chi_cap,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOutput {
    samples: usize,
    population_samples: usize,
    k_max: usize,
    excitations: bool,
    fidelity: bool,
    eigen_populations: bool,
}

impl Default for RawOutput {
    fn default() -> Self {
        let plan = ObservablePlan::default();
        RawOutput {
            samples: plan.samples,
            population_samples: plan.population_samples,
            k_max: plan.k_max,
            excitations: plan.excitations,
            fidelity: plan.fidelity,
            eigen_populations: plan.eigen_populations,
        }
    }
}

fn vertex_to_couplings(family: ModelFamily, i: usize, v: &RawVertex) -> Result<Couplings> {
    match family {
        ModelFamily::Zzxz => {
            if v.jz.is_some() {
                return Err(CoreError::Invalid(format!(
                    "vertex {i}: ZZXZ vertices take `bz`, not `jz`"
                )));
            }
            Ok(Couplings::zzxz(v.j, v.bx, v.bz.unwrap_or(0.0)))
        }
        ModelFamily::HeisenbergX => {
            if v.bz.is_some() {
                return Err(CoreError::Invalid(format!(
                    "vertex {i}: Heisenberg vertices take `jz`, not `bz`"
                )));
            }
            Ok(Couplings::heisenberg_x(v.j, v.jz.unwrap_or(0.0), v.bx))
        }
    }
}

fn parse_t_rule(v: &toml::Value) -> Result<TRule> {
    match v {
        toml::Value::String(s) => TRule::parse(s),
        toml::Value::Float(f) => TRule::parse(&f.to_string()),
        toml::Value::Integer(i) => TRule::parse(&i.to_string()),
        other => Err(CoreError::Invalid(format!("bad schedule.t: {other:?}"))),
    }
}

/// Parse the TOML text of a config file.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| CoreError::Invalid(format!("config parse: {e}")))?;

    let mut vertices = Vec::with_capacity(raw.schedule.vertices.len() + 1);
    for (i, v) in raw.schedule.vertices.iter().enumerate() {
        vertices.push(vertex_to_couplings(raw.model.family, i, v)?);
    }
    if raw.schedule.closed {
        if let Some(first) = vertices.first().copied() {
            vertices.push(first);
        }
    }

    let time = match (raw.noise.time_fraction, raw.noise.time_absolute) {
        (Some(_), Some(_)) => {
            return Err(CoreError::Invalid(
                "noise block sets both time_fraction and time_absolute".into(),
            ))
        }
        (Some(f), None) => TimeRule::Fraction(f),
        (None, Some(t)) => TimeRule::Absolute(t),
        (None, None) => TimeRule::Fraction(0.05),
    };
    let site = match &raw.noise.site {
        RawSite::Name(s) if s == "center" => SiteRule::Center,
        RawSite::Name(s) => {
            return Err(CoreError::Invalid(format!(
                "noise.site must be \"center\" or an index, got {s:?}"
            )))
        }
        RawSite::Index(i) => SiteRule::Index(*i),
    };

    let config = ExperimentConfig {
        family: raw.model.family,
        sizes: raw.model.sizes,
        vertices,
        t_rule: parse_t_rule(&raw.schedule.t)?,
        dt: raw.schedule.dt,
        noise: NoiseTemplate { enabled: raw.noise.enabled, site, time, axis: raw.noise.axis },
        engine: raw.engine.kind,
        initial: raw.engine.initial,
        mps: MpsSettings { cutoff: raw.engine.cutoff, chi_cap: raw.engine.chi_cap },
        observables: ObservablePlan {
            samples: raw.output.samples,
            k_max: raw.output.k_max,
            excitations: raw.output.excitations,
            fidelity: raw.output.fidelity,
            eigen_populations: raw.output.eigen_populations,
            population_samples: raw.output.population_samples,
        },
        seed: raw.seed,
    };
    Ok(config)
}

/// Read and parse a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}
