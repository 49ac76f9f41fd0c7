//! Run results: one time-ordered row per sampled step boundary plus the
//! configuration echo and reproducibility metadata.

use adsweep_core::models::{Couplings, EngineChoice, ExperimentConfig};
use serde::{Deserialize, Serialize};

/// One sampled step boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub t: f64,
    pub params: Couplings,
    pub energy: f64,
    /// Excess energy over the paired clean run; present only when one exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_e: Option<f64>,
    /// Ground-space fidelity (exact engine, on the population grid).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<f64>,
    /// (p_0..p_kMax, p_rest) relative to the reference product state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub populations: Option<(Vec<f64>, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_chi: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trunc_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub wall_seconds: f64,
    pub code_version: String,
}

/// Full outcome of one run (one size, one engine).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config: ExperimentConfig,
    pub n: usize,
    pub engine: EngineChoice,
    pub rows: Vec<Row>,
    pub metadata: RunMetadata,
}

impl ResultRecord {
    /// Structural invariant violations: rows must be time-ordered and all
    /// probabilities must lie in [0, 1].
    pub fn defects(&self) -> Vec<String> {
        let mut out = Vec::new();
        for w in self.rows.windows(2) {
            if w[1].t < w[0].t {
                out.push(format!("rows out of order at t = {} after {}", w[1].t, w[0].t));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(f) = row.fidelity {
                if !(-1e-9..=1.0 + 1e-9).contains(&f) {
                    out.push(format!("row {i}: fidelity {f} outside [0, 1]"));
                }
            }
            if let Some((pops, rest)) = &row.populations {
                for (k, &p) in pops.iter().enumerate() {
                    if !(-1e-9..=1.0 + 1e-9).contains(&p) {
                        out.push(format!("row {i}: p_{k} = {p} outside [0, 1]"));
                    }
                }
                if !(-1e-9..=1.0 + 1e-9).contains(rest) {
                    out.push(format!("row {i}: p_rest = {rest} outside [0, 1]"));
                }
            }
        }
        out
    }

    pub fn final_energy(&self) -> Option<f64> {
        self.rows.last().map(|r| r.energy)
    }

    /// The scalar reported for the run: δ_E at the final time.
    pub fn final_delta_e(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.delta_e)
    }

    /// Last recorded population vector (typically the final time).
    pub fn final_populations(&self) -> Option<&(Vec<f64>, f64)> {
        self.rows.iter().rev().find_map(|r| r.populations.as_ref())
    }

    pub fn max_chi(&self) -> Option<usize> {
        self.rows.iter().filter_map(|r| r.max_chi).max()
    }
}
