//! Plot-ready data export: one CSV per record with a fixed column set, a
//! JSON manifest carrying the config echo and reproducibility metadata, and
//! an optional gnuplot script stub.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! re-importing a CSV reproduces every number bit-exactly.

use crate::records::ResultRecord;
use adsweep_core::models::{ExperimentConfig, ModelFamily};
use adsweep_core::{CoreError, Result};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(CoreError::Invalid(format!("unknown format {other:?}"))),
        }
    }
}

pub fn csv_header(family: ModelFamily, k_max: usize) -> String {
    let mut h = format!("t,J,Bx,{}", family.axial_name());
    h.push_str(",energy,delta_e,fidelity");
    for k in 0..=k_max {
        let _ = write!(h, ",p{k}");
    }
    h.push_str(",p_rest,max_chi,trunc_weight");
    h
}

fn push_opt(line: &mut String, v: Option<f64>) {
    match v {
        Some(x) => {
            let _ = write!(line, ",{x}");
        }
        None => line.push(','),
    }
}

/// CSV body for one record: header plus one line per row. Optional fields
/// that were not measured stay empty.
pub fn record_csv(record: &ResultRecord) -> String {
    let k_max = record.config.observables.k_max;
    let mut out = csv_header(record.config.family, k_max);
    out.push('\n');
    for row in &record.rows {
        let p = row.params;
        let mut line = format!("{},{},{},{}", row.t, p.j, p.bx, p.axial);
        let _ = write!(line, ",{}", row.energy);
        push_opt(&mut line, row.delta_e);
        push_opt(&mut line, row.fidelity);
        match &row.populations {
            Some((pops, rest)) => {
                for k in 0..=k_max {
                    push_opt(&mut line, pops.get(k).copied());
                }
                push_opt(&mut line, Some(*rest));
            }
            None => {
                for _ in 0..=k_max + 1 {
                    line.push(',');
                }
            }
        }
        match row.max_chi {
            Some(chi) => {
                let _ = write!(line, ",{chi}");
            }
            None => line.push(','),
        }
        push_opt(&mut line, row.trunc_weight);
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// A parsed CSV data line; empty fields come back as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub fields: Vec<Option<f64>>,
}

pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<CsvRow>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CoreError::Invalid("empty CSV".into()))?
        .split(',')
        .map(str::to_string)
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = Vec::with_capacity(header.len());
        for cell in line.split(',') {
            if cell.is_empty() {
                fields.push(None);
            } else {
                let v: f64 = cell.parse().map_err(|_| {
                    CoreError::Invalid(format!("line {}: bad number {cell:?}", i + 2))
                })?;
                fields.push(Some(v));
            }
        }
        if fields.len() != header.len() {
            return Err(CoreError::Invalid(format!(
                "line {}: {} fields, header has {}",
                i + 2,
                fields.len(),
                header.len()
            )));
        }
        rows.push(CsvRow { fields });
    }
    Ok((header, rows))
}

#[derive(Debug, Serialize)]
struct ManifestRecord<'a> {
    n: usize,
    engine: &'a adsweep_core::models::EngineChoice,
    rows: usize,
    final_energy: Option<f64>,
    final_delta_e: Option<f64>,
    file: String,
    wall_seconds: f64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentConfig,
    seed: u64,
    code_version: String,
    records: Vec<ManifestRecord<'a>>,
}

/// Write the records of one experiment under `dir`:
/// - CSV format: `{stem}_n{n}.csv` per record (or a header-only
///   `{stem}.csv` when there are none) plus `{stem}_manifest.json`;
/// - JSON format: `{stem}.json` holding the full records, plus the manifest.
///
/// Returns the paths written.
pub fn export_records(
    dir: &Path,
    stem: &str,
    config: &ExperimentConfig,
    records: &[ResultRecord],
    format: ExportFormat,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut manifest_rows = Vec::new();

    match format {
        ExportFormat::Csv => {
            if records.is_empty() {
                let path = dir.join(format!("{stem}.csv"));
                let mut text = csv_header(config.family, config.observables.k_max);
                text.push('\n');
                std::fs::write(&path, text)?;
                written.push(path);
            }
            for rec in records {
                let path = dir.join(format!("{stem}_n{}.csv", rec.n));
                std::fs::write(&path, record_csv(rec))?;
                manifest_rows.push((rec, path.file_name().unwrap().to_string_lossy().into_owned()));
                written.push(path);
            }
        }
        ExportFormat::Json => {
            let path = dir.join(format!("{stem}.json"));
            let text = serde_json::to_string_pretty(records)
                .map_err(|e| CoreError::Invalid(format!("serialize records: {e}")))?;
            std::fs::write(&path, text)?;
            for rec in records {
                manifest_rows.push((rec, path.file_name().unwrap().to_string_lossy().into_owned()));
            }
            written.push(path);
        }
    }

    let manifest = Manifest {
        config,
        seed: config.seed,
        code_version: crate::driver::code_version(),
        records: manifest_rows
            .iter()
            .map(|(rec, file)| ManifestRecord {
                n: rec.n,
                engine: &rec.engine,
                rows: rec.rows.len(),
                final_energy: rec.final_energy(),
                final_delta_e: rec.final_delta_e(),
                file: file.clone(),
                wall_seconds: rec.metadata.wall_seconds,
            })
            .collect(),
    };
    let manifest_path = dir.join(format!("{stem}_manifest.json"));
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CoreError::Invalid(format!("serialize manifest: {e}")))?;
    std::fs::write(&manifest_path, text)?;
    written.push(manifest_path);
    Ok(written)
}

/// Minimal gnuplot script plotting energy and δ_E against t for the given
/// CSV files.
pub fn gnuplot_stub(dir: &Path, stem: &str, csv_files: &[PathBuf]) -> Result<PathBuf> {
    let mut script = String::from(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't'\n",
    );
    for f in csv_files {
        let name = f.file_name().unwrap().to_string_lossy();
        let _ = writeln!(
            script,
            "plot '{name}' using 1:5 with lines title 'energy', '' using 1:6 with lines title 'delta_e'\npause -1"
        );
    }
    let path = dir.join(format!("{stem}.gp"));
    std::fs::write(&path, script)?;
    Ok(path)
}
