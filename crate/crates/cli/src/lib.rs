//! Experiment drivers for the sweep engines: config parsing, paired
//! clean/noisy runs, observable extraction, the eigenspace-overlap bound,
//! and plot-ready data export.

pub mod bound;
pub mod config;
pub mod driver;
pub mod export;
pub mod records;

pub use bound::{concentration_bound, BoundQuery, BoundResult};
pub use config::{load_config, parse_config};
pub use driver::{
    afm_parity_study, depolarizing_average, excess_energy, final_energy_ceiling, linear_fit,
    log_log_exponent, run_experiment, run_one,
};
pub use export::{export_records, parse_csv, record_csv, ExportFormat};
pub use records::{ResultRecord, Row, RunMetadata};
