//! Command-line driver for the `riskvoi` engine: TOML run configs, result
//! records with provenance, CSV tables and plot-data files.
//!
//! ```
//! use riskvoi_cli::{run, RunConfig};
//!
//! let mut cfg = RunConfig::default();
//! cfg.analysis.n_samples = 2_000;
//! let record = run(&cfg).unwrap();
//! assert_eq!(record.table("decision_table").unwrap().rows.len(), 8);
//! ```

pub mod config;
pub mod error;
pub mod record;
pub mod run;

pub use config::{Mode, RunConfig, DEFAULT_ANNUAL_CYCLES};
pub use error::CliError;
pub use record::{emit_plot_data, write_outputs, ResultRecord, Table};
pub use run::{run, summary};

use std::path::Path;

/// Reads and validates a TOML run config.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    RunConfig::load(path)
}
