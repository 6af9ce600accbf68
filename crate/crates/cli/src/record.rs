//! Result records, CSV tables and plot-data files.
//!
//! Every run produces one JSON record holding the resolved config, its
//! SHA-256, the seed, a timestamp and the payload tables. Tables are also
//! written as CSV with fixed headers; numbers use the shortest decimal form
//! that round-trips, so reruns with the same config and seed are
//! byte-identical apart from the timestamp in the JSON record.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Mode, RunConfig};
use crate::error::CliError;

pub const RECORD_FILE: &str = "result.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Self { name: name.into(), headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_headers(name: &str, headers: Vec<String>) -> Self {
        Self { name: name.into(), headers, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn column(&self, header: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == header)
    }

    /// Column `header` parsed as numbers.
    pub fn numbers(&self, header: &str) -> Option<Vec<f64>> {
        let c = self.column(header)?;
        self.rows.iter().map(|r| r[c].parse().ok()).collect()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| CliError::Unsupported(e.to_string()))
    }
}

/// Number formatting shared by every table.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub engine: String,
    pub version: String,
    pub mode: Mode,
    pub seed: u64,
    pub config_sha256: String,
    pub timestamp: String,
    pub config: RunConfig,
    /// Headline scalars, e.g. `voi` or `expected_cost`.
    pub metrics: BTreeMap<String, f64>,
    pub tables: Vec<Table>,
}

impl ResultRecord {
    pub fn new(config: &RunConfig, metrics: BTreeMap<String, f64>, tables: Vec<Table>) -> Self {
        Self {
            engine: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            mode: config.analysis.mode,
            seed: config.analysis.seed,
            config_sha256: config_hash(config),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            config: config.clone(),
            metrics,
            tables,
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// SHA-256 of the canonical TOML rendering of the resolved config.
pub fn config_hash(config: &RunConfig) -> String {
    hex::encode(Sha256::digest(config.to_toml_string().as_bytes()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Writes `result.json`, one `<table>.csv` per payload table and the plot
/// files for the record's mode. Returns the written paths.
pub fn write_outputs(record: &ResultRecord, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut written = Vec::new();
    let json = out_dir.join(RECORD_FILE);
    write_file(&json, serde_json::to_string_pretty(record)?.as_bytes())?;
    written.push(json);
    for t in &record.tables {
        let path = out_dir.join(format!("{}.csv", t.name));
        write_file(&path, &t.to_csv()?)?;
        written.push(path);
    }
    if record.mode != Mode::Prior {
        written.extend(emit_plot_data(record, out_dir)?);
    }
    Ok(written)
}

/// Plot tables keyed by figure:
///
/// | file       | columns                                               |
/// |------------|-------------------------------------------------------|
/// | `fig5.csv` | `z_<source>`…, `inner_expected_cost`, `action`        |
/// | `fig7.csv` | `subset`, `voi`, `standard_error`                     |
/// | `fig8.csv` | `epsilon`, `voi`, `standard_error`                    |
/// | `fig9.csv` | `z_<source>`…, `inner_expected_cost`, `action`        |
/// | `fig10.csv`| `sequence`, `count`                                   |
pub fn emit_plot_data(record: &ResultRecord, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let figures: &[(&str, &str)] = match record.mode {
        Mode::Prior => {
            return Err(CliError::Unsupported("prior runs carry no plot data".into()));
        }
        Mode::Voi => &[("fig5", "voi_draws")],
        Mode::Subsets => &[("fig7", "subset_voi")],
        Mode::Sweep => &[("fig8", "sweep")],
        Mode::Dynamic => &[("fig9", "dynamic_draws"), ("fig10", "path_frequencies")],
    };
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut written = Vec::new();
    for (fig, source) in figures {
        let Some(t) = record.table(source) else { continue };
        let keep: Vec<String> = match *fig {
            "fig5" | "fig9" => t
                .headers
                .iter()
                .filter(|h| h.starts_with("z_") || *h == "inner_expected_cost" || *h == "action")
                .cloned()
                .collect(),
            "fig7" => vec!["subset".into(), "voi".into(), "standard_error".into()],
            "fig8" => vec!["epsilon".into(), "voi".into(), "standard_error".into()],
            _ => vec!["sequence".into(), "count".into()],
        };
        let idx: Vec<usize> = keep
            .iter()
            .map(|h| t.column(h).ok_or_else(|| CliError::Unsupported(format!("table {source} lacks {h}"))))
            .collect::<Result<_, _>>()?;
        let mut out = Table::with_headers(fig, keep);
        for r in &t.rows {
            out.push(idx.iter().map(|&i| r[i].clone()).collect());
        }
        let path = out_dir.join(format!("{fig}.csv"));
        write_file(&path, &out.to_csv()?)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 157_980.0, -2.5] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(f64::NAN), "NaN");
    }

    #[test]
    fn csv_has_fixed_header() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec![num(1.5), "none".into()]);
        assert_eq!(String::from_utf8(t.to_csv().unwrap()).unwrap(), "a,b\n1.5,none\n");
        assert_eq!(t.numbers("a").unwrap(), vec![1.5]);
    }

    #[test]
    fn hash_tracks_config() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.analysis.seed += 1;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
