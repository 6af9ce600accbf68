//! Run configuration: a nested TOML document with every default spelled out.

use std::path::Path;

use riskvoi::dynamic::{DynamicRules, RepairPersistence};
use riskvoi::{CostModel, DataSource, LoadingConfig, MarginalSpec, MeasurementPlan, Priors, SnModel, SourceKind, VoiSettings};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Prior,
    Voi,
    Subsets,
    Sweep,
    Dynamic,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Prior => "prior",
            Self::Voi => "voi",
            Self::Subsets => "subsets",
            Self::Sweep => "sweep",
            Self::Dynamic => "dynamic",
        }
    }
}

/// Hyperpriors. Log-normal entries are natural-scale mean and sd.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorsConfig {
    pub load_mean_mean: f64,
    pub load_mean_sd: f64,
    pub load_sd_mean: f64,
    pub load_sd_sd: f64,
    pub scf_shape_mean: f64,
    pub scf_shape_sd: f64,
    pub scf_scale_mean: f64,
    pub scf_scale_sd: f64,
    pub yield_mean_mean: f64,
    pub yield_mean_sd: f64,
    pub yield_sd_mean: f64,
    pub yield_sd_sd: f64,
    pub rho: f64,
}

impl Default for PriorsConfig {
    fn default() -> Self {
        Self {
            load_mean_mean: 50.0,
            load_mean_sd: 5.0,
            load_sd_mean: 6.0,
            load_sd_sd: 3.0,
            scf_shape_mean: 2.0,
            scf_shape_sd: 0.5,
            scf_scale_mean: 0.5,
            scf_scale_sd: 0.5,
            yield_mean_mean: 400.0,
            yield_mean_sd: 20.0,
            yield_sd_mean: 10.0,
            yield_sd_sd: 3.0,
            rho: 2.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostsConfig {
    pub c_fail: f64,
    pub repair: f64,
    pub replace: f64,
    pub reduce: f64,
    pub site_visit: f64,
    pub site_visit_for_reduce: bool,
}

impl Default for CostsConfig {
    fn default() -> Self {
        let c = CostModel::<f64>::default();
        Self {
            c_fail: c.c_fail,
            repair: c.c_repair,
            replace: c.c_replace,
            reduce: c.c_reduce,
            site_visit: c.c_site_visit,
            site_visit_for_reduce: c.site_visit_for_reduce,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnConfig {
    pub log10_a: f64,
    pub slope_m: f64,
    pub scatter_sd: f64,
}

impl Default for SnConfig {
    fn default() -> Self {
        let s = SnModel::<f64>::class_d();
        Self { log10_a: s.log10_a, slope_m: s.slope_m, scatter_sd: s.scatter_sd }
    }
}

/// Default cycles per window, fitted so that the no-action failure
/// probability under the default priors is 0.0357.
pub const DEFAULT_ANNUAL_CYCLES: f64 = 158_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadConfig {
    pub annual_cycles: f64,
    /// Windows of cycling counted by the single-window analyses.
    pub windows: usize,
    /// When set, `annual_cycles` is refitted on the prior sample set so the
    /// no-action failure probability equals this value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibrate_to: Option<f64>,
}

impl Default for LoadConfig {
    fn default() -> Self {
        Self { annual_cycles: DEFAULT_ANNUAL_CYCLES, windows: 1, calibrate_to: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RepairPersistenceConfig {
    #[default]
    OneWindow,
    Permanent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicConfig {
    /// Planning horizon in windows.
    pub windows: usize,
    pub repair: RepairPersistenceConfig,
}

impl Default for DynamicConfig {
    fn default() -> Self {
        Self { windows: 3, repair: RepairPersistenceConfig::OneWindow }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Prior sample count for the decision table and the dynamic solve.
    pub n_samples: usize,
    /// Prior sample count re-conditioned inside each outer draw.
    pub n_inner: usize,
    pub n_outer: usize,
    /// Sources measured in `voi` and `dynamic` modes.
    pub sources: Vec<String>,
    /// Measurement sd for `sources`; perfect information when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Source swept in `sweep` mode.
    pub sweep_source: String,
    pub epsilons: Vec<f64>,
    pub ess_floor: f64,
    pub max_degenerate_fraction: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let v = VoiSettings::default();
        Self {
            mode: Mode::Prior,
            seed: 42,
            n_samples: 100_000,
            n_inner: 20_000,
            n_outer: 2_000,
            sources: vec!["shm".into()],
            epsilon: None,
            sweep_source: "shm".into(),
            epsilons: vec![1e-3, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 1e3],
            ess_floor: v.ess_floor,
            max_degenerate_fraction: v.max_degenerate_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub analysis: AnalysisConfig,
    pub priors: PriorsConfig,
    pub costs: CostsConfig,
    pub sn: SnConfig,
    pub load: LoadConfig,
    pub dynamic: DynamicConfig,
}

fn check(ok: bool, key: &str, message: impl Into<String>) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Validation { key: key.into(), message: message.into() })
    }
}

fn positive(v: f64, key: &str) -> Result<(), CliError> {
    check(v > 0.0 && v.is_finite(), key, format!("must be positive and finite, got {v}"))
}

fn non_negative(v: f64, key: &str) -> Result<(), CliError> {
    check(v >= 0.0 && v.is_finite(), key, format!("must be non-negative and finite, got {v}"))
}

impl RunConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map(|s| line_column(text, s.start)).unwrap_or((0, 0));
            CliError::Parse { line, column, message: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
        Self::from_toml_str(&text).map_err(|e| e.in_file(path))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.priors;
        check(p.rho.abs() < 1.0, "priors.rho", format!("correlation out of range (-1, 1): {}", p.rho))?;
        for (v, key) in [
            (p.load_mean_sd, "priors.load_mean_sd"),
            (p.load_sd_mean, "priors.load_sd_mean"),
            (p.load_sd_sd, "priors.load_sd_sd"),
            (p.scf_shape_sd, "priors.scf_shape_sd"),
            (p.scf_scale_sd, "priors.scf_scale_sd"),
            (p.yield_mean_sd, "priors.yield_mean_sd"),
            (p.yield_mean_mean, "priors.yield_mean_mean"),
            (p.yield_sd_mean, "priors.yield_sd_mean"),
            (p.yield_sd_sd, "priors.yield_sd_sd"),
        ] {
            positive(v, key)?;
        }
        for (v, key) in [
            (p.load_mean_mean, "priors.load_mean_mean"),
            (p.scf_shape_mean, "priors.scf_shape_mean"),
            (p.scf_scale_mean, "priors.scf_scale_mean"),
        ] {
            check(v.is_finite(), key, format!("must be finite, got {v}"))?;
        }
        let c = &self.costs;
        for (v, key) in [
            (c.c_fail, "costs.c_fail"),
            (c.repair, "costs.repair"),
            (c.replace, "costs.replace"),
            (c.reduce, "costs.reduce"),
            (c.site_visit, "costs.site_visit"),
        ] {
            non_negative(v, key)?;
        }
        positive(self.sn.slope_m, "sn.slope_m")?;
        non_negative(self.sn.scatter_sd, "sn.scatter_sd")?;
        check(self.sn.log10_a.is_finite(), "sn.log10_a", "must be finite")?;
        check(
            self.load.annual_cycles >= 1.0 && self.load.annual_cycles.is_finite(),
            "load.annual_cycles",
            format!("must be ≥ 1, got {}", self.load.annual_cycles),
        )?;
        check(self.load.windows >= 1, "load.windows", "must be ≥ 1")?;
        if let Some(t) = self.load.calibrate_to {
            check(t > 0.0 && t < 1.0, "load.calibrate_to", format!("must lie in (0, 1), got {t}"))?;
        }
        check((1..=6).contains(&self.dynamic.windows), "dynamic.windows", "must be between 1 and 6")?;
        let a = &self.analysis;
        check(a.n_samples >= 1, "analysis.n_samples", "must be ≥ 1")?;
        check(a.n_inner >= 1, "analysis.n_inner", "must be ≥ 1")?;
        check(a.n_outer >= 1, "analysis.n_outer", "must be ≥ 1")?;
        let mut seen = Vec::new();
        for s in &a.sources {
            let k = SourceKind::parse(s).ok_or_else(|| CliError::Validation {
                key: "analysis.sources".into(),
                message: format!("unknown source {s:?}; expected test, insp or shm"),
            })?;
            check(!seen.contains(&k), "analysis.sources", format!("source {s:?} listed twice"))?;
            seen.push(k);
        }
        if let Some(e) = a.epsilon {
            positive(e, "analysis.epsilon")?;
        }
        check(SourceKind::parse(&a.sweep_source).is_some(), "analysis.sweep_source", "expected test, insp or shm")?;
        check(!a.epsilons.is_empty(), "analysis.epsilons", "must not be empty")?;
        for e in &a.epsilons {
            positive(*e, "analysis.epsilons")?;
        }
        check(a.epsilons.windows(2).all(|w| w[0] < w[1]), "analysis.epsilons", "must be strictly ascending")?;
        non_negative(a.ess_floor, "analysis.ess_floor")?;
        check(
            (0.0..=1.0).contains(&a.max_degenerate_fraction),
            "analysis.max_degenerate_fraction",
            "must lie in [0, 1]",
        )?;
        Ok(())
    }

    pub fn priors(&self) -> Result<Priors<f64>, CliError> {
        let p = &self.priors;
        let engine = |key: &str, r: riskvoi::Result<MarginalSpec<f64>>| {
            r.map_err(|e| CliError::Validation { key: key.into(), message: e.to_string() })
        };
        Ok(Priors {
            load_mean: engine("priors.load_mean", MarginalSpec::normal(p.load_mean_mean, p.load_mean_sd))?,
            load_sd: engine("priors.load_sd", MarginalSpec::lognormal(p.load_sd_mean, p.load_sd_sd))?,
            scf_shape: engine(
                "priors.scf_shape",
                MarginalSpec::truncated_normal_non_neg(p.scf_shape_mean, p.scf_shape_sd),
            )?,
            scf_scale: engine(
                "priors.scf_scale",
                MarginalSpec::truncated_normal_non_neg(p.scf_scale_mean, p.scf_scale_sd),
            )?,
            yield_mean: engine("priors.yield_mean", MarginalSpec::normal(p.yield_mean_mean, p.yield_mean_sd))?,
            yield_sd: engine("priors.yield_sd", MarginalSpec::lognormal(p.yield_sd_mean, p.yield_sd_sd))?,
            rho: p.rho,
        })
    }

    pub fn cost_model(&self) -> CostModel<f64> {
        let c = &self.costs;
        CostModel {
            c_fail: c.c_fail,
            c_repair: c.repair,
            c_replace: c.replace,
            c_reduce: c.reduce,
            c_site_visit: c.site_visit,
            site_visit_for_reduce: c.site_visit_for_reduce,
        }
    }

    pub fn sn_model(&self) -> SnModel<f64> {
        SnModel { log10_a: self.sn.log10_a, slope_m: self.sn.slope_m, scatter_sd: self.sn.scatter_sd }
    }

    pub fn loading(&self) -> LoadingConfig<f64> {
        LoadingConfig { annual_cycles: self.load.annual_cycles, windows: self.load.windows }
    }

    pub fn dynamic_rules(&self) -> DynamicRules {
        DynamicRules {
            repair: match self.dynamic.repair {
                RepairPersistenceConfig::OneWindow => RepairPersistence::OneWindow,
                RepairPersistenceConfig::Permanent => RepairPersistence::Permanent,
            },
        }
    }

    pub fn voi_settings(&self) -> VoiSettings {
        VoiSettings { ess_floor: self.analysis.ess_floor, max_degenerate_fraction: self.analysis.max_degenerate_fraction }
    }

    /// The plan measured in `voi` and `dynamic` modes.
    pub fn plan(&self) -> Result<MeasurementPlan<f64>, CliError> {
        let sources = self
            .analysis
            .sources
            .iter()
            .map(|s| {
                let kind = SourceKind::parse(s).expect("validated");
                match self.analysis.epsilon {
                    None => Ok(DataSource::perfect(kind)),
                    Some(e) => DataSource::gaussian(kind, e),
                }
            })
            .collect::<riskvoi::Result<Vec<_>>>()?;
        Ok(MeasurementPlan::new(sources)?)
    }

    pub fn sweep_kind(&self) -> SourceKind {
        SourceKind::parse(&self.analysis.sweep_source).expect("validated")
    }
}

/// 1-based line and column of byte offset `pos`.
fn line_column(text: &str, pos: usize) -> (usize, usize) {
    let before = &text[..pos.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip_is_identity() {
        let mut cfg = RunConfig::default();
        cfg.analysis.epsilon = Some(2.5);
        cfg.load.calibrate_to = Some(0.0357);
        let again = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
        let d = RunConfig::default();
        assert_eq!(RunConfig::from_toml_str(&d.to_toml_string()).unwrap(), d);
    }

    #[test]
    fn rho_out_of_range() {
        let e = RunConfig::from_toml_str("[priors]\nrho = 1.5\n").unwrap_err();
        assert!(e.to_string().contains("correlation out of range"), "{e}");
        assert!(e.to_string().contains("priors.rho"));
    }

    #[test]
    fn unknown_key_rejected_with_position() {
        let e = RunConfig::from_toml_str("[costs]\nc_fail = 1.0\nbogus = 2\n").unwrap_err();
        match e {
            CliError::Parse { line, column, ref message } => {
                assert_eq!((line, column), (3, 1));
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn bad_source_names_key() {
        let e = RunConfig::from_toml_str("[analysis]\nsources = [\"radar\"]\n").unwrap_err();
        assert!(e.to_string().contains("analysis.sources"));
    }
}
