//! Monte Carlo value-of-information engine for risk-management decisions on
//! a fatigue-prone structural detail.
//!
//! The crate is layered bottom-up:
//!
//! * [`distributions`]: marginals, Latin hypercube designs, Gaussian copula;
//! * [`structural`]: hierarchical prior, mitigation actions, limit states;
//! * [`decision`]: expected-utility table over the eight action sets;
//! * [`voi`]: preposterior analysis for testing, inspection and SHM data;
//! * [`dynamic`]: multi-window planning with fatigue carry-over.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.
//!
//! ```
//! use riskvoi::{CostModel, DecisionProblem, LoadingConfig, Priors, SnModel};
//!
//! let p = DecisionProblem::<f64>::from_priors(
//!     Priors::bridge(), 5_000, 1, CostModel::default(), SnModel::class_d(),
//!     LoadingConfig::new(1.58e5, 1).unwrap(),
//! ).unwrap();
//! let table = riskvoi::decision::solve(&p).unwrap();
//! assert_eq!(table.table.len(), 8);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decision;
pub mod distributions;
pub mod dynamic;
pub mod error;
pub mod scalar;
pub mod structural;
pub mod voi;

pub use decision::{CostModel, DecisionProblem, DecisionResult};
pub use distributions::{CopulaSpec, LhsMatrix, MarginalSpec};
pub use dynamic::{DynamicResult, DynamicRules, PathFrequencyTable, PolicySequence, RepairPersistence};
pub use error::{Error, Result};
pub use scalar::Real;
pub use structural::{ActionSet, LoadingConfig, ParameterSample, Priors, SnModel};
pub use voi::{DataSource, MeasurementPlan, Noise, SourceKind, VoiResult, VoiSettings};

pub type ParameterSample64 = ParameterSample<f64>;
pub type Priors64 = Priors<f64>;
pub type SnModel64 = SnModel<f64>;
pub type LoadingConfig64 = LoadingConfig<f64>;
pub type CostModel64 = CostModel<f64>;
pub type DecisionProblem64 = DecisionProblem<f64>;
pub type DecisionResult64 = DecisionResult<f64>;
pub type MarginalSpec64 = MarginalSpec<f64>;
pub type CopulaSpec64 = CopulaSpec<f64>;
pub type DataSource64 = DataSource<f64>;
pub type MeasurementPlan64 = MeasurementPlan<f64>;
pub type VoiResult64 = VoiResult<f64>;
pub type DynamicResult64 = DynamicResult<f64>;
