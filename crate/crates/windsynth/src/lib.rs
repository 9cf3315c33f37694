//! Synthesize nationally aggregated wind-power capacity-factor time series
//! from gridded reanalysis wind speeds with a seeded multilayer perceptron,
//! and validate any synthetic series against observations with a full
//! statistical quality battery.
//!
//! The toolkit is organized around a few moving parts:
//!
//! - [`ingest`] — generation / capacity / plant CSV parsers, the gapless
//!   hourly [`ingest::TimeAxis`], and conversion of generation to capacity
//!   factors.
//! - [`grid`] — regular lon/lat grid geometry, the wide wind-component CSV,
//!   and the three grid-point subsetting strategies (all points, k-nearest
//!   to plants, capacity above the third quartile).
//! - [`features`] — predictor assembly (wind block plus 43 calendar
//!   dummies) and reversible range scaling.
//! - [`mlp`] — a from-scratch three-hidden-layer perceptron with seeded
//!   deterministic training, a finite-difference gradient verifier, and
//!   bit-exact serialization.
//! - [`pipeline`] — rolling train/predict fold plans, experiment
//!   orchestration, stitched full-period series with provenance, and
//!   model-size selection.
//! - [`quality`] — error metrics, distributions, diurnal/seasonal
//!   deviations, extreme-event run lengths, pooled-lag ramp statistics, and
//!   report serialization.
//! - [`baseline`] — a simplified power-curve comparator and the
//!   deterministic synthetic-scenario generator used as a test oracle.
//! - [`cli`] — the `windsynth` command-line front end.
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release -p windsynth --example synth_data
//! cargo run --release -p windsynth --example grid_subsetting
//! cargo run --release -p windsynth --example features_and_scaling
//! cargo run --release -p windsynth --example train_mlp
//! cargo run --release -p windsynth --example fold_plans
//! cargo run --release -p windsynth --example power_curve_baseline
//! cargo run --release -p windsynth --example quality_report
//! cargo run --release -p windsynth --example full_experiment
//! ```

pub mod baseline;
pub mod cli;
pub mod features;
pub mod grid;
pub mod ingest;
pub mod mlp;
pub mod pipeline;
pub mod quality;

pub use baseline::{BaselineConfig, PowerCurve, Scenario};
pub use grid::{GridSpec, SubsetSelection, WindField};
pub use ingest::{CapacityFactorSeries, PlantRegistry, TimeAxis};
pub use mlp::{MlpConfig, MlpModel};
pub use pipeline::{ExperimentConfig, FoldPlan, SyntheticSeries, Variant, YearRange};
pub use quality::QualityReport;
