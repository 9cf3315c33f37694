//! Rolling train/predict fold plans, per-fold orchestration, full
//! experiments, and model-size selection.
//!
//! A fold plan partitions the modelling period into consecutive predict
//! windows (default two years); each window's network trains on all
//! remaining years, so no predicted hour was ever seen in training. Folds
//! are independent and may run in parallel; the stitched result is
//! identical for any job count.

use std::fs::File;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use chrono::{Datelike, TimeZone, Utc};
use thiserror::Error;

use crate::features::{
    apply_scaling, assemble, fit_scaling, invert_scaling, scale_target, ColumnScaling,
    FeatureError, FeatureMatrix, ScalingParams,
};
use crate::grid::{
    select_all, select_capacity_quartile, select_k_nearest, GridError, GridSpec,
    SelectionStrategy, SubsetSelection, WindField,
};
use crate::ingest::{CapacityFactorSeries, PlantRegistry, TimeAxis};
use crate::mlp::{self, MlpConfig, MlpError, MlpModel, TrainReport};
use crate::quality::{self, CandidateMetrics, QualityError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("period of {years} years is too short for block length {block}")]
    PeriodTooShort { years: usize, block: usize },
    #[error("series axis does not cover the experiment period")]
    AxisMismatch,
    #[error("{0}")]
    PartialYears(String),
    #[error("variant {0} requires a plant registry")]
    MissingPlants(&'static str),
    #[error("wind field grid does not match the predictor grid")]
    GridMismatch,
    #[error("no candidates to select from")]
    NoCandidates,
    #[error("bad predictor data: {0}")]
    BadPredictor(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Quality(#[from] QualityError),
}

/// Inclusive range of calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct YearRange {
    pub first: i32,
    pub last: i32,
}

impl YearRange {
    pub fn new(first: i32, last: i32) -> Self {
        assert!(first <= last, "year range must be ascending");
        Self { first, last }
    }

    pub fn n_years(&self) -> usize {
        (self.last - self.first + 1) as usize
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.first..=self.last
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.first..=self.last).contains(&year)
    }
}

impl std::fmt::Display for YearRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.first == self.last {
            write!(f, "{}", self.first)
        } else {
            write!(f, "{}-{}", self.first, self.last)
        }
    }
}

/// One rolling fold: a predict window and the complementary training years.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub index: usize,
    pub predict: YearRange,
    pub train_years: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub period: YearRange,
    pub block: usize,
    pub folds: Vec<Fold>,
}

/// Consecutive predict windows of `block` years from the period start,
/// with a final shorter window absorbing any remainder; each fold trains
/// on every other year of the period.
pub fn build_fold_plan(period: YearRange, block: usize) -> Result<FoldPlan, PipelineError> {
    assert!(block >= 1, "block must be at least one year");
    let years: Vec<i32> = period.years().collect();
    if years.len() < block + 1 {
        return Err(PipelineError::PeriodTooShort {
            years: years.len(),
            block,
        });
    }
    let folds = years
        .chunks(block)
        .enumerate()
        .map(|(index, chunk)| Fold {
            index,
            predict: YearRange::new(chunk[0], *chunk.last().unwrap()),
            train_years: years
                .iter()
                .copied()
                .filter(|y| !chunk.contains(y))
                .collect(),
        })
        .collect();
    Ok(FoldPlan {
        period,
        block,
        folds,
    })
}

/// Hourly axis spanning whole calendar years.
pub fn axis_for_years(years: YearRange) -> TimeAxis {
    let start = Utc
        .with_ymd_and_hms(years.first, 1, 1, 0, 0, 0)
        .unwrap();
    let end = Utc
        .with_ymd_and_hms(years.last + 1, 1, 1, 0, 0, 0)
        .unwrap();
    TimeAxis::new(start, (end - start).num_hours() as usize).expect("whole years form a valid axis")
}

/// Row range of one calendar year on an axis; the year must be fully
/// covered.
pub fn year_rows(axis: &TimeAxis, year: i32) -> Result<Range<usize>, PipelineError> {
    let start_ts = Utc.with_ymd_and_hms(year, 1, 1, 0, 0, 0).unwrap();
    let end_ts = Utc.with_ymd_and_hms(year + 1, 1, 1, 0, 0, 0).unwrap();
    let start = axis
        .index_of(start_ts)
        .ok_or_else(|| PipelineError::PartialYears(format!("year {year} starts off-axis")))?;
    let hours = (end_ts - start_ts).num_hours() as usize;
    if start + hours > axis.len() {
        return Err(PipelineError::PartialYears(format!(
            "year {year} is not fully covered by the axis"
        )));
    }
    Ok(start..start + hours)
}

/// Whole calendar years covered by an axis, if it is exactly year-aligned.
pub fn axis_year_range(axis: &TimeAxis) -> Result<YearRange, PipelineError> {
    let start = axis.start();
    let first = start.year();
    if axis.index_of(Utc.with_ymd_and_hms(first, 1, 1, 0, 0, 0).unwrap()) != Some(0) {
        return Err(PipelineError::PartialYears(
            "axis does not start on January 1st 00:00 UTC".into(),
        ));
    }
    let end = axis.end() + chrono::Duration::hours(1);
    let last = end.year() - 1;
    if end != Utc.with_ymd_and_hms(last + 1, 1, 1, 0, 0, 0).unwrap() {
        return Err(PipelineError::PartialYears(
            "axis does not end on December 31st 23:00 UTC".into(),
        ));
    }
    Ok(YearRange::new(first, last))
}

/// Which fold produced which hours, and what it trained on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldProvenance {
    pub fold_index: usize,
    pub predict_years: YearRange,
    pub predict_rows: Range<usize>,
    pub train_years: Vec<i32>,
    pub train_rows: Vec<Range<usize>>,
}

/// A stitched full-period prediction with per-fold provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSeries {
    pub series: CapacityFactorSeries,
    pub provenance: Vec<FoldProvenance>,
}

impl SyntheticSeries {
    /// True when every predicted hour is absent from its producing fold's
    /// training rows and the predict windows partition the axis.
    pub fn verify_no_leakage(&self) -> bool {
        let n = self.series.axis.len();
        let mut covered = vec![0usize; n];
        for prov in &self.provenance {
            for r in prov.predict_rows.clone() {
                covered[r] += 1;
            }
            for train in &prov.train_rows {
                if train.start < prov.predict_rows.end && prov.predict_rows.start < train.end {
                    return false;
                }
            }
        }
        covered.iter().all(|&c| c == 1)
    }
}

/// The three grid-subsetting variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Mlm1,
    Mlm2,
    Mlm3,
}

impl Variant {
    pub fn label(&self) -> &'static str {
        match self {
            Variant::Mlm1 => "mlm1",
            Variant::Mlm2 => "mlm2",
            Variant::Mlm3 => "mlm3",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s.to_ascii_lowercase().as_str() {
            "mlm1" => Some(Variant::Mlm1),
            "mlm2" => Some(Variant::Mlm2),
            "mlm3" => Some(Variant::Mlm3),
            _ => None,
        }
    }
}

/// Training knobs; defaults follow the network module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_mode: mlp::BatchMode,
    pub shuffle: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let base = MlpConfig::default();
        Self {
            learning_rate: base.learning_rate,
            epochs: base.epochs,
            batch_mode: base.batch_mode,
            shuffle: base.shuffle,
        }
    }
}

/// One full experiment: variant, network size, seed, period, block length.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub hidden: usize,
    pub seed: u64,
    pub years: YearRange,
    pub block: usize,
    pub k_nearest: usize,
    pub train: TrainSettings,
}

impl ExperimentConfig {
    pub fn new(variant: Variant, hidden: usize, seed: u64, years: YearRange) -> Self {
        Self {
            variant,
            hidden,
            seed,
            years,
            block: 2,
            k_nearest: 4,
            train: TrainSettings::default(),
        }
    }

    fn mlp_config(&self, fold_index: usize) -> MlpConfig {
        MlpConfig {
            hidden_sizes: [self.hidden; 3],
            learning_rate: self.train.learning_rate,
            epochs: self.train.epochs,
            seed: fold_seed(self.seed, fold_index),
            batch_mode: self.train.batch_mode,
            shuffle: self.train.shuffle,
        }
    }
}

/// One experiment seed serves all folds; the fold index is mixed in so
/// folds do not start from identical weights.
pub fn fold_seed(seed: u64, fold_index: usize) -> u64 {
    seed ^ (fold_index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Everything an experiment consumes.
#[derive(Debug, Clone, Copy)]
pub struct DataBundle<'a> {
    pub wind: &'a WindField,
    pub plants: Option<&'a PlantRegistry>,
    pub observed: &'a CapacityFactorSeries,
}

/// Result of one fold: CF predictions for the predict window plus the
/// trained model and its loss trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutput {
    pub predictions: Vec<f64>,
    pub predict_rows: Range<usize>,
    pub train_rows: Vec<Range<usize>>,
    pub model: MlpModel,
    pub report: TrainReport,
}

fn merge_ranges(mut ranges: Vec<Range<usize>>) -> Vec<Range<usize>> {
    ranges.sort_by_key(|r| r.start);
    let mut merged: Vec<Range<usize>> = Vec::new();
    for r in ranges {
        match merged.last_mut() {
            Some(last) if last.end == r.start => last.end = r.end,
            _ => merged.push(r),
        }
    }
    merged
}

/// Scale on the training rows, train, predict the fold's window, and map
/// the predictions back to CF units.
pub fn run_fold(
    fold: &Fold,
    features: &FeatureMatrix,
    target: &CapacityFactorSeries,
    mlp_config: &MlpConfig,
) -> Result<FoldOutput, PipelineError> {
    if features.axis != target.axis {
        return Err(PipelineError::AxisMismatch);
    }
    let axis = &features.axis;
    let mut train_ranges = Vec::with_capacity(fold.train_years.len());
    for &year in &fold.train_years {
        train_ranges.push(year_rows(axis, year)?);
    }
    let train_rows: Vec<usize> = train_ranges.iter().cloned().flatten().collect();
    let predict_start = year_rows(axis, fold.predict.first)?.start;
    let predict_end = year_rows(axis, fold.predict.last)?.end;
    let predict_rows = predict_start..predict_end;

    let params = fit_scaling(features, &train_rows);
    let scaled = apply_scaling(features, &params)?;
    let target_scaled = scale_target(&target.values, &train_rows);

    let x_train = scaled.data.subset_rows(&train_rows);
    let y_train: Vec<f64> = train_rows.iter().map(|&r| target_scaled.values[r]).collect();

    let model = mlp::init(mlp_config, features.n_cols());
    let (model, report) = mlp::train(model, &x_train, &y_train, mlp_config)?;

    let predict_row_list: Vec<usize> = predict_rows.clone().collect();
    let x_predict = scaled.data.subset_rows(&predict_row_list);
    let scaled_predictions = mlp::predict(&model, &x_predict)?;
    let predictions = invert_scaling(&scaled_predictions, &target_scaled.params);

    Ok(FoldOutput {
        predictions,
        predict_rows,
        train_rows: merge_ranges(train_ranges),
        model,
        report,
    })
}

fn selection_for_variant(
    variant: Variant,
    grid: &GridSpec,
    plants: Option<&PlantRegistry>,
    k: usize,
) -> Result<SubsetSelection, PipelineError> {
    match variant {
        Variant::Mlm1 => Ok(select_all(grid)),
        Variant::Mlm2 => {
            let plants = plants.ok_or(PipelineError::MissingPlants("mlm2"))?;
            Ok(select_k_nearest(grid, plants, k))
        }
        Variant::Mlm3 => {
            let plants = plants.ok_or(PipelineError::MissingPlants("mlm3"))?;
            Ok(select_capacity_quartile(grid, plants)?)
        }
    }
}

/// The grid-point selection an experiment will use.
pub fn experiment_selection(
    cfg: &ExperimentConfig,
    grid: &GridSpec,
    plants: Option<&PlantRegistry>,
) -> Result<SubsetSelection, PipelineError> {
    selection_for_variant(cfg.variant, grid, plants, cfg.k_nearest)
}

/// Run every fold of the plan and stitch the predictions into one
/// full-period series with provenance. `jobs` caps fold-level parallelism;
/// the output is identical for any value.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    bundle: &DataBundle<'_>,
    jobs: usize,
) -> Result<SyntheticSeries, PipelineError> {
    let jobs = jobs.max(1);
    let period_axis = axis_for_years(cfg.years);
    let obs_offset = bundle
        .observed
        .axis
        .offset_of(&period_axis)
        .ok_or(PipelineError::AxisMismatch)?;
    let target = CapacityFactorSeries::new(
        period_axis,
        bundle.observed.values[obs_offset..obs_offset + period_axis.len()].to_vec(),
    );

    let selection = selection_for_variant(cfg.variant, &bundle.wind.grid, bundle.plants, cfg.k_nearest)?;
    let features = assemble(bundle.wind, &selection, &period_axis)?;
    let plan = build_fold_plan(cfg.years, cfg.block)?;

    let mut outputs: Vec<FoldOutput> = Vec::with_capacity(plan.folds.len());
    for wave in plan.folds.chunks(jobs) {
        let wave_outputs = std::thread::scope(|scope| {
            let handles: Vec<_> = wave
                .iter()
                .map(|fold| {
                    let features = &features;
                    let target = &target;
                    let mlp_config = cfg.mlp_config(fold.index);
                    scope.spawn(move || run_fold(fold, features, target, &mlp_config))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("fold worker panicked"))
                .collect::<Vec<_>>()
        });
        for output in wave_outputs {
            outputs.push(output?);
        }
    }

    let mut values = vec![f64::NAN; period_axis.len()];
    let mut provenance = Vec::with_capacity(outputs.len());
    for (fold, output) in plan.folds.iter().zip(outputs) {
        values[output.predict_rows.clone()].copy_from_slice(&output.predictions);
        provenance.push(FoldProvenance {
            fold_index: fold.index,
            predict_years: fold.predict,
            predict_rows: output.predict_rows,
            train_years: fold.train_years.clone(),
            train_rows: output.train_rows,
        });
    }
    debug_assert!(values.iter().all(|v| v.is_finite()));

    Ok(SyntheticSeries {
        series: CapacityFactorSeries::new(period_axis, values),
        provenance,
    })
}

/// Rank candidates by NMAE, then NRMSE, then correlation (descending);
/// ties keep the earlier candidate.
pub fn select_model_from_metrics(
    candidates: &[(String, CandidateMetrics)],
) -> Result<String, PipelineError> {
    if candidates.is_empty() {
        return Err(PipelineError::NoCandidates);
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        let (ma, mb) = (&candidates[a].1, &candidates[b].1);
        ma.nmae
            .total_cmp(&mb.nmae)
            .then(ma.nrmse.total_cmp(&mb.nrmse))
            .then(mb.correlation.total_cmp(&ma.correlation))
    });
    Ok(candidates[order[0]].0.clone())
}

/// Compute each candidate's metrics against the observations and pick the
/// winner.
pub fn select_model(
    candidates: &[(String, SyntheticSeries)],
    obs: &CapacityFactorSeries,
) -> Result<String, PipelineError> {
    if candidates.is_empty() {
        return Err(PipelineError::NoCandidates);
    }
    let mut scored = Vec::with_capacity(candidates.len());
    for (label, candidate) in candidates {
        if candidate.series.axis != obs.axis {
            return Err(PipelineError::AxisMismatch);
        }
        let metrics = quality::summary_metrics(&obs.values, &candidate.series.values)?;
        scored.push((label.clone(), metrics));
    }
    select_model_from_metrics(&scored)
}

/// A trained network bundled with everything needed to map raw wind files
/// to capacity factors: grid, selection, and both scalings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPredictor {
    pub grid: GridSpec,
    pub selection: SubsetSelection,
    pub feature_scaling: ScalingParams,
    pub target_scaling: ColumnScaling,
    pub model: MlpModel,
}

/// Train a predictor on the full observed period (no fold split).
pub fn fit_predictor(
    wind: &WindField,
    plants: Option<&PlantRegistry>,
    observed: &CapacityFactorSeries,
    variant: Variant,
    k_nearest: usize,
    mlp_config: &MlpConfig,
) -> Result<(TrainedPredictor, TrainReport), PipelineError> {
    let selection = selection_for_variant(variant, &wind.grid, plants, k_nearest)?;
    let features = assemble(wind, &selection, &observed.axis)?;
    let all_rows: Vec<usize> = (0..features.n_rows()).collect();
    let feature_scaling = fit_scaling(&features, &all_rows);
    let scaled = apply_scaling(&features, &feature_scaling)?;
    let target_scaled = scale_target(&observed.values, &all_rows);
    let model = mlp::init(mlp_config, features.n_cols());
    let (model, report) = mlp::train(model, &scaled.data, &target_scaled.values, mlp_config)?;
    Ok((
        TrainedPredictor {
            grid: wind.grid,
            selection,
            feature_scaling,
            target_scaling: target_scaled.params,
            model,
        },
        report,
    ))
}

/// Apply a trained predictor to a wind field, producing capacity factors
/// over the field's whole axis.
pub fn predict_series(
    predictor: &TrainedPredictor,
    wind: &WindField,
) -> Result<CapacityFactorSeries, PipelineError> {
    if wind.grid != predictor.grid {
        return Err(PipelineError::GridMismatch);
    }
    let features = assemble(wind, &predictor.selection, &wind.axis)?;
    let scaled = apply_scaling(&features, &predictor.feature_scaling)?;
    let raw = mlp::predict(&predictor.model, &scaled.data)?;
    Ok(CapacityFactorSeries::new(
        wind.axis,
        invert_scaling(&raw, &predictor.target_scaling),
    ))
}

const PREDICTOR_MAGIC: &[u8; 8] = b"WSPREDv1";

pub fn predictor_to_bytes(p: &TrainedPredictor) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(PREDICTOR_MAGIC);
    mlp::push_f64(&mut buf, p.grid.lon0);
    mlp::push_f64(&mut buf, p.grid.lat0);
    mlp::push_f64(&mut buf, p.grid.dlon);
    mlp::push_f64(&mut buf, p.grid.dlat);
    mlp::push_u64(&mut buf, p.grid.nlon as u64);
    mlp::push_u64(&mut buf, p.grid.nlat as u64);
    buf.push(match p.selection.strategy {
        SelectionStrategy::All => 0,
        SelectionStrategy::KNearest => 1,
        SelectionStrategy::CapacityQuartile => 2,
    });
    mlp::push_u64(&mut buf, p.selection.indices.len() as u64);
    for &idx in &p.selection.indices {
        mlp::push_u64(&mut buf, idx as u64);
    }
    mlp::push_u64(&mut buf, p.feature_scaling.columns.len() as u64);
    for col in &p.feature_scaling.columns {
        mlp::push_f64(&mut buf, col.mean);
        mlp::push_f64(&mut buf, col.range);
    }
    mlp::push_f64(&mut buf, p.target_scaling.mean);
    mlp::push_f64(&mut buf, p.target_scaling.range);
    let model = mlp::model_to_bytes(&p.model);
    mlp::push_u64(&mut buf, model.len() as u64);
    buf.extend_from_slice(&model);
    buf
}

pub fn predictor_from_bytes(data: &[u8]) -> Result<TrainedPredictor, PipelineError> {
    let bad = |msg: &str| PipelineError::BadPredictor(msg.to_string());
    let mut r = mlp::ByteReader::new(data);
    if r.take(8).map_err(|_| bad("truncated"))? != PREDICTOR_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut f = || -> Result<f64, PipelineError> { r.f64().map_err(|_| bad("truncated")) };
    let lon0 = f()?;
    let lat0 = f()?;
    let dlon = f()?;
    let dlat = f()?;
    let nlon = r.u64().map_err(|_| bad("truncated"))? as usize;
    let nlat = r.u64().map_err(|_| bad("truncated"))? as usize;
    if nlon == 0 || nlat == 0 || dlon <= 0.0 || dlat <= 0.0 || nlon.saturating_mul(nlat) > 1 << 32 {
        return Err(bad("implausible grid"));
    }
    let grid = GridSpec {
        lon0,
        lat0,
        dlon,
        dlat,
        nlon,
        nlat,
    };
    let strategy = match r.take(1).map_err(|_| bad("truncated"))?[0] {
        0 => SelectionStrategy::All,
        1 => SelectionStrategy::KNearest,
        2 => SelectionStrategy::CapacityQuartile,
        _ => return Err(bad("bad selection strategy")),
    };
    let n_indices = r.u64().map_err(|_| bad("truncated"))? as usize;
    if n_indices == 0 || n_indices > grid.n_points() {
        return Err(bad("implausible selection size"));
    }
    let mut indices = Vec::with_capacity(n_indices);
    for _ in 0..n_indices {
        indices.push(r.u64().map_err(|_| bad("truncated"))? as usize);
    }
    if !indices.windows(2).all(|w| w[0] < w[1]) || *indices.last().unwrap() >= grid.n_points() {
        return Err(bad("selection indices are not canonical"));
    }
    let selection = SubsetSelection::new(strategy, indices, &grid);
    let n_cols = r.u64().map_err(|_| bad("truncated"))? as usize;
    if n_cols != 6 * selection.len() + crate::features::N_DUMMIES {
        return Err(bad("scaling column count does not match the selection"));
    }
    let mut columns = Vec::with_capacity(n_cols);
    for _ in 0..n_cols {
        let mean = r.f64().map_err(|_| bad("truncated"))?;
        let range = r.f64().map_err(|_| bad("truncated"))?;
        columns.push(ColumnScaling { mean, range });
    }
    let target_scaling = ColumnScaling {
        mean: r.f64().map_err(|_| bad("truncated"))?,
        range: r.f64().map_err(|_| bad("truncated"))?,
    };
    let model_len = r.u64().map_err(|_| bad("truncated"))? as usize;
    if model_len != r.remaining() {
        return Err(bad("model blob length mismatch"));
    }
    let model = mlp::model_from_bytes(r.take(model_len).map_err(|_| bad("truncated"))?)?;
    if model.n_inputs() != n_cols {
        return Err(bad("model input size does not match the feature columns"));
    }
    Ok(TrainedPredictor {
        grid,
        selection,
        feature_scaling: ScalingParams { columns },
        target_scaling,
        model,
    })
}

pub fn save_predictor(p: &TrainedPredictor, path: impl AsRef<Path>) -> Result<(), PipelineError> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(&predictor_to_bytes(p))
        .map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub fn load_predictor(path: impl AsRef<Path>) -> Result<TrainedPredictor, PipelineError> {
    let path = path.as_ref();
    let mut data = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    predictor_from_bytes(&data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{ColumnDescriptor, DenseMatrix};
    use crate::mlp::BatchMode;

    #[test]
    fn paper_period_fold_plan() {
        let plan = build_fold_plan(YearRange::new(2010, 2016), 2).unwrap();
        assert_eq!(plan.folds.len(), 4);
        assert_eq!(plan.folds[0].predict, YearRange::new(2010, 2011));
        assert_eq!(plan.folds[0].train_years, vec![2012, 2013, 2014, 2015, 2016]);
        assert_eq!(plan.folds[1].predict, YearRange::new(2012, 2013));
        assert_eq!(plan.folds[1].train_years, vec![2010, 2011, 2014, 2015, 2016]);
        assert_eq!(plan.folds[3].predict, YearRange::new(2016, 2016));
        assert_eq!(
            plan.folds[3].train_years,
            vec![2010, 2011, 2012, 2013, 2014, 2015]
        );
    }

    #[test]
    fn two_year_plan_with_single_year_blocks() {
        let plan = build_fold_plan(YearRange::new(2010, 2011), 1).unwrap();
        assert_eq!(plan.folds.len(), 2);
        assert_eq!(plan.folds[0].train_years, vec![2011]);
        assert_eq!(plan.folds[1].train_years, vec![2010]);
    }

    #[test]
    fn train_predict_ratio_is_roughly_71_to_29() {
        let axis = axis_for_years(YearRange::new(2010, 2016));
        assert_eq!(axis.len(), 61_368);
        let plan = build_fold_plan(YearRange::new(2010, 2016), 2).unwrap();
        let fold = &plan.folds[0];
        let train_hours: usize = fold
            .train_years
            .iter()
            .map(|&y| year_rows(&axis, y).unwrap().len())
            .sum();
        let ratio = train_hours as f64 / axis.len() as f64;
        assert!((ratio - 0.71).abs() < 0.02, "ratio {ratio}");
    }

    #[test]
    fn too_short_period_is_rejected() {
        assert!(matches!(
            build_fold_plan(YearRange::new(2010, 2011), 2),
            Err(PipelineError::PeriodTooShort { .. })
        ));
        assert!(matches!(
            build_fold_plan(YearRange::new(2010, 2010), 1),
            Err(PipelineError::PeriodTooShort { .. })
        ));
    }

    #[test]
    fn fold_plans_partition_for_all_small_cases() {
        for n_years in 2..=10usize {
            for block in 1..=3usize {
                if n_years < block + 1 {
                    continue;
                }
                let period = YearRange::new(2010, 2010 + n_years as i32 - 1);
                let plan = build_fold_plan(period, block).unwrap();
                let mut predicted: Vec<i32> = Vec::new();
                for fold in &plan.folds {
                    for y in fold.predict.years() {
                        assert!(!fold.train_years.contains(&y), "leakage in {period} b{block}");
                        predicted.push(y);
                    }
                    let expected_train = n_years - fold.predict.n_years();
                    assert_eq!(fold.train_years.len(), expected_train);
                }
                predicted.sort_unstable();
                let all: Vec<i32> = period.years().collect();
                assert_eq!(predicted, all, "partition broken for {period} b{block}");
            }
        }
    }

    fn smooth_problem(years: YearRange) -> (FeatureMatrix, CapacityFactorSeries) {
        let axis = axis_for_years(years);
        let n = axis.len();
        let mut rows = Vec::with_capacity(n);
        let mut target = Vec::with_capacity(n);
        for t in 0..n {
            let phase = t as f64 * std::f64::consts::TAU / 24.0;
            let slow = (t as f64 * std::f64::consts::TAU / 1000.0).sin();
            let x = vec![phase.sin(), phase.cos(), slow];
            let y = 0.35 + 0.12 * x[0] + 0.08 * x[1] * x[1] + 0.18 * slow;
            rows.push(x);
            target.push(y);
        }
        let features = FeatureMatrix {
            axis,
            columns: (0..3).map(|i| ColumnDescriptor::HourOfDay(i as u8)).collect(),
            data: DenseMatrix::from_rows(&rows),
        };
        (features, CapacityFactorSeries::new(axis, target))
    }

    #[test]
    fn fold_learns_a_smooth_target() {
        let years = YearRange::new(2010, 2011);
        let (features, target) = smooth_problem(years);
        let plan = build_fold_plan(years, 1).unwrap();
        let cfg = MlpConfig {
            hidden_sizes: [16, 16, 16],
            learning_rate: 0.3,
            epochs: 250,
            seed: 5,
            batch_mode: BatchMode::Minibatch(32),
            shuffle: true,
        };
        let out = run_fold(&plan.folds[0], &features, &target, &cfg).unwrap();
        assert_eq!(out.predictions.len(), out.predict_rows.len());
        assert_eq!(out.predictions.len(), 8760);
        let truth = &target.values[out.predict_rows.clone()];
        let corr = quality::correlation(truth, &out.predictions).unwrap();
        assert!(corr >= 0.99, "correlation {corr}");
    }

    #[test]
    fn fold_output_has_predict_window_length() {
        let years = YearRange::new(2010, 2012);
        let (features, target) = smooth_problem(years);
        let plan = build_fold_plan(years, 1).unwrap();
        let cfg = MlpConfig {
            hidden_sizes: [4, 4, 4],
            learning_rate: 0.2,
            epochs: 2,
            seed: 1,
            batch_mode: BatchMode::Minibatch(512),
            shuffle: true,
        };
        // 2012 is a leap year
        let out = run_fold(&plan.folds[2], &features, &target, &cfg).unwrap();
        assert_eq!(out.predictions.len(), 8784);
        assert_eq!(out.train_rows.len(), 1); // 2010-2011 merge into one range
    }

    fn desk_bundle() -> (crate::baseline::Scenario, GridSpec) {
        let grid = GridSpec::from_bbox(5.0, 6.25, 50.0, 51.0, 0.625, 0.5).unwrap();
        let scenario = crate::baseline::synth_scenario(404, 2, &grid, 5);
        (scenario, grid)
    }

    fn fast_experiment(variant: Variant, seed: u64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(variant, 8, seed, YearRange::new(2010, 2011));
        cfg.block = 1;
        cfg.train = TrainSettings {
            learning_rate: 0.1,
            epochs: 8,
            batch_mode: BatchMode::Minibatch(256),
            shuffle: true,
        };
        cfg
    }

    #[test]
    fn experiment_stitches_without_gaps_and_without_leakage() {
        let (scenario, _) = desk_bundle();
        let bundle = DataBundle {
            wind: &scenario.wind,
            plants: Some(&scenario.plants),
            observed: &scenario.observed,
        };
        let out = run_experiment(&fast_experiment(Variant::Mlm2, 7), &bundle, 2).unwrap();
        assert_eq!(out.series.axis.len(), scenario.observed.axis.len());
        assert!(out.series.values.iter().all(|v| v.is_finite()));
        assert!(out.verify_no_leakage());
        assert_eq!(out.provenance.len(), 2);
    }

    #[test]
    fn experiment_is_deterministic_for_any_job_count() {
        let (scenario, _) = desk_bundle();
        let bundle = DataBundle {
            wind: &scenario.wind,
            plants: Some(&scenario.plants),
            observed: &scenario.observed,
        };
        let cfg = fast_experiment(Variant::Mlm2, 11);
        let a = run_experiment(&cfg, &bundle, 1).unwrap();
        let b = run_experiment(&cfg, &bundle, 4).unwrap();
        assert_eq!(a, b);
        for (x, y) in a.series.values.iter().zip(&b.series.values) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn variants_share_dummies_but_differ_in_selection() {
        let (scenario, grid) = desk_bundle();
        let all = select_all(&grid);
        let k4 = select_k_nearest(&grid, &scenario.plants, 4);
        assert!(k4.len() <= all.len());
        let axis = axis_for_years(YearRange::new(2010, 2010));
        let f_all = assemble(&scenario.wind, &all, &axis).unwrap();
        let f_k4 = assemble(&scenario.wind, &k4, &axis).unwrap();
        // the trailing 43 dummy columns are identical
        for t in (0..axis.len()).step_by(997) {
            let a = f_all.data.row(t);
            let b = f_k4.data.row(t);
            assert_eq!(
                &a[a.len() - 43..],
                &b[b.len() - 43..],
                "dummies differ at row {t}"
            );
        }
    }

    #[test]
    fn mlm1_requires_no_plants_but_mlm2_does() {
        let (scenario, _) = desk_bundle();
        let bundle_no_plants = DataBundle {
            wind: &scenario.wind,
            plants: None,
            observed: &scenario.observed,
        };
        assert!(matches!(
            run_experiment(&fast_experiment(Variant::Mlm2, 1), &bundle_no_plants, 1),
            Err(PipelineError::MissingPlants("mlm2"))
        ));
        let out = run_experiment(&fast_experiment(Variant::Mlm1, 1), &bundle_no_plants, 1);
        assert!(out.is_ok());
    }

    #[test]
    fn select_model_reproduces_published_size_choices() {
        // NMAE/NRMSE pairs for the two tested sizes of each variant
        let mlm1 = vec![
            (
                "mlm1-60".to_string(),
                CandidateMetrics {
                    nmae: 0.152,
                    nrmse: 0.208,
                    correlation: 0.0,
                },
            ),
            (
                "mlm1-80".to_string(),
                CandidateMetrics {
                    nmae: 0.161,
                    nrmse: 0.220,
                    correlation: 0.0,
                },
            ),
        ];
        assert_eq!(select_model_from_metrics(&mlm1).unwrap(), "mlm1-60");
        let mlm2 = vec![
            (
                "mlm2-60".to_string(),
                CandidateMetrics {
                    nmae: 0.144,
                    nrmse: 0.202,
                    correlation: 0.0,
                },
            ),
            (
                "mlm2-80".to_string(),
                CandidateMetrics {
                    nmae: 0.138,
                    nrmse: 0.190,
                    correlation: 0.0,
                },
            ),
        ];
        assert_eq!(select_model_from_metrics(&mlm2).unwrap(), "mlm2-80");
    }

    #[test]
    fn select_model_tie_break_is_stable() {
        let m = CandidateMetrics {
            nmae: 0.1,
            nrmse: 0.2,
            correlation: 0.9,
        };
        let candidates = vec![("first".to_string(), m), ("second".to_string(), m)];
        assert_eq!(select_model_from_metrics(&candidates).unwrap(), "first");
    }

    #[test]
    fn select_model_ranks_by_nmae_then_nrmse_then_correlation() {
        let candidates = vec![
            (
                "worse-nmae".to_string(),
                CandidateMetrics {
                    nmae: 0.2,
                    nrmse: 0.1,
                    correlation: 1.0,
                },
            ),
            (
                "better-corr".to_string(),
                CandidateMetrics {
                    nmae: 0.1,
                    nrmse: 0.3,
                    correlation: 0.99,
                },
            ),
            (
                "best".to_string(),
                CandidateMetrics {
                    nmae: 0.1,
                    nrmse: 0.3,
                    correlation: 0.995,
                },
            ),
        ];
        assert_eq!(select_model_from_metrics(&candidates).unwrap(), "best");
    }

    #[test]
    fn predictor_round_trips_and_reproduces_predictions() {
        let (scenario, _) = desk_bundle();
        let cfg = MlpConfig {
            hidden_sizes: [6, 6, 6],
            learning_rate: 0.1,
            epochs: 3,
            seed: 77,
            batch_mode: BatchMode::Minibatch(512),
            shuffle: true,
        };
        let (predictor, _) = fit_predictor(
            &scenario.wind,
            Some(&scenario.plants),
            &scenario.observed,
            Variant::Mlm2,
            4,
            &cfg,
        )
        .unwrap();
        let bytes = predictor_to_bytes(&predictor);
        let back = predictor_from_bytes(&bytes).unwrap();
        assert_eq!(back, predictor);
        let a = predict_series(&predictor, &scenario.wind).unwrap();
        let b = predict_series(&back, &scenario.wind).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("predictor.bin");
        save_predictor(&predictor, &path).unwrap();
        assert_eq!(load_predictor(&path).unwrap(), predictor);
    }

    #[test]
    fn axis_year_range_requires_whole_years() {
        let axis = axis_for_years(YearRange::new(2010, 2012));
        assert_eq!(axis_year_range(&axis).unwrap(), YearRange::new(2010, 2012));
        let offset = TimeAxis::new(
            Utc.with_ymd_and_hms(2010, 1, 1, 5, 0, 0).unwrap(),
            8760,
        )
        .unwrap();
        assert!(axis_year_range(&offset).is_err());
    }
}
