//! Statistical quality battery for comparing a modelled capacity-factor
//! series against observations.
//!
//! Covers error metrics (correlation, NMAE, NRMSE), variance and quantiles,
//! deviations by capacity-factor bin, distribution counts and histograms,
//! diurnal and seasonal deviation statistics, run lengths of extreme
//! generation events, and pooled-lag power-ramp statistics. [`full_report`]
//! bundles everything into one serializable [`QualityReport`].
//!
//! Conventions fixed here and relied on by the tests:
//! - deviations are always `pred - obs`,
//! - quantiles interpolate linearly at position `p*(n-1)+1` between order
//!   statistics,
//! - variance uses the sample (n-1) denominator,
//! - NMAE and NRMSE are normalized by the mean observed value,
//! - ramp statistics pool differences over all lags `1..=T`,
//! - diurnal groups are labeled 1..=24 where label `h` holds UTC hour `h-1`,
//! - seasons are DJF/MAM/JJA/SON by UTC month.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::ingest::CapacityFactorSeries;

#[derive(Debug, Error)]
pub enum QualityError {
    #[error("series length mismatch: observed {obs}, predicted {pred}")]
    LengthMismatch { obs: usize, pred: usize },
    #[error("series axes are not aligned")]
    AxisMismatch,
    #[error("correlation is undefined for a zero-variance series")]
    DegenerateSeries,
    #[error("normalized errors are undefined when mean observation is not positive")]
    ZeroMeanObservations,
    #[error("series of length {len} is too short (need more than {needed})")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Default extreme-event thresholds, low to high.
pub fn default_extreme_predicates() -> [ThresholdPredicate; 4] {
    [
        ThresholdPredicate::Below(0.005),
        ThresholdPredicate::Below(0.01),
        ThresholdPredicate::Above(0.75),
        ThresholdPredicate::Above(0.8),
    ]
}

/// Default distribution-count predicates.
pub fn default_distribution_predicates() -> [ThresholdPredicate; 3] {
    [
        ThresholdPredicate::Below(0.04),
        ThresholdPredicate::Between(0.08, 0.12),
        ThresholdPredicate::Above(0.8),
    ]
}

/// Ramp timeframes reported by [`full_report`], in hours.
pub const RAMP_TIMEFRAMES: [usize; 4] = [1, 3, 6, 12];

/// Capacity-factor bin width for deviation-by-bin statistics.
pub const BIN_WIDTH: f64 = 0.1;

/// Capacity-factor class width for seasonal statistics.
pub const SEASONAL_CLASS_WIDTH: f64 = 0.2;

/// Histogram bin width used in [`full_report`].
pub const HISTOGRAM_WIDTH: f64 = 0.02;

/// Streak/ramp threshold for "high ramp" counting.
pub const HIGH_RAMP_THRESHOLD: f64 = 0.2;

fn check_aligned(obs: &[f64], pred: &[f64]) -> Result<(), QualityError> {
    if obs.len() != pred.len() {
        return Err(QualityError::LengthMismatch {
            obs: obs.len(),
            pred: pred.len(),
        });
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Pearson correlation coefficient.
pub fn correlation(obs: &[f64], pred: &[f64]) -> Result<f64, QualityError> {
    check_aligned(obs, pred)?;
    assert!(obs.len() >= 2, "correlation needs at least two samples");
    let mo = mean(obs);
    let mp = mean(pred);
    let mut cov = 0.0;
    let mut vo = 0.0;
    let mut vp = 0.0;
    for (&o, &p) in obs.iter().zip(pred) {
        cov += (o - mo) * (p - mp);
        vo += (o - mo) * (o - mo);
        vp += (p - mp) * (p - mp);
    }
    if vo == 0.0 || vp == 0.0 {
        return Err(QualityError::DegenerateSeries);
    }
    Ok(cov / (vo.sqrt() * vp.sqrt()))
}

/// Sample variance (n-1 denominator); 0 for fewer than two samples.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Mean absolute error normalized by the mean observed value.
pub fn nmae(obs: &[f64], pred: &[f64]) -> Result<f64, QualityError> {
    check_aligned(obs, pred)?;
    let mo = mean(obs);
    if mo <= 0.0 {
        return Err(QualityError::ZeroMeanObservations);
    }
    let mae = obs
        .iter()
        .zip(pred)
        .map(|(&o, &p)| (p - o).abs())
        .sum::<f64>()
        / obs.len() as f64;
    Ok(mae / mo)
}

/// Root mean squared error normalized by the mean observed value.
pub fn nrmse(obs: &[f64], pred: &[f64]) -> Result<f64, QualityError> {
    check_aligned(obs, pred)?;
    let mo = mean(obs);
    if mo <= 0.0 {
        return Err(QualityError::ZeroMeanObservations);
    }
    let mse = obs
        .iter()
        .zip(pred)
        .map(|(&o, &p)| (p - o) * (p - o))
        .sum::<f64>()
        / obs.len() as f64;
    Ok(mse.sqrt() / mo)
}

/// Quantile of a sorted slice by linear interpolation at position
/// `p*(n-1)+1` between order statistics.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    assert!((0.0..=1.0).contains(&p), "quantile level {p} outside [0,1]");
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Quantiles of `x` at each level in `ps`.
pub fn quantiles(x: &[f64], ps: &[f64]) -> Vec<f64> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    ps.iter().map(|&p| quantile_sorted(&sorted, p)).collect()
}

/// Median / mean / range summary of a deviation group. Empty groups carry
/// `n == 0` and absent statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationSummary {
    pub n: usize,
    pub median: Option<f64>,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl DeviationSummary {
    fn from_values(mut values: Vec<f64>) -> Self {
        if values.is_empty() {
            return Self {
                n: 0,
                median: None,
                mean: None,
                min: None,
                max: None,
            };
        }
        values.sort_by(f64::total_cmp);
        Self {
            n: values.len(),
            median: Some(quantile_sorted(&values, 0.5)),
            mean: Some(mean(&values)),
            min: Some(values[0]),
            max: Some(*values.last().unwrap()),
        }
    }
}

/// One capacity-factor bin with its deviation summary. `hi` is `None` for
/// the open-ended top bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinDeviation {
    pub lo: f64,
    pub hi: Option<f64>,
    #[serde(flatten)]
    pub stats: DeviationSummary,
}

/// Index of the class holding `value` among classes of `width` below the
/// fixed 0.8 top boundary plus one open-ended class above it.
fn cf_class_index(value: f64, width: f64, n_classes: usize) -> usize {
    if value < 0.0 {
        return 0;
    }
    ((value / width).floor() as usize).min(n_classes - 1)
}

fn cf_class_count(width: f64) -> usize {
    // closed classes below 0.8, one open class at and above it
    ((0.8 / width) + 0.5).floor() as usize + 1
}

/// Deviations `pred - obs` grouped into bins of the OBSERVED value:
/// `[0,w), [w,2w), ..., [0.8-w,0.8), [0.8,inf)`.
pub fn bin_deviations(obs: &[f64], pred: &[f64], width: f64) -> Result<Vec<BinDeviation>, QualityError> {
    check_aligned(obs, pred)?;
    assert!(width > 0.0, "bin width must be positive");
    let n_bins = cf_class_count(width);
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for (&o, &p) in obs.iter().zip(pred) {
        groups[cf_class_index(o, width, n_bins)].push(p - o);
    }
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(i, values)| BinDeviation {
            lo: i as f64 * width,
            hi: (i + 1 < n_bins).then(|| (i + 1) as f64 * width),
            stats: DeviationSummary::from_values(values),
        })
        .collect())
}

/// A threshold predicate over capacity factors. `Between` is inclusive on
/// both ends; `Below`/`Above` are strict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdPredicate {
    Below(f64),
    Between(f64, f64),
    Above(f64),
}

impl ThresholdPredicate {
    pub fn matches(&self, v: f64) -> bool {
        match *self {
            ThresholdPredicate::Below(t) => v < t,
            ThresholdPredicate::Between(lo, hi) => v >= lo && v <= hi,
            ThresholdPredicate::Above(t) => v > t,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            ThresholdPredicate::Below(t) => format!("cf < {t}"),
            ThresholdPredicate::Between(lo, hi) => format!("{lo} <= cf <= {hi}"),
            ThresholdPredicate::Above(t) => format!("cf > {t}"),
        }
    }
}

/// Count of values matching each predicate.
pub fn distribution_counts(x: &[f64], predicates: &[ThresholdPredicate]) -> Vec<usize> {
    assert!(!x.is_empty(), "distribution counts of empty series");
    predicates
        .iter()
        .map(|p| x.iter().filter(|&&v| p.matches(v)).count())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub density: f64,
}

/// Density histogram with bins of `width` anchored at 0; densities
/// integrate to 1.
pub fn histogram(x: &[f64], width: f64) -> Vec<HistogramBin> {
    assert!(!x.is_empty(), "histogram of empty series");
    assert!(width > 0.0, "histogram width must be positive");
    let idx_of = |v: f64| (v / width).floor() as i64;
    let min_idx = x.iter().copied().map(idx_of).min().unwrap();
    let max_idx = x.iter().copied().map(idx_of).max().unwrap();
    let n_bins = (max_idx - min_idx + 1) as usize;
    let mut counts = vec![0usize; n_bins];
    for &v in x {
        counts[(idx_of(v) - min_idx) as usize] += 1;
    }
    let norm = 1.0 / (x.len() as f64 * width);
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| HistogramBin {
            lo: (min_idx + i as i64) as f64 * width,
            density: c as f64 * norm,
        })
        .collect()
}

/// Deviation summary for one hour-of-day group, labeled 1..=24.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiurnalStat {
    pub hour: u8,
    #[serde(flatten)]
    pub stats: DeviationSummary,
}

/// Deviations `pred - obs` grouped by UTC hour of day. Group label `h`
/// covers timestamps with UTC hour `h - 1`.
pub fn diurnal_stats(
    obs: &CapacityFactorSeries,
    pred: &CapacityFactorSeries,
) -> Result<Vec<DiurnalStat>, QualityError> {
    if obs.axis != pred.axis {
        return Err(QualityError::AxisMismatch);
    }
    use chrono::Timelike;
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); 24];
    for (i, (&o, &p)) in obs.values.iter().zip(&pred.values).enumerate() {
        let hour = obs.axis.timestamp(i).hour() as usize;
        groups[hour].push(p - o);
    }
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(h, values)| DiurnalStat {
            hour: (h + 1) as u8,
            stats: DeviationSummary::from_values(values),
        })
        .collect())
}

/// Meteorological season by UTC month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Season {
    #[serde(rename = "DJF")]
    Djf,
    #[serde(rename = "MAM")]
    Mam,
    #[serde(rename = "JJA")]
    Jja,
    #[serde(rename = "SON")]
    Son,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::Djf, Season::Mam, Season::Jja, Season::Son];

    pub fn of_month(month: u32) -> Season {
        match month {
            12 | 1 | 2 => Season::Djf,
            3 | 4 | 5 => Season::Mam,
            6 | 7 | 8 => Season::Jja,
            9 | 10 | 11 => Season::Son,
            other => panic!("month {other} out of range"),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Season::Djf => "DJF",
            Season::Mam => "MAM",
            Season::Jja => "JJA",
            Season::Son => "SON",
        }
    }

    fn index(&self) -> usize {
        match self {
            Season::Djf => 0,
            Season::Mam => 1,
            Season::Jja => 2,
            Season::Son => 3,
        }
    }
}

/// Deviation statistics for one season and capacity-factor class.
/// Empty cells are reported with `n == 0` rather than dropped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeasonalCell {
    pub season: Season,
    pub class_lo: f64,
    pub class_hi: Option<f64>,
    pub n: usize,
    pub median: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

/// Deviations `pred - obs` grouped by (season x observed CF class of width
/// 0.2). Cells are ordered season-major.
pub fn seasonal_stats(
    obs: &CapacityFactorSeries,
    pred: &CapacityFactorSeries,
) -> Result<Vec<SeasonalCell>, QualityError> {
    if obs.axis != pred.axis {
        return Err(QualityError::AxisMismatch);
    }
    use chrono::Datelike;
    let n_classes = cf_class_count(SEASONAL_CLASS_WIDTH);
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); 4 * n_classes];
    for (i, (&o, &p)) in obs.values.iter().zip(&pred.values).enumerate() {
        let season = Season::of_month(obs.axis.timestamp(i).month());
        let class = cf_class_index(o, SEASONAL_CLASS_WIDTH, n_classes);
        groups[season.index() * n_classes + class].push(p - o);
    }
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(g, values)| {
            let season = Season::ALL[g / n_classes];
            let class = g % n_classes;
            let summary = DeviationSummary::from_values(values);
            SeasonalCell {
                season,
                class_lo: class as f64 * SEASONAL_CLASS_WIDTH,
                class_hi: (class + 1 < n_classes).then(|| (class + 1) as f64 * SEASONAL_CLASS_WIDTH),
                n: summary.n,
                median: summary.median,
                min: summary.min,
                max: summary.max,
            }
        })
        .collect())
}

/// Run-length statistics of maximal consecutive-hour streaks matching a
/// predicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremeEventStats {
    pub frequency: usize,
    pub mean_duration: Option<f64>,
    pub max_duration: Option<usize>,
}

/// Maximal runs of consecutive hours where `predicate` holds.
pub fn extreme_events(x: &[f64], predicate: &ThresholdPredicate) -> ExtremeEventStats {
    assert!(!x.is_empty(), "extreme events of empty series");
    let mut runs: Vec<usize> = Vec::new();
    let mut current = 0usize;
    for &v in x {
        if predicate.matches(v) {
            current += 1;
        } else if current > 0 {
            runs.push(current);
            current = 0;
        }
    }
    if current > 0 {
        runs.push(current);
    }
    if runs.is_empty() {
        return ExtremeEventStats {
            frequency: 0,
            mean_duration: None,
            max_duration: None,
        };
    }
    let total: usize = runs.iter().sum();
    ExtremeEventStats {
        frequency: runs.len(),
        mean_duration: Some(total as f64 / runs.len() as f64),
        max_duration: runs.iter().max().copied(),
    }
}

/// Pooled-lag ramp statistics for one timeframe `T`: differences
/// `x[t+k] - x[t]` over all lags `k = 1..=T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RampStats {
    pub timeframe_h: usize,
    pub min: f64,
    pub max: f64,
    pub neg_mean: Option<f64>,
    pub neg_freq: usize,
    pub pos_mean: Option<f64>,
    pub pos_freq: usize,
    pub zero_freq: usize,
    pub freq_below_neg_threshold: usize,
    pub freq_above_pos_threshold: usize,
}

impl RampStats {
    /// Total pooled difference count: `sum over k of (N - k)`.
    pub fn pooled_count(&self) -> usize {
        self.neg_freq + self.pos_freq + self.zero_freq
    }
}

/// Ramp statistics pooling strictly all lags `1..=timeframe`. Signs are
/// strict; exact zeros are counted separately.
pub fn ramp_stats(x: &[f64], timeframe: usize) -> Result<RampStats, QualityError> {
    assert!(timeframe >= 1, "timeframe must be at least one hour");
    if x.len() <= timeframe {
        return Err(QualityError::SeriesTooShort {
            len: x.len(),
            needed: timeframe,
        });
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut neg_sum = 0.0;
    let mut neg_freq = 0usize;
    let mut pos_sum = 0.0;
    let mut pos_freq = 0usize;
    let mut zero_freq = 0usize;
    let mut below = 0usize;
    let mut above = 0usize;
    for lag in 1..=timeframe {
        for t in 0..x.len() - lag {
            let d = x[t + lag] - x[t];
            min = min.min(d);
            max = max.max(d);
            if d < 0.0 {
                neg_sum += d;
                neg_freq += 1;
            } else if d > 0.0 {
                pos_sum += d;
                pos_freq += 1;
            } else {
                zero_freq += 1;
            }
            if d < -HIGH_RAMP_THRESHOLD {
                below += 1;
            }
            if d > HIGH_RAMP_THRESHOLD {
                above += 1;
            }
        }
    }
    Ok(RampStats {
        timeframe_h: timeframe,
        min,
        max,
        neg_mean: (neg_freq > 0).then(|| neg_sum / neg_freq as f64),
        neg_freq,
        pos_mean: (pos_freq > 0).then(|| pos_sum / pos_freq as f64),
        pos_freq,
        zero_freq,
        freq_below_neg_threshold: below,
        freq_above_pos_threshold: above,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CdfPoint {
    pub value: f64,
    pub cum_prob: f64,
}

/// Empirical cumulative density of `x[t+lag] - x[t]`, as sorted
/// `(value, i/n)` steps.
pub fn ramp_cdf(x: &[f64], lag: usize) -> Result<Vec<CdfPoint>, QualityError> {
    assert!(lag >= 1, "lag must be at least one hour");
    if x.len() <= lag {
        return Err(QualityError::SeriesTooShort {
            len: x.len(),
            needed: lag,
        });
    }
    let mut diffs: Vec<f64> = (0..x.len() - lag).map(|t| x[t + lag] - x[t]).collect();
    diffs.sort_by(f64::total_cmp);
    let n = diffs.len() as f64;
    Ok(diffs
        .into_iter()
        .enumerate()
        .map(|(i, value)| CdfPoint {
            value,
            cum_prob: (i + 1) as f64 / n,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileEntry {
    pub p: f64,
    pub observed: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionEntry {
    pub predicate: String,
    pub observed: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremeEntry {
    pub predicate: String,
    pub observed: ExtremeEventStats,
    pub predicted: ExtremeEventStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RampEntry {
    pub timeframe_h: usize,
    pub observed: RampStats,
    pub predicted: RampStats,
}

/// The complete quality battery for one (observed, predicted) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    pub n_hours: usize,
    pub correlation: f64,
    pub nmae: f64,
    pub nrmse: f64,
    pub variance_observed: f64,
    pub variance_predicted: f64,
    pub negative_predictions: usize,
    pub quantiles: Vec<QuantileEntry>,
    pub bin_deviations: Vec<BinDeviation>,
    pub distribution_counts: Vec<DistributionEntry>,
    pub histogram_observed: Vec<HistogramBin>,
    pub histogram_predicted: Vec<HistogramBin>,
    pub diurnal: Vec<DiurnalStat>,
    pub seasonal: Vec<SeasonalCell>,
    pub extremes: Vec<ExtremeEntry>,
    pub ramps: Vec<RampEntry>,
    pub ramp_cdf_observed: Vec<CdfPoint>,
    pub ramp_cdf_predicted: Vec<CdfPoint>,
}

/// Pairwise headline metrics, used for model selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CandidateMetrics {
    pub nmae: f64,
    pub nrmse: f64,
    pub correlation: f64,
}

pub fn summary_metrics(obs: &[f64], pred: &[f64]) -> Result<CandidateMetrics, QualityError> {
    Ok(CandidateMetrics {
        nmae: nmae(obs, pred)?,
        nrmse: nrmse(obs, pred)?,
        correlation: correlation(obs, pred)?,
    })
}

/// Assemble the full battery with the default thresholds and timeframes.
pub fn full_report(
    obs: &CapacityFactorSeries,
    pred: &CapacityFactorSeries,
) -> Result<QualityReport, QualityError> {
    if obs.axis != pred.axis {
        return Err(QualityError::AxisMismatch);
    }
    let o = &obs.values;
    let p = &pred.values;
    let ps = [0.0, 0.25, 0.5, 0.75, 1.0];
    let qo = quantiles(o, &ps);
    let qp = quantiles(p, &ps);
    let dist = default_distribution_predicates();
    let counts_o = distribution_counts(o, &dist);
    let counts_p = distribution_counts(p, &dist);
    let extreme = default_extreme_predicates();

    let mut ramps = Vec::new();
    for t in RAMP_TIMEFRAMES {
        ramps.push(RampEntry {
            timeframe_h: t,
            observed: ramp_stats(o, t)?,
            predicted: ramp_stats(p, t)?,
        });
    }

    Ok(QualityReport {
        n_hours: o.len(),
        correlation: correlation(o, p)?,
        nmae: nmae(o, p)?,
        nrmse: nrmse(o, p)?,
        variance_observed: variance(o),
        variance_predicted: variance(p),
        negative_predictions: pred.negative_count(),
        quantiles: ps
            .iter()
            .zip(qo.iter().zip(&qp))
            .map(|(&p, (&observed, &predicted))| QuantileEntry {
                p,
                observed,
                predicted,
            })
            .collect(),
        bin_deviations: bin_deviations(o, p, BIN_WIDTH)?,
        distribution_counts: dist
            .iter()
            .zip(counts_o.iter().zip(&counts_p))
            .map(|(pred, (&observed, &predicted))| DistributionEntry {
                predicate: pred.label(),
                observed,
                predicted,
            })
            .collect(),
        histogram_observed: histogram(o, HISTOGRAM_WIDTH),
        histogram_predicted: histogram(p, HISTOGRAM_WIDTH),
        diurnal: diurnal_stats(obs, pred)?,
        seasonal: seasonal_stats(obs, pred)?,
        extremes: extreme
            .iter()
            .map(|pr| ExtremeEntry {
                predicate: pr.label(),
                observed: extreme_events(o, pr),
                predicted: extreme_events(p, pr),
            })
            .collect(),
        ramps,
        ramp_cdf_observed: ramp_cdf(o, 1)?,
        ramp_cdf_predicted: ramp_cdf(p, 1)?,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, QualityError> {
    let file = File::create(path).map_err(|source| QualityError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(BufWriter::new(file))
}

fn finish(w: &mut BufWriter<File>, path: &Path, r: std::io::Result<()>) -> Result<(), QualityError> {
    r.and_then(|_| w.flush()).map_err(|source| QualityError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl QualityReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), QualityError> {
        let path = path.as_ref();
        let mut w = create(path)?;
        let r = serde_json::to_writer_pretty(&mut w, self).map_err(std::io::Error::other);
        finish(&mut w, path, r)
    }

    /// Metrics and quantiles table: one row per quality measure.
    pub fn write_metrics_csv(&self, path: impl AsRef<Path>) -> Result<(), QualityError> {
        let path = path.as_ref();
        let mut w = create(path)?;
        let r = (|| -> std::io::Result<()> {
            writeln!(w, "measure,observed,predicted")?;
            writeln!(w, "correlation,,{}", self.correlation)?;
            writeln!(w, "nmae,,{}", self.nmae)?;
            writeln!(w, "nrmse,,{}", self.nrmse)?;
            writeln!(
                w,
                "variance,{},{}",
                self.variance_observed, self.variance_predicted
            )?;
            for q in &self.quantiles {
                writeln!(
                    w,
                    "quantile_{}%,{},{}",
                    (q.p * 100.0).round(),
                    q.observed,
                    q.predicted
                )?;
            }
            writeln!(w, "negative_values,0,{}", self.negative_predictions)?;
            Ok(())
        })();
        finish(&mut w, path, r)
    }

    /// Extreme-event table: frequency and durations per threshold.
    pub fn write_extremes_csv(&self, path: impl AsRef<Path>) -> Result<(), QualityError> {
        let path = path.as_ref();
        let mut w = create(path)?;
        let r = (|| -> std::io::Result<()> {
            writeln!(w, "predicate,measure,observed,predicted")?;
            for e in &self.extremes {
                writeln!(
                    w,
                    "{},frequency,{},{}",
                    e.predicate, e.observed.frequency, e.predicted.frequency
                )?;
                writeln!(
                    w,
                    "{},mean_duration,{},{}",
                    e.predicate,
                    opt(e.observed.mean_duration),
                    opt(e.predicted.mean_duration)
                )?;
                writeln!(
                    w,
                    "{},max_duration,{},{}",
                    e.predicate,
                    opt(e.observed.max_duration.map(|v| v as f64)),
                    opt(e.predicted.max_duration.map(|v| v as f64))
                )?;
            }
            Ok(())
        })();
        finish(&mut w, path, r)
    }

    /// Ramp table: pooled-lag statistics per timeframe.
    pub fn write_ramps_csv(&self, path: impl AsRef<Path>) -> Result<(), QualityError> {
        let path = path.as_ref();
        let mut w = create(path)?;
        let r = (|| -> std::io::Result<()> {
            writeln!(w, "timeframe_h,measure,observed,predicted")?;
            for e in &self.ramps {
                let t = e.timeframe_h;
                let (o, p) = (&e.observed, &e.predicted);
                writeln!(w, "{t},min,{},{}", o.min, p.min)?;
                writeln!(w, "{t},neg_mean,{},{}", opt(o.neg_mean), opt(p.neg_mean))?;
                writeln!(w, "{t},neg_freq,{},{}", o.neg_freq, p.neg_freq)?;
                writeln!(w, "{t},pos_mean,{},{}", opt(o.pos_mean), opt(p.pos_mean))?;
                writeln!(w, "{t},pos_freq,{},{}", o.pos_freq, p.pos_freq)?;
                writeln!(w, "{t},zero_freq,{},{}", o.zero_freq, p.zero_freq)?;
                writeln!(w, "{t},max,{},{}", o.max, p.max)?;
                writeln!(
                    w,
                    "{t},freq_below_-{},{},{}",
                    HIGH_RAMP_THRESHOLD, o.freq_below_neg_threshold, p.freq_below_neg_threshold
                )?;
                writeln!(
                    w,
                    "{t},freq_above_{},{},{}",
                    HIGH_RAMP_THRESHOLD, o.freq_above_pos_threshold, p.freq_above_pos_threshold
                )?;
            }
            Ok(())
        })();
        finish(&mut w, path, r)
    }

    /// Plot-data CSVs: bin deviations, histograms, diurnal and seasonal
    /// groups, and the 1h ramp CDFs.
    pub fn write_plot_data(&self, dir: impl AsRef<Path>) -> Result<(), QualityError> {
        let dir = dir.as_ref();

        let path = dir.join("bin_deviations.csv");
        let mut w = create(&path)?;
        let r = (|| -> std::io::Result<()> {
            writeln!(w, "bin_lo,bin_hi,n,median,mean,min,max")?;
            for b in &self.bin_deviations {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    b.lo,
                    opt(b.hi),
                    b.stats.n,
                    opt(b.stats.median),
                    opt(b.stats.mean),
                    opt(b.stats.min),
                    opt(b.stats.max)
                )?;
            }
            Ok(())
        })();
        finish(&mut w, &path, r)?;

        for (name, hist) in [
            ("histogram_observed.csv", &self.histogram_observed),
            ("histogram_predicted.csv", &self.histogram_predicted),
        ] {
            let path = dir.join(name);
            let mut w = create(&path)?;
            let r = (|| -> std::io::Result<()> {
                writeln!(w, "bin_lo,density")?;
                for b in hist {
                    writeln!(w, "{},{}", b.lo, b.density)?;
                }
                Ok(())
            })();
            finish(&mut w, &path, r)?;
        }

        let path = dir.join("diurnal.csv");
        let mut w = create(&path)?;
        let r = (|| -> std::io::Result<()> {
            writeln!(w, "hour,n,median,mean,min,max")?;
            for d in &self.diurnal {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    d.hour,
                    d.stats.n,
                    opt(d.stats.median),
                    opt(d.stats.mean),
                    opt(d.stats.min),
                    opt(d.stats.max)
                )?;
            }
            Ok(())
        })();
        finish(&mut w, &path, r)?;

        let path = dir.join("seasonal.csv");
        let mut w = create(&path)?;
        let r = (|| -> std::io::Result<()> {
            writeln!(w, "season,class_lo,class_hi,n,median,min,max")?;
            for c in &self.seasonal {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    c.season.label(),
                    c.class_lo,
                    opt(c.class_hi),
                    c.n,
                    opt(c.median),
                    opt(c.min),
                    opt(c.max)
                )?;
            }
            Ok(())
        })();
        finish(&mut w, &path, r)?;

        for (name, cdf) in [
            ("ramp_cdf_observed.csv", &self.ramp_cdf_observed),
            ("ramp_cdf_predicted.csv", &self.ramp_cdf_predicted),
        ] {
            let path = dir.join(name);
            let mut w = create(&path)?;
            let r = (|| -> std::io::Result<()> {
                writeln!(w, "value,cum_prob")?;
                for pt in cdf {
                    writeln!(w, "{},{}", pt.value, pt.cum_prob)?;
                }
                Ok(())
            })();
            finish(&mut w, &path, r)?;
        }

        Ok(())
    }
}
