//! Predictor-matrix assembly and reversible range scaling.
//!
//! A feature row holds the wind components over a grid-point selection
//! (variable-major, selection order) followed by 43 calendar dummies:
//! 24 hour-of-day, 7 day-of-week and 12 month-of-year one-hot columns,
//! all evaluated in UTC.

use chrono::{Datelike, Timelike};
use thiserror::Error;

use crate::grid::{wind_column_name, SubsetSelection, WindField, WindVariable};
use crate::ingest::TimeAxis;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("feature axis is not covered by the wind field axis")]
    AxisMismatch,
    #[error("scaling parameters cover {params} columns, matrix has {columns}")]
    ColumnCountMismatch { params: usize, columns: usize },
}

/// Number of calendar dummy columns (24 + 7 + 12).
pub const N_DUMMIES: usize = 43;

/// Plain row-major numeric matrix shared by feature assembly and the
/// network's training and prediction paths.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            assert_eq!(row.len(), n_cols, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n_cols..(r + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.n_cols..(r + 1) * self.n_cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n_cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n_cols + c] = v;
    }

    /// Copy of the listed rows, in the given order.
    pub fn subset_rows(&self, rows: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        DenseMatrix {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            data,
        }
    }
}

/// What one feature column holds.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnDescriptor {
    Wind {
        var: WindVariable,
        point: usize,
        lon: f64,
        lat: f64,
    },
    HourOfDay(u8),
    DayOfWeek(u8),
    MonthOfYear(u8),
}

impl ColumnDescriptor {
    pub fn name(&self) -> String {
        match self {
            ColumnDescriptor::Wind { var, lon, lat, .. } => wind_column_name(*var, *lon, *lat),
            ColumnDescriptor::HourOfDay(h) => format!("H{h:02}"),
            ColumnDescriptor::DayOfWeek(d) => format!("D{d}"),
            ColumnDescriptor::MonthOfYear(m) => format!("M{m:02}"),
        }
    }
}

/// Model-ready predictor rows with their column descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub axis: TimeAxis,
    pub columns: Vec<ColumnDescriptor>,
    pub data: DenseMatrix,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.data.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.data.n_cols()
    }
}

fn dummy_descriptors() -> Vec<ColumnDescriptor> {
    let mut columns = Vec::with_capacity(N_DUMMIES);
    for h in 0..24 {
        columns.push(ColumnDescriptor::HourOfDay(h));
    }
    for d in 0..7 {
        columns.push(ColumnDescriptor::DayOfWeek(d));
    }
    for m in 1..=12 {
        columns.push(ColumnDescriptor::MonthOfYear(m));
    }
    columns
}

fn fill_dummies(row: &mut [f64], ts: chrono::DateTime<chrono::Utc>) {
    let hour = ts.hour() as usize;
    let dow = ts.weekday().num_days_from_monday() as usize;
    let month = ts.month() as usize;
    row[hour] = 1.0;
    row[24 + dow] = 1.0;
    row[31 + (month - 1)] = 1.0;
}

/// The 43 calendar one-hot columns for every hour of `axis`.
pub fn date_dummies(axis: &TimeAxis) -> FeatureMatrix {
    let mut data = DenseMatrix::zeros(axis.len(), N_DUMMIES);
    for t in 0..axis.len() {
        fill_dummies(data.row_mut(t), axis.timestamp(t));
    }
    FeatureMatrix {
        axis: *axis,
        columns: dummy_descriptors(),
        data,
    }
}

/// Wind block (variable-major, selection order) followed by the calendar
/// dummies, one row per hour of `axis`.
pub fn assemble(
    field: &WindField,
    sel: &SubsetSelection,
    axis: &TimeAxis,
) -> Result<FeatureMatrix, FeatureError> {
    let offset = field.axis.offset_of(axis).ok_or(FeatureError::AxisMismatch)?;
    let n_wind = 6 * sel.len();
    let n_cols = n_wind + N_DUMMIES;

    let mut columns = Vec::with_capacity(n_cols);
    for var in WindVariable::ALL {
        for &point in &sel.indices {
            let (lon, lat) = field.grid.point(point);
            columns.push(ColumnDescriptor::Wind {
                var,
                point,
                lon,
                lat,
            });
        }
    }
    columns.extend(dummy_descriptors());

    let mut data = DenseMatrix::zeros(axis.len(), n_cols);
    for t in 0..axis.len() {
        let row = data.row_mut(t);
        let mut c = 0;
        for var in WindVariable::ALL {
            for &point in &sel.indices {
                row[c] = field.value(var, point, offset + t);
                c += 1;
            }
        }
        fill_dummies(&mut row[n_wind..], axis.timestamp(t));
    }

    Ok(FeatureMatrix {
        axis: *axis,
        columns,
        data,
    })
}

/// Per-column mean and value range recorded by [`fit_scaling`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnScaling {
    pub mean: f64,
    pub range: f64,
}

/// Scaling parameters for every column of a feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingParams {
    pub columns: Vec<ColumnScaling>,
}

/// A capacity-factor target scaled with the same rule, invertible back.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledTarget {
    pub values: Vec<f64>,
    pub params: ColumnScaling,
}

/// Fit per-column mean and range (max - min) over the given rows only.
pub fn fit_scaling(m: &FeatureMatrix, rows: &[usize]) -> ScalingParams {
    assert!(!rows.is_empty(), "scaling needs at least one row");
    let n_cols = m.n_cols();
    let mut sums = vec![0.0f64; n_cols];
    let mut mins = vec![f64::INFINITY; n_cols];
    let mut maxs = vec![f64::NEG_INFINITY; n_cols];
    for &r in rows {
        for (c, &v) in m.data.row(r).iter().enumerate() {
            sums[c] += v;
            mins[c] = mins[c].min(v);
            maxs[c] = maxs[c].max(v);
        }
    }
    let n = rows.len() as f64;
    ScalingParams {
        columns: (0..n_cols)
            .map(|c| ColumnScaling {
                mean: sums[c] / n,
                range: maxs[c] - mins[c],
            })
            .collect(),
    }
}

/// `(x - mean) / range` per column; zero-range columns map to 0 everywhere.
pub fn apply_scaling(m: &FeatureMatrix, params: &ScalingParams) -> Result<FeatureMatrix, FeatureError> {
    if params.columns.len() != m.n_cols() {
        return Err(FeatureError::ColumnCountMismatch {
            params: params.columns.len(),
            columns: m.n_cols(),
        });
    }
    let mut out = m.clone();
    for r in 0..out.n_rows() {
        let row = out.data.row_mut(r);
        for (v, p) in row.iter_mut().zip(&params.columns) {
            *v = if p.range == 0.0 {
                0.0
            } else {
                (*v - p.mean) / p.range
            };
        }
    }
    Ok(out)
}

/// Invert single-column range scaling: `v * range + mean`.
pub fn invert_scaling(values: &[f64], params: &ColumnScaling) -> Vec<f64> {
    values
        .iter()
        .map(|&v| v * params.range + params.mean)
        .collect()
}

/// Scale a target series with parameters fitted on `rows` only; the whole
/// series is returned scaled so prediction rows stay addressable.
pub fn scale_target(values: &[f64], rows: &[usize]) -> ScaledTarget {
    assert!(!rows.is_empty(), "target scaling needs at least one row");
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&r| values[r]).sum::<f64>() / n;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &r in rows {
        min = min.min(values[r]);
        max = max.max(values[r]);
    }
    let range = max - min;
    let params = ColumnScaling { mean, range };
    let values = values
        .iter()
        .map(|&v| if range == 0.0 { 0.0 } else { (v - mean) / range })
        .collect();
    ScaledTarget { values, params }
}
