//! Generation, capacity and plant-registry ingestion.
//!
//! Parses the three observational CSV formats, converts generation to
//! capacity factors by daily installed capacity, and owns the gapless
//! hourly [`TimeAxis`] every other module aligns to.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime, TimeZone, Timelike, Utc};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad header: expected `{expected}`, found `{found}`")]
    HeaderMismatch { expected: String, found: String },
    #[error("line {line}: malformed row ({reason})")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: negative value {value}")]
    NegativeValue { line: usize, value: f64 },
    #[error("non-contiguous time axis at line {line}: expected {expected}")]
    NonContiguousAxis { line: usize, expected: DateTime<Utc> },
    #[error("non-contiguous dates at line {line}: expected {expected}")]
    NonContiguousDates { line: usize, expected: NaiveDate },
    #[error("plant registry contains no records")]
    EmptyRegistry,
    #[error("no installed capacity recorded for {0}")]
    MissingCapacityDate(NaiveDate),
    #[error("installed capacity is not positive on {0}")]
    ZeroCapacity(NaiveDate),
    #[error("time axis must start on a whole hour and span at least one hour")]
    InvalidAxis,
}

/// A gapless hourly UTC time axis: a whole-hour start plus an hour count.
///
/// Hour `i` covers the instant `start + i hours`. Contiguity is by
/// construction; parsers reject inputs with gaps or duplicates instead of
/// repairing them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeAxis {
    start: DateTime<Utc>,
    n_hours: usize,
}

impl TimeAxis {
    pub fn new(start: DateTime<Utc>, n_hours: usize) -> Result<Self, IngestError> {
        if start.minute() != 0 || start.second() != 0 || start.nanosecond() != 0 || n_hours == 0 {
            return Err(IngestError::InvalidAxis);
        }
        Ok(Self { start, n_hours })
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn len(&self) -> usize {
        self.n_hours
    }

    pub fn is_empty(&self) -> bool {
        self.n_hours == 0
    }

    /// Timestamp of hour `idx`. Panics if out of range.
    pub fn timestamp(&self, idx: usize) -> DateTime<Utc> {
        assert!(idx < self.n_hours, "hour index {idx} out of range");
        self.start + Duration::hours(idx as i64)
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.timestamp(self.n_hours - 1)
    }

    /// Index of `ts` on this axis, or `None` if off-axis.
    pub fn index_of(&self, ts: DateTime<Utc>) -> Option<usize> {
        let delta = ts - self.start;
        if delta < Duration::zero() || delta != Duration::hours(delta.num_hours()) {
            return None;
        }
        let idx = delta.num_hours() as usize;
        (idx < self.n_hours).then_some(idx)
    }

    pub fn timestamps(&self) -> impl Iterator<Item = DateTime<Utc>> + '_ {
        (0..self.n_hours).map(|i| self.timestamp(i))
    }

    /// Row offset of `other` within `self` when `self` fully covers it.
    pub fn offset_of(&self, other: &TimeAxis) -> Option<usize> {
        let off = self.index_of(other.start)?;
        (off + other.n_hours <= self.n_hours).then_some(off)
    }
}

impl fmt::Display for TimeAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}..{} ({} hours)",
            format_hour(self.start),
            format_hour(self.end()),
            self.n_hours
        )
    }
}

/// Hourly electricity generation in MWh (numerically the mean MW over the hour).
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSeries {
    pub axis: TimeAxis,
    pub values: Vec<f64>,
}

/// Daily installed capacity in MW over a contiguous date range.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacitySeries {
    pub start_date: NaiveDate,
    pub values: Vec<f64>,
}

impl CapacitySeries {
    pub fn date(&self, idx: usize) -> NaiveDate {
        self.start_date + Duration::days(idx as i64)
    }

    /// Capacity on `date`, or `None` when the date is uncovered.
    pub fn on(&self, date: NaiveDate) -> Option<f64> {
        let off = (date - self.start_date).num_days();
        if off < 0 {
            return None;
        }
        self.values.get(off as usize).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plant {
    pub lon: f64,
    pub lat: f64,
    pub capacity_mw: f64,
}

/// Wind plant locations and installed capacities.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantRegistry {
    pub plants: Vec<Plant>,
}

impl PlantRegistry {
    pub fn new(plants: Vec<Plant>) -> Result<Self, IngestError> {
        if plants.is_empty() {
            return Err(IngestError::EmptyRegistry);
        }
        Ok(Self { plants })
    }

    pub fn len(&self) -> usize {
        self.plants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plants.is_empty()
    }

    pub fn total_capacity_mw(&self) -> f64 {
        self.plants.iter().map(|p| p.capacity_mw).sum()
    }
}

/// Hourly generation relative to installed capacity (dimensionless).
///
/// Observed series lie in `[0, 1]`; modelled series may stray slightly
/// negative, which is flagged via [`CapacityFactorSeries::negative_count`]
/// rather than rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityFactorSeries {
    pub axis: TimeAxis,
    pub values: Vec<f64>,
}

impl CapacityFactorSeries {
    pub fn new(axis: TimeAxis, values: Vec<f64>) -> Self {
        assert_eq!(axis.len(), values.len(), "axis/value length mismatch");
        Self { axis, values }
    }

    pub fn negative_count(&self) -> usize {
        self.values.iter().filter(|v| **v < 0.0).count()
    }
}

pub const GENERATION_HEADER: &str = "timestamp,generation_mwh";
pub const CAPACITY_HEADER: &str = "date,capacity_mw";
pub const PLANTS_HEADER: &str = "lon,lat,capacity_mw";
pub const CF_HEADER: &str = "timestamp,cf";

/// Parse a whole-hour UTC timestamp of the form `YYYY-MM-DDTHH:00Z`.
pub fn parse_hour_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let naive = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%MZ").ok()?;
    if naive.minute() != 0 {
        return None;
    }
    Some(Utc.from_utc_datetime(&naive))
}

pub fn format_hour(ts: DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:00Z").to_string()
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = std::io::Result<String>>, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(BufReader::new(file).lines())
}

fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn check_header(found: Option<std::io::Result<String>>, expected: &str, path: &Path) -> Result<(), IngestError> {
    let found = match found {
        None => String::new(),
        Some(line) => line.map_err(|e| io_err(path, e))?,
    };
    let found = found.trim_end_matches('\r');
    if found != expected {
        return Err(IngestError::HeaderMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}

fn parse_value(field: &str, line: usize) -> Result<f64, IngestError> {
    let value: f64 = field.parse().map_err(|_| IngestError::MalformedRow {
        line,
        reason: format!("`{field}` is not a number"),
    })?;
    if !value.is_finite() {
        return Err(IngestError::MalformedRow {
            line,
            reason: format!("`{field}` is not finite"),
        });
    }
    Ok(value)
}

/// Read an hourly timestamped value series with strict axis validation.
/// Shared by the generation and capacity-factor readers.
fn parse_hourly_csv(
    path: &Path,
    header: &str,
    reject_negative: bool,
) -> Result<(TimeAxis, Vec<f64>), IngestError> {
    let mut lines = open_lines(path)?;
    check_header(lines.next(), header, path)?;

    let mut start: Option<DateTime<Utc>> = None;
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|e| io_err(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            return Err(IngestError::MalformedRow {
                line: line_no,
                reason: "empty line".into(),
            });
        }
        let mut fields = line.split(',');
        let (ts_field, value_field) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(IngestError::MalformedRow {
                    line: line_no,
                    reason: "expected exactly 2 fields".into(),
                })
            }
        };
        let ts = parse_hour_timestamp(ts_field).ok_or_else(|| IngestError::MalformedRow {
            line: line_no,
            reason: format!("`{ts_field}` is not a whole-hour UTC timestamp"),
        })?;
        match start {
            None => start = Some(ts),
            Some(s) => {
                let expected = s + Duration::hours(values.len() as i64);
                if ts != expected {
                    return Err(IngestError::NonContiguousAxis {
                        line: line_no,
                        expected,
                    });
                }
            }
        }
        let value = parse_value(value_field, line_no)?;
        if reject_negative && value < 0.0 {
            return Err(IngestError::NegativeValue {
                line: line_no,
                value,
            });
        }
        values.push(value);
    }

    let start = start.ok_or(IngestError::InvalidAxis)?;
    let axis = TimeAxis::new(start, values.len())?;
    Ok((axis, values))
}

/// Parse the `timestamp,generation_mwh` format into a validated series.
pub fn parse_generation_csv(path: impl AsRef<Path>) -> Result<GenerationSeries, IngestError> {
    let (axis, values) = parse_hourly_csv(path.as_ref(), GENERATION_HEADER, true)?;
    Ok(GenerationSeries { axis, values })
}

/// Parse a `timestamp,cf` series (predictions may be negative, so no sign check).
pub fn parse_cf_csv(path: impl AsRef<Path>) -> Result<CapacityFactorSeries, IngestError> {
    let (axis, values) = parse_hourly_csv(path.as_ref(), CF_HEADER, false)?;
    Ok(CapacityFactorSeries { axis, values })
}

/// Parse the `date,capacity_mw` format into contiguous daily capacities.
pub fn parse_capacity_csv(path: impl AsRef<Path>) -> Result<CapacitySeries, IngestError> {
    let path = path.as_ref();
    let mut lines = open_lines(path)?;
    check_header(lines.next(), CAPACITY_HEADER, path)?;

    let mut start_date: Option<NaiveDate> = None;
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|e| io_err(path, e))?;
        let line = line.trim_end_matches('\r');
        let mut fields = line.split(',');
        let (date_field, value_field) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(IngestError::MalformedRow {
                    line: line_no,
                    reason: "expected exactly 2 fields".into(),
                })
            }
        };
        let date = NaiveDate::parse_from_str(date_field, "%Y-%m-%d").map_err(|_| {
            IngestError::MalformedRow {
                line: line_no,
                reason: format!("`{date_field}` is not a YYYY-MM-DD date"),
            }
        })?;
        match start_date {
            None => start_date = Some(date),
            Some(s) => {
                let expected = s + Duration::days(values.len() as i64);
                if date != expected {
                    return Err(IngestError::NonContiguousDates {
                        line: line_no,
                        expected,
                    });
                }
            }
        }
        let value = parse_value(value_field, line_no)?;
        if value < 0.0 {
            return Err(IngestError::MalformedRow {
                line: line_no,
                reason: format!("negative capacity {value}"),
            });
        }
        values.push(value);
    }

    let start_date = start_date.ok_or(IngestError::InvalidAxis)?;
    Ok(CapacitySeries { start_date, values })
}

/// Parse the `lon,lat,capacity_mw` plant registry.
pub fn parse_plants_csv(path: impl AsRef<Path>) -> Result<PlantRegistry, IngestError> {
    let path = path.as_ref();
    let mut lines = open_lines(path)?;
    check_header(lines.next(), PLANTS_HEADER, path)?;

    let mut plants = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|e| io_err(path, e))?;
        let line = line.trim_end_matches('\r');
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(IngestError::MalformedRow {
                line: line_no,
                reason: "expected exactly 3 fields".into(),
            });
        }
        let lon = parse_value(fields[0], line_no)?;
        let lat = parse_value(fields[1], line_no)?;
        let capacity_mw = parse_value(fields[2], line_no)?;
        if capacity_mw <= 0.0 {
            return Err(IngestError::MalformedRow {
                line: line_no,
                reason: format!("plant capacity must be positive, got {capacity_mw}"),
            });
        }
        plants.push(Plant {
            lon,
            lat,
            capacity_mw,
        });
    }
    PlantRegistry::new(plants)
}

/// Convert hourly generation to capacity factors by that day's installed capacity.
///
/// `value[t] = gen[t] / cap[date(t)]`; the axis is preserved unchanged.
pub fn to_capacity_factors(
    gen: &GenerationSeries,
    cap: &CapacitySeries,
) -> Result<CapacityFactorSeries, IngestError> {
    let mut values = Vec::with_capacity(gen.values.len());
    for (idx, &g) in gen.values.iter().enumerate() {
        let date = gen.axis.timestamp(idx).date_naive();
        let c = cap
            .on(date)
            .ok_or(IngestError::MissingCapacityDate(date))?;
        if c <= 0.0 {
            return Err(IngestError::ZeroCapacity(date));
        }
        values.push(g / c);
    }
    Ok(CapacityFactorSeries {
        axis: gen.axis,
        values,
    })
}

pub fn write_generation_csv(
    path: impl AsRef<Path>,
    series: &GenerationSeries,
) -> Result<(), IngestError> {
    write_hourly_csv(path.as_ref(), GENERATION_HEADER, &series.axis, &series.values)
}

pub fn write_cf_csv(
    path: impl AsRef<Path>,
    series: &CapacityFactorSeries,
) -> Result<(), IngestError> {
    write_hourly_csv(path.as_ref(), CF_HEADER, &series.axis, &series.values)
}

fn write_hourly_csv(
    path: &Path,
    header: &str,
    axis: &TimeAxis,
    values: &[f64],
) -> Result<(), IngestError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        for (i, v) in values.iter().enumerate() {
            writeln!(w, "{},{}", format_hour(axis.timestamp(i)), v)?;
        }
        w.flush()
    };
    emit().map_err(|e| io_err(path, e))
}

pub fn write_capacity_csv(
    path: impl AsRef<Path>,
    series: &CapacitySeries,
) -> Result<(), IngestError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "{CAPACITY_HEADER}")?;
        for (i, v) in series.values.iter().enumerate() {
            writeln!(w, "{},{}", series.date(i).format("%Y-%m-%d"), v)?;
        }
        w.flush()
    };
    emit().map_err(|e| io_err(path, e))
}

pub fn write_plants_csv(
    path: impl AsRef<Path>,
    registry: &PlantRegistry,
) -> Result<(), IngestError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "{PLANTS_HEADER}")?;
        for p in &registry.plants {
            writeln!(w, "{},{},{}", p.lon, p.lat, p.capacity_mw)?;
        }
        w.flush()
    };
    emit().map_err(|e| io_err(path, e))
}
