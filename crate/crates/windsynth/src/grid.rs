//! Regular lon/lat grid geometry, hourly wind-component fields, and the
//! three grid-point subsetting strategies.
//!
//! Grid points are indexed row-major: `idx = j * nlon + i` where `i` runs
//! over longitudes and `j` over latitudes, so index lists are canonically
//! ordered by ascending latitude, then longitude.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use thiserror::Error;

use crate::ingest::{self, PlantRegistry, TimeAxis};
use crate::quality;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid bounding box: {0}")]
    InvalidBbox(String),
    #[error("{axis} span {span} is not an integer multiple of spacing {spacing}")]
    NonConformingSpan {
        axis: &'static str,
        span: f64,
        spacing: f64,
    },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: malformed row ({reason})")]
    MalformedRow { line: usize, reason: String },
    #[error("non-contiguous time axis at line {line}: expected {expected}")]
    NonContiguousAxis { line: usize, expected: DateTime<Utc> },
    #[error("selection is empty: fewer than two grid points carry distinct capacity")]
    EmptySelection,
}

/// A regular longitude/latitude grid.
///
/// `point(i, j) = (lon0 + i*dlon, lat0 + j*dlat)` with row-major index
/// `j * nlon + i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lon0: f64,
    pub lat0: f64,
    pub dlon: f64,
    pub dlat: f64,
    pub nlon: usize,
    pub nlat: usize,
}

fn steps_in_span(span: f64, spacing: f64, axis: &'static str) -> Result<usize, GridError> {
    let ratio = span / spacing;
    let rounded = ratio.round();
    if (ratio - rounded).abs() > 1e-9 {
        return Err(GridError::NonConformingSpan {
            axis,
            span,
            spacing,
        });
    }
    Ok(rounded as usize)
}

impl GridSpec {
    /// Build the grid covering a bounding box with the given spacings.
    /// Both spans must be integer multiples of their spacing (within 1e-9).
    pub fn from_bbox(
        lon_min: f64,
        lon_max: f64,
        lat_min: f64,
        lat_max: f64,
        dlon: f64,
        dlat: f64,
    ) -> Result<Self, GridError> {
        if !(lon_min <= lon_max && lat_min <= lat_max) {
            return Err(GridError::InvalidBbox(format!(
                "min must not exceed max: lon {lon_min}..{lon_max}, lat {lat_min}..{lat_max}"
            )));
        }
        if dlon <= 0.0 || dlat <= 0.0 {
            return Err(GridError::InvalidBbox(format!(
                "spacings must be positive: dlon {dlon}, dlat {dlat}"
            )));
        }
        let nlon = steps_in_span(lon_max - lon_min, dlon, "longitude")? + 1;
        let nlat = steps_in_span(lat_max - lat_min, dlat, "latitude")? + 1;
        Ok(GridSpec {
            lon0: lon_min,
            lat0: lat_min,
            dlon,
            dlat,
            nlon,
            nlat,
        })
    }

    pub fn n_points(&self) -> usize {
        self.nlon * self.nlat
    }

    /// (lon, lat) of the row-major point index.
    pub fn point(&self, idx: usize) -> (f64, f64) {
        assert!(idx < self.n_points(), "grid index {idx} out of range");
        let i = idx % self.nlon;
        let j = idx / self.nlon;
        (
            self.lon0 + i as f64 * self.dlon,
            self.lat0 + j as f64 * self.dlat,
        )
    }

    pub fn lon_max(&self) -> f64 {
        self.lon0 + (self.nlon - 1) as f64 * self.dlon
    }

    pub fn lat_max(&self) -> f64 {
        self.lat0 + (self.nlat - 1) as f64 * self.dlat
    }
}

/// The six reanalysis wind-speed components, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindVariable {
    U2M,
    V2M,
    U10M,
    V10M,
    U50M,
    V50M,
}

impl WindVariable {
    pub const ALL: [WindVariable; 6] = [
        WindVariable::U2M,
        WindVariable::V2M,
        WindVariable::U10M,
        WindVariable::V10M,
        WindVariable::U50M,
        WindVariable::V50M,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            WindVariable::U2M => "U2M",
            WindVariable::V2M => "V2M",
            WindVariable::U10M => "U10M",
            WindVariable::V10M => "V10M",
            WindVariable::U50M => "U50M",
            WindVariable::V50M => "V50M",
        }
    }

    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|v| v == self).unwrap()
    }
}

/// Column name for one (variable, grid point) pair in the wind CSV.
pub fn wind_column_name(var: WindVariable, lon: f64, lat: f64) -> String {
    format!("{}_{:.3}_{:.3}", var.name(), lon, lat)
}

/// Complete (variable x grid point x hour) wind-component tensor in m/s.
#[derive(Debug, Clone, PartialEq)]
pub struct WindField {
    pub grid: GridSpec,
    pub axis: TimeAxis,
    data: Vec<f64>, // layout: [hour][variable][point]
}

impl WindField {
    pub fn new(grid: GridSpec, axis: TimeAxis, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            axis.len() * 6 * grid.n_points(),
            "wind tensor size mismatch"
        );
        Self { grid, axis, data }
    }

    pub fn value(&self, var: WindVariable, point: usize, hour: usize) -> f64 {
        let np = self.grid.n_points();
        debug_assert!(point < np && hour < self.axis.len());
        self.data[(hour * 6 + var.index()) * np + point]
    }

    /// All six variables at `(point, hour)`, in canonical variable order.
    pub fn components(&self, point: usize, hour: usize) -> [f64; 6] {
        let np = self.grid.n_points();
        let base = hour * 6 * np + point;
        [
            self.data[base],
            self.data[base + np],
            self.data[base + 2 * np],
            self.data[base + 3 * np],
            self.data[base + 4 * np],
            self.data[base + 5 * np],
        ]
    }

    /// Horizontal speed magnitude at 10 m and 50 m for `(point, hour)`.
    pub fn speeds_10_50(&self, point: usize, hour: usize) -> (f64, f64) {
        let c = self.components(point, hour);
        let v10 = (c[2] * c[2] + c[3] * c[3]).sqrt();
        let v50 = (c[4] * c[4] + c[5] * c[5]).sqrt();
        (v10, v50)
    }

    pub fn n_values(&self) -> usize {
        self.data.len()
    }
}

fn expected_header(grid: &GridSpec) -> Vec<String> {
    let mut names = Vec::with_capacity(1 + 6 * grid.n_points());
    names.push("timestamp".to_string());
    for var in WindVariable::ALL {
        for idx in 0..grid.n_points() {
            let (lon, lat) = grid.point(idx);
            names.push(wind_column_name(var, lon, lat));
        }
    }
    names
}

fn io_err(path: &Path, source: std::io::Error) -> GridError {
    GridError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Load a wind CSV against a known grid. The header must enumerate all
/// `6 * nlon * nlat` data columns variable-major, grid points row-major.
pub fn load_wind_csv(path: impl AsRef<Path>, grid: &GridSpec) -> Result<WindField, GridError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut lines = BufReader::new(file).lines();

    let header = match lines.next() {
        Some(line) => line.map_err(|e| io_err(path, e))?,
        None => return Err(GridError::MissingColumn("timestamp".into())),
    };
    let found: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    let expected = expected_header(grid);
    for (pos, want) in expected.iter().enumerate() {
        match found.get(pos) {
            Some(got) if *got == want => {}
            _ => return Err(GridError::MissingColumn(want.clone())),
        }
    }
    if found.len() > expected.len() {
        return Err(GridError::MalformedRow {
            line: 1,
            reason: format!(
                "header has {} columns, expected {}",
                found.len(),
                expected.len()
            ),
        });
    }

    let n_cols = 6 * grid.n_points();
    let mut start: Option<DateTime<Utc>> = None;
    let mut n_rows = 0usize;
    let mut data: Vec<f64> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|e| io_err(path, e))?;
        let line = line.trim_end_matches('\r');
        let mut fields = line.split(',');
        let ts_field = fields.next().unwrap_or("");
        let ts = ingest::parse_hour_timestamp(ts_field).ok_or_else(|| GridError::MalformedRow {
            line: line_no,
            reason: format!("`{ts_field}` is not a whole-hour UTC timestamp"),
        })?;
        match start {
            None => start = Some(ts),
            Some(s) => {
                let expected = s + Duration::hours(n_rows as i64);
                if ts != expected {
                    return Err(GridError::NonContiguousAxis {
                        line: line_no,
                        expected,
                    });
                }
            }
        }
        let mut count = 0usize;
        for field in fields {
            let value: f64 = field.parse().map_err(|_| GridError::MalformedRow {
                line: line_no,
                reason: format!("`{field}` is not a number"),
            })?;
            if !value.is_finite() {
                return Err(GridError::MalformedRow {
                    line: line_no,
                    reason: format!("`{field}` is not finite"),
                });
            }
            data.push(value);
            count += 1;
        }
        if count != n_cols {
            return Err(GridError::MalformedRow {
                line: line_no,
                reason: format!("expected {n_cols} data values, found {count}"),
            });
        }
        n_rows += 1;
    }

    let start = start.ok_or_else(|| GridError::MalformedRow {
        line: 2,
        reason: "file contains no data rows".into(),
    })?;
    let axis = TimeAxis::new(start, n_rows).map_err(|_| GridError::MalformedRow {
        line: 2,
        reason: "invalid time axis".into(),
    })?;
    Ok(WindField::new(*grid, axis, data))
}

/// Reconstruct the grid from a wind CSV header alone.
///
/// Degenerate axes (a single longitude or latitude) fall back to the
/// 0.625 / 0.5 degree spacing convention since no spacing is observable.
pub fn sniff_wind_csv_grid(path: impl AsRef<Path>) -> Result<GridSpec, GridError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| io_err(path, e))?,
        None => return Err(GridError::MissingColumn("timestamp".into())),
    };
    let found: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    if found.first() != Some(&"timestamp") {
        return Err(GridError::MissingColumn("timestamp".into()));
    }
    let data_cols = &found[1..];
    if data_cols.is_empty() || data_cols.len() % 6 != 0 {
        return Err(GridError::MalformedRow {
            line: 1,
            reason: format!("{} data columns is not a multiple of 6", data_cols.len()),
        });
    }
    let np = data_cols.len() / 6;
    // decode (lon, lat) from the first variable block
    let mut lons = Vec::with_capacity(np);
    let mut lats = Vec::with_capacity(np);
    for name in &data_cols[..np] {
        let parts: Vec<&str> = name.split('_').collect();
        let (lon, lat) = match parts.as_slice() {
            [var, lon, lat] if *var == "U2M" => (
                lon.parse::<f64>().ok(),
                lat.parse::<f64>().ok(),
            ),
            _ => (None, None),
        };
        match (lon, lat) {
            (Some(lon), Some(lat)) => {
                lons.push(lon);
                lats.push(lat);
            }
            _ => return Err(GridError::MissingColumn((*name).to_string())),
        }
    }
    let nlon = lats.iter().take_while(|&&lat| lat == lats[0]).count();
    if nlon == 0 || np % nlon != 0 {
        return Err(GridError::MalformedRow {
            line: 1,
            reason: "columns do not form a regular row-major grid".into(),
        });
    }
    let nlat = np / nlon;
    let dlon = if nlon > 1 { lons[1] - lons[0] } else { 0.625 };
    let dlat = if nlat > 1 { lats[nlon] - lats[0] } else { 0.5 };
    if dlon <= 0.0 || dlat <= 0.0 {
        return Err(GridError::MalformedRow {
            line: 1,
            reason: "grid spacings decoded from header are not positive".into(),
        });
    }
    let grid = GridSpec {
        lon0: lons[0],
        lat0: lats[0],
        dlon,
        dlat,
        nlon,
        nlat,
    };
    // full header must match the canonical enumeration of the decoded grid
    let expected = expected_header(&grid);
    for (pos, want) in expected.iter().enumerate() {
        match found.get(pos) {
            Some(got) if *got == want => {}
            _ => return Err(GridError::MissingColumn(want.clone())),
        }
    }
    Ok(grid)
}

/// Write a wind field in the canonical wide CSV format.
pub fn write_wind_csv(path: impl AsRef<Path>, field: &WindField) -> Result<(), GridError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "{}", expected_header(&field.grid).join(","))?;
        let np = field.grid.n_points();
        for hour in 0..field.axis.len() {
            write!(w, "{}", ingest::format_hour(field.axis.timestamp(hour)))?;
            for var in WindVariable::ALL {
                for point in 0..np {
                    write!(w, ",{}", field.value(var, point, hour))?;
                }
            }
            writeln!(w)?;
        }
        w.flush()
    };
    emit().map_err(|e| io_err(path, e))
}

/// How a grid-point subset was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionStrategy {
    All,
    KNearest,
    CapacityQuartile,
}

impl SelectionStrategy {
    pub fn label(&self) -> &'static str {
        match self {
            SelectionStrategy::All => "all",
            SelectionStrategy::KNearest => "k_nearest",
            SelectionStrategy::CapacityQuartile => "capacity_quartile",
        }
    }
}

/// An ordered, duplicate-free list of grid-point indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetSelection {
    pub strategy: SelectionStrategy,
    pub indices: Vec<usize>,
}

impl SubsetSelection {
    pub fn new(strategy: SelectionStrategy, indices: Vec<usize>, grid: &GridSpec) -> Self {
        assert!(!indices.is_empty(), "selection must be nonempty");
        assert!(
            indices.windows(2).all(|w| w[0] < w[1]),
            "selection indices must be strictly increasing"
        );
        assert!(
            *indices.last().unwrap() < grid.n_points(),
            "selection index out of grid bounds"
        );
        Self { strategy, indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Great-circle distance in kilometres between two (lon, lat) points.
pub fn haversine_km(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
    const EARTH_RADIUS_KM: f64 = 6371.0088;
    let (lat1r, lat2r) = (lat1.to_radians(), lat2.to_radians());
    let dlat = (lat2 - lat1).to_radians();
    let dlon = (lon2 - lon1).to_radians();
    let a = (dlat / 2.0).sin().powi(2) + lat1r.cos() * lat2r.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().asin()
}

/// Every grid point: no subsetting.
pub fn select_all(grid: &GridSpec) -> SubsetSelection {
    SubsetSelection::new(
        SelectionStrategy::All,
        (0..grid.n_points()).collect(),
        grid,
    )
}

/// Union over plants of each plant's `k` nearest grid points by
/// great-circle distance, deduplicated and canonically ordered. Ties break
/// toward the smaller row-major index; `k` larger than the grid clamps.
pub fn select_k_nearest(grid: &GridSpec, plants: &PlantRegistry, k: usize) -> SubsetSelection {
    assert!(k >= 1, "k must be at least 1");
    assert!(!plants.is_empty(), "plant registry must be nonempty");
    let np = grid.n_points();
    let k = k.min(np);
    let mut selected = vec![false; np];
    let mut ranked: Vec<(f64, usize)> = Vec::with_capacity(np);
    for plant in &plants.plants {
        ranked.clear();
        for idx in 0..np {
            let (lon, lat) = grid.point(idx);
            ranked.push((haversine_km(plant.lon, plant.lat, lon, lat), idx));
        }
        ranked.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, idx) in ranked.iter().take(k) {
            selected[idx] = true;
        }
    }
    let indices: Vec<usize> = (0..np).filter(|&i| selected[i]).collect();
    SubsetSelection::new(SelectionStrategy::KNearest, indices, grid)
}

/// Nearest grid point to a location, ties toward the smaller index.
pub fn nearest_point(grid: &GridSpec, lon: f64, lat: f64) -> usize {
    let mut best = (f64::INFINITY, 0usize);
    for idx in 0..grid.n_points() {
        let (plon, plat) = grid.point(idx);
        let d = haversine_km(lon, lat, plon, plat);
        if d < best.0 {
            best = (d, idx);
        }
    }
    best.1
}

/// Grid points whose assigned capacity lies strictly above the third
/// quartile of all capacity-bearing points. Each plant feeds exactly its
/// nearest grid point.
pub fn select_capacity_quartile(
    grid: &GridSpec,
    plants: &PlantRegistry,
) -> Result<SubsetSelection, GridError> {
    assert!(!plants.is_empty(), "plant registry must be nonempty");
    let np = grid.n_points();
    let mut capacity = vec![0.0f64; np];
    for plant in &plants.plants {
        capacity[nearest_point(grid, plant.lon, plant.lat)] += plant.capacity_mw;
    }
    let bearing: Vec<f64> = capacity.iter().copied().filter(|&c| c > 0.0).collect();
    if bearing.len() < 2 {
        return Err(GridError::EmptySelection);
    }
    let q3 = quality::quantiles(&bearing, &[0.75])[0];
    let indices: Vec<usize> = (0..np).filter(|&i| capacity[i] > q3).collect();
    if indices.is_empty() {
        return Err(GridError::EmptySelection);
    }
    Ok(SubsetSelection::new(
        SelectionStrategy::CapacityQuartile,
        indices,
        grid,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Plant;
    use chrono::TimeZone;

    fn germany_grid() -> GridSpec {
        GridSpec::from_bbox(5.0, 15.625, 46.0, 56.0, 0.625, 0.5).unwrap()
    }

    #[test]
    fn bounding_box_yields_378_points() {
        let grid = germany_grid();
        assert_eq!(grid.nlon, 18);
        assert_eq!(grid.nlat, 21);
        assert_eq!(grid.n_points(), 378);
    }

    #[test]
    fn degenerate_box_is_one_point() {
        let grid = GridSpec::from_bbox(5.0, 5.0, 46.0, 46.0, 0.625, 0.5).unwrap();
        assert_eq!(grid.n_points(), 1);
        assert_eq!(grid.point(0), (5.0, 46.0));
    }

    #[test]
    fn non_conforming_span_rejected() {
        assert!(matches!(
            GridSpec::from_bbox(5.0, 15.7, 46.0, 56.0, 0.625, 0.5),
            Err(GridError::NonConformingSpan { .. })
        ));
    }

    #[test]
    fn inverted_box_rejected() {
        assert!(matches!(
            GridSpec::from_bbox(6.0, 5.0, 46.0, 56.0, 0.625, 0.5),
            Err(GridError::InvalidBbox(_))
        ));
    }

    #[test]
    fn row_major_point_layout() {
        let grid = GridSpec::from_bbox(0.0, 2.0, 10.0, 11.0, 1.0, 1.0).unwrap();
        assert_eq!(grid.n_points(), 6);
        assert_eq!(grid.point(0), (0.0, 10.0));
        assert_eq!(grid.point(1), (1.0, 10.0));
        assert_eq!(grid.point(3), (0.0, 11.0));
        assert_eq!(grid.point(5), (2.0, 11.0));
    }

    fn synthetic_wind_csv(grid: &GridSpec, hours: usize) -> String {
        let mut header = vec!["timestamp".to_string()];
        for var in WindVariable::ALL {
            for idx in 0..grid.n_points() {
                let (lon, lat) = grid.point(idx);
                header.push(wind_column_name(var, lon, lat));
            }
        }
        let mut out = header.join(",");
        out.push('\n');
        let start = Utc.with_ymd_and_hms(2010, 1, 1, 0, 0, 0).unwrap();
        for h in 0..hours {
            out.push_str(&ingest::format_hour(start + Duration::hours(h as i64)));
            for c in 0..6 * grid.n_points() {
                out.push_str(&format!(",{}", (h * 1000 + c) as f64 * 0.01));
            }
            out.push('\n');
        }
        out
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write as _;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn one_point_two_hour_file_loads() {
        let grid = GridSpec::from_bbox(5.0, 5.0, 46.0, 46.0, 0.625, 0.5).unwrap();
        let f = write_temp(&synthetic_wind_csv(&grid, 2));
        let field = load_wind_csv(f.path(), &grid).unwrap();
        assert_eq!(field.n_values(), 12);
        assert_eq!(field.axis.len(), 2);
        // first value of hour 1 is column index 0 at row 1
        assert_eq!(field.value(WindVariable::U2M, 0, 1), 10.0);
        assert_eq!(field.value(WindVariable::V50M, 0, 0), 0.05);
    }

    #[test]
    fn missing_column_is_reported_by_name() {
        let grid = GridSpec::from_bbox(5.0, 5.0, 46.0, 46.0, 0.625, 0.5).unwrap();
        let content = synthetic_wind_csv(&grid, 1);
        let content = content.replacen("V50M_5.000_46.000", "V50M_5.000_46.500", 1);
        let f = write_temp(&content);
        match load_wind_csv(f.path(), &grid).unwrap_err() {
            GridError::MissingColumn(name) => assert_eq!(name, "V50M_5.000_46.000"),
            other => panic!("expected MissingColumn, got {other:?}"),
        }
    }

    #[test]
    fn full_grid_24_hours_has_54432_values() {
        let grid = germany_grid();
        let f = write_temp(&synthetic_wind_csv(&grid, 24));
        let field = load_wind_csv(f.path(), &grid).unwrap();
        assert_eq!(field.n_values(), 6 * 378 * 24);
        assert_eq!(field.n_values(), 54_432);
    }

    #[test]
    fn wind_gap_detected() {
        let grid = GridSpec::from_bbox(5.0, 5.0, 46.0, 46.0, 0.625, 0.5).unwrap();
        let mut content = synthetic_wind_csv(&grid, 3);
        // drop the middle row
        let lines: Vec<&str> = content.lines().collect();
        content = format!("{}\n{}\n{}\n", lines[0], lines[1], lines[3]);
        let f = write_temp(&content);
        assert!(matches!(
            load_wind_csv(f.path(), &grid),
            Err(GridError::NonContiguousAxis { line: 3, .. })
        ));
    }

    #[test]
    fn wind_csv_round_trip_and_sniff() {
        let grid = GridSpec::from_bbox(5.0, 6.25, 46.0, 47.0, 0.625, 0.5).unwrap();
        let f = write_temp(&synthetic_wind_csv(&grid, 4));
        let sniffed = sniff_wind_csv_grid(f.path()).unwrap();
        assert_eq!(sniffed, grid);
        let field = load_wind_csv(f.path(), &grid).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wind.csv");
        write_wind_csv(&path, &field).unwrap();
        let back = load_wind_csv(&path, &grid).unwrap();
        assert_eq!(back, field);
    }

    #[test]
    fn select_all_counts() {
        assert_eq!(select_all(&germany_grid()).len(), 378);
        let one = GridSpec::from_bbox(5.0, 5.0, 46.0, 46.0, 0.625, 0.5).unwrap();
        assert_eq!(select_all(&one).indices, vec![0]);
        let four = GridSpec::from_bbox(0.0, 1.0, 0.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(select_all(&four).indices, vec![0, 1, 2, 3]);
    }

    fn registry(plants: Vec<Plant>) -> PlantRegistry {
        PlantRegistry::new(plants).unwrap()
    }

    #[test]
    fn plant_inside_cell_selects_four_corners() {
        let grid = GridSpec::from_bbox(5.0, 6.875, 46.0, 47.5, 0.625, 0.5).unwrap(); // 4x4
        let plant = Plant {
            lon: 5.9,
            lat: 46.7,
            capacity_mw: 1.0,
        };
        let sel = select_k_nearest(&grid, &registry(vec![plant]), 4);
        // enclosing cell corners: lons {5.625, 6.25}, lats {46.5, 47.0}
        assert_eq!(sel.indices, vec![4 + 1, 4 + 2, 8 + 1, 8 + 2]);
    }

    #[test]
    fn two_plants_in_one_cell_deduplicate() {
        let grid = GridSpec::from_bbox(5.0, 6.875, 46.0, 47.5, 0.625, 0.5).unwrap();
        let plants = registry(vec![
            Plant {
                lon: 5.9,
                lat: 46.7,
                capacity_mw: 1.0,
            },
            Plant {
                lon: 5.95,
                lat: 46.72,
                capacity_mw: 2.0,
            },
        ]);
        let sel = select_k_nearest(&grid, &plants, 4);
        assert_eq!(sel.len(), 4);
    }

    #[test]
    fn k_nearest_matches_brute_force_ranking() {
        // independent oracle: rank all points by its own distance formula
        use rand::{Rng, SeedableRng};
        fn oracle_distance(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
            let r = 6371.0088;
            let p1 = lat1.to_radians();
            let p2 = lat2.to_radians();
            let dl = (lon2 - lon1).to_radians();
            // spherical law of cosines; agrees with haversine away from antipodes
            (p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos())
                .clamp(-1.0, 1.0)
                .acos()
                * r
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let nlon = 2 + (rng.gen::<u32>() % 6) as usize;
            let nlat = 2 + (rng.gen::<u32>() % 6) as usize;
            let grid = GridSpec {
                lon0: 5.0,
                lat0: 46.0,
                dlon: 0.625,
                dlat: 0.5,
                nlon,
                nlat,
            };
            let plant = Plant {
                lon: 5.0 + rng.gen::<f64>() * (nlon - 1) as f64 * 0.625,
                lat: 46.0 + rng.gen::<f64>() * (nlat - 1) as f64 * 0.5,
                capacity_mw: 1.0,
            };
            let k = 1 + (rng.gen::<u32>() % 5) as usize;
            let sel = select_k_nearest(&grid, &registry(vec![plant]), k);
            let mut ranked: Vec<(f64, usize)> = (0..grid.n_points())
                .map(|i| {
                    let (lon, lat) = grid.point(i);
                    (oracle_distance(plant.lon, plant.lat, lon, lat), i)
                })
                .collect();
            ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut expected: Vec<usize> = ranked
                .iter()
                .take(k.min(grid.n_points()))
                .map(|&(_, i)| i)
                .collect();
            expected.sort_unstable();
            assert_eq!(sel.indices, expected, "k={k} grid {nlon}x{nlat}");
        }
    }

    #[test]
    fn k_nearest_invariant_to_plant_order_and_duplicates() {
        let grid = germany_grid();
        let a = Plant {
            lon: 9.2,
            lat: 52.3,
            capacity_mw: 1.0,
        };
        let b = Plant {
            lon: 12.8,
            lat: 48.9,
            capacity_mw: 2.0,
        };
        let sel1 = select_k_nearest(&grid, &registry(vec![a, b]), 4);
        let sel2 = select_k_nearest(&grid, &registry(vec![b, a, b, a, a]), 4);
        assert_eq!(sel1.indices, sel2.indices);
        assert!(sel1.len() <= 4 * 2);
    }

    #[test]
    fn k_larger_than_grid_clamps() {
        let grid = GridSpec::from_bbox(0.0, 1.0, 0.0, 1.0, 1.0, 1.0).unwrap();
        let sel = select_k_nearest(
            &grid,
            &registry(vec![Plant {
                lon: 0.5,
                lat: 0.5,
                capacity_mw: 1.0,
            }]),
            100,
        );
        assert_eq!(sel.indices, vec![0, 1, 2, 3]);
    }

    #[test]
    fn capacity_quartile_keeps_strictly_above_q3() {
        // four capacity-bearing points [1,2,3,4] -> Q3 = 3.25 -> keep only 4
        let grid = GridSpec::from_bbox(0.0, 3.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        let plants = registry(vec![
            Plant {
                lon: 0.0,
                lat: 0.0,
                capacity_mw: 1.0,
            },
            Plant {
                lon: 1.0,
                lat: 0.0,
                capacity_mw: 2.0,
            },
            Plant {
                lon: 2.0,
                lat: 0.0,
                capacity_mw: 3.0,
            },
            Plant {
                lon: 3.0,
                lat: 0.0,
                capacity_mw: 4.0,
            },
        ]);
        let sel = select_capacity_quartile(&grid, &plants).unwrap();
        assert_eq!(sel.indices, vec![3]);
    }

    #[test]
    fn capacity_quartile_all_on_one_point_is_empty() {
        let grid = germany_grid();
        let plants = registry(vec![
            Plant {
                lon: 9.0,
                lat: 50.0,
                capacity_mw: 3.0,
            },
            Plant {
                lon: 9.01,
                lat: 50.01,
                capacity_mw: 5.0,
            },
        ]);
        assert!(matches!(
            select_capacity_quartile(&grid, &plants),
            Err(GridError::EmptySelection)
        ));
    }

    #[test]
    fn selections_are_subsets_of_all_and_deterministic() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        let grid = germany_grid();
        let plants: Vec<Plant> = (0..30)
            .map(|_| Plant {
                lon: 5.0 + rng.gen::<f64>() * 10.625,
                lat: 46.0 + rng.gen::<f64>() * 10.0,
                capacity_mw: 0.5 + rng.gen::<f64>() * 9.5,
            })
            .collect();
        let reg = registry(plants);
        let all = select_all(&grid);
        let k4 = select_k_nearest(&grid, &reg, 4);
        let q = select_capacity_quartile(&grid, &reg).unwrap();
        for sel in [&k4, &q] {
            assert!(sel.indices.iter().all(|i| all.indices.contains(i)));
            assert!(sel.indices.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(k4.len() <= 4 * reg.len());
        // bit-identical re-runs
        assert_eq!(k4.indices, select_k_nearest(&grid, &reg, 4).indices);
        assert_eq!(
            q.indices,
            select_capacity_quartile(&grid, &reg).unwrap().indices
        );
    }

    #[test]
    fn nearest_assignment_agrees_with_exhaustive_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for trial in 0..10 {
            let nlon = 2 + (rng.gen::<u32>() % 49) as usize;
            let nlat = 2 + (rng.gen::<u32>() % 49) as usize;
            let grid = GridSpec {
                lon0: -2.0,
                lat0: 40.0,
                dlon: 0.25,
                dlat: 0.25,
                nlon,
                nlat,
            };
            let lon = -2.0 + rng.gen::<f64>() * (nlon - 1) as f64 * 0.25;
            let lat = 40.0 + rng.gen::<f64>() * (nlat - 1) as f64 * 0.25;
            let fast = nearest_point(&grid, lon, lat);
            let mut best = (f64::INFINITY, usize::MAX);
            for idx in 0..grid.n_points() {
                let (plon, plat) = grid.point(idx);
                let d = haversine_km(lon, lat, plon, plat);
                if d < best.0 {
                    best = (d, idx);
                }
            }
            assert_eq!(fast, best.1, "trial {trial} at ({lon},{lat})");
        }
    }
}
