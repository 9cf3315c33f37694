//! Simplified power-curve comparator and synthetic-scenario generator.
//!
//! The comparator follows the classic power-curve modelling chain:
//! interpolate gridded wind speeds to plant locations, extrapolate to hub
//! height with a two-point power law, map through a power curve, and
//! aggregate capacity-weighted, with an optional mean-match bias
//! correction. It is deliberately simple — a desk-scale stand-in and
//! test oracle, not a production turbine model.
//!
//! [`synth_scenario`] uses the comparator as ground truth to generate a
//! fully deterministic (wind field, plant registry, observed CF) triple
//! on which the whole pipeline can be exercised without real data.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, TimeZone, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{GridSpec, WindField};
use crate::ingest::{CapacityFactorSeries, Plant, PlantRegistry, TimeAxis};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("invalid power curve: {0}")]
    InvalidCurve(String),
    #[error("location ({lon}, {lat}) lies outside the grid hull")]
    OutsideGrid { lon: f64, lat: f64 },
    #[error("wind speeds must be positive for hub-height extrapolation")]
    NonPositiveSpeed,
    #[error("mean-match bisection failed: target mean is not reachable by rescaling wind speeds")]
    BisectionFailure,
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed row ({reason})")]
    MalformedRow { line: usize, reason: String },
}

/// Piecewise-linear turbine power curve: (wind speed m/s, fraction of
/// rated power) points with strictly increasing speeds.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerCurve {
    points: Vec<(f64, f64)>,
}

impl PowerCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, BaselineError> {
        if points.len() < 2 {
            return Err(BaselineError::InvalidCurve(
                "need at least two points".into(),
            ));
        }
        if !points.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(BaselineError::InvalidCurve(
                "speeds must be strictly increasing".into(),
            ));
        }
        if !points.iter().all(|&(s, f)| s >= 0.0 && (0.0..=1.0).contains(&f)) {
            return Err(BaselineError::InvalidCurve(
                "fractions must lie in [0, 1] and speeds must be non-negative".into(),
            ));
        }
        if points[0].1 != 0.0 {
            return Err(BaselineError::InvalidCurve(
                "first fraction must be 0 (below cut-in)".into(),
            ));
        }
        Ok(Self { points })
    }

    /// Generic curve: cut-in 3 m/s, rated 12 m/s, cut-out 25 m/s.
    pub fn default_turbine() -> Self {
        Self::new(vec![(3.0, 0.0), (12.0, 1.0), (25.0, 1.0), (25.01, 0.0)])
            .expect("default curve is valid")
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Power fraction at `speed`: piecewise-linear inside the curve's
    /// domain, 0 outside it.
    pub fn apply(&self, speed: f64) -> f64 {
        let first = self.points[0].0;
        let last = self.points[self.points.len() - 1].0;
        if speed < first || speed > last {
            return 0.0;
        }
        let pos = self.points.partition_point(|&(s, _)| s <= speed);
        if pos == 0 {
            return self.points[0].1;
        }
        if pos == self.points.len() {
            return self.points[pos - 1].1;
        }
        let (s0, f0) = self.points[pos - 1];
        let (s1, f1) = self.points[pos];
        f0 + (f1 - f0) * (speed - s0) / (s1 - s0)
    }

    /// Read a `speed_ms,power_fraction` CSV.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self, BaselineError> {
        let path = path.as_ref();
        let io = |source| BaselineError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = File::open(path).map_err(io)?;
        let mut points = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(io)?;
            let line = line.trim_end_matches('\r');
            if line_no == 1 {
                if line != "speed_ms,power_fraction" {
                    return Err(BaselineError::MalformedRow {
                        line: 1,
                        reason: format!("bad header `{line}`"),
                    });
                }
                continue;
            }
            let mut fields = line.split(',');
            let (a, b) = match (fields.next(), fields.next(), fields.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(BaselineError::MalformedRow {
                        line: line_no,
                        reason: "expected exactly 2 fields".into(),
                    })
                }
            };
            let parse = |s: &str| -> Result<f64, BaselineError> {
                s.parse().map_err(|_| BaselineError::MalformedRow {
                    line: line_no,
                    reason: format!("`{s}` is not a number"),
                })
            };
            points.push((parse(a)?, parse(b)?));
        }
        Self::new(points)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), BaselineError> {
        let path = path.as_ref();
        let io = |source| BaselineError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        let mut emit = || -> std::io::Result<()> {
            writeln!(w, "speed_ms,power_fraction")?;
            for (s, f) in &self.points {
                writeln!(w, "{s},{f}")?;
            }
            w.flush()
        };
        emit().map_err(io)
    }
}

/// Bias-correction mode for the fleet simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiasMode {
    None,
    /// Rescale all wind speeds by one factor so the mean modelled CF hits
    /// the given target (mean observed CF over a calibration window).
    MeanMatch { target_mean: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub hub_height_m: f64,
    pub curve: PowerCurve,
    pub bias: BiasMode,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            hub_height_m: 80.0,
            curve: PowerCurve::default_turbine(),
            bias: BiasMode::None,
        }
    }
}

/// Bilinear cell coordinates of a location in a grid.
struct CellWeights {
    corners: [usize; 4],
    weights: [f64; 4],
}

fn locate(grid: &GridSpec, lon: f64, lat: f64) -> Result<CellWeights, BaselineError> {
    const TOL: f64 = 1e-9;
    let outside = || BaselineError::OutsideGrid { lon, lat };
    let fx = (lon - grid.lon0) / grid.dlon;
    let fy = (lat - grid.lat0) / grid.dlat;
    if fx < -TOL || fx > (grid.nlon - 1) as f64 + TOL || fy < -TOL || fy > (grid.nlat - 1) as f64 + TOL
    {
        return Err(outside());
    }
    let clamp_cell = |f: f64, n: usize| -> (usize, f64) {
        if n == 1 {
            return (0, 0.0);
        }
        let i = (f.floor() as isize).clamp(0, n as isize - 2) as usize;
        (i, (f - i as f64).clamp(0.0, 1.0))
    };
    let (i, wx) = clamp_cell(fx, grid.nlon);
    let (j, wy) = clamp_cell(fy, grid.nlat);
    let i1 = if grid.nlon == 1 { i } else { i + 1 };
    let j1 = if grid.nlat == 1 { j } else { j + 1 };
    Ok(CellWeights {
        corners: [
            j * grid.nlon + i,
            j * grid.nlon + i1,
            j1 * grid.nlon + i,
            j1 * grid.nlon + i1,
        ],
        weights: [
            (1.0 - wx) * (1.0 - wy),
            wx * (1.0 - wy),
            (1.0 - wx) * wy,
            wx * wy,
        ],
    })
}

/// Bilinearly interpolated wind-speed magnitudes at 10 m and 50 m.
/// Magnitudes are computed per grid point first, then interpolated, so
/// opposing component vectors across a cell cannot cancel.
pub fn interpolate_wind(
    field: &WindField,
    lon: f64,
    lat: f64,
    hour: usize,
) -> Result<(f64, f64), BaselineError> {
    let cell = locate(&field.grid, lon, lat)?;
    let mut v10 = 0.0;
    let mut v50 = 0.0;
    for (corner, weight) in cell.corners.iter().zip(cell.weights) {
        let (m10, m50) = field.speeds_10_50(*corner, hour);
        v10 += weight * m10;
        v50 += weight * m50;
    }
    Ok((v10, v50))
}

/// Extrapolate to hub height with a power-law profile fitted through the
/// 10 m / 50 m pair: `alpha = ln(v50/v10)/ln(5)`, `v(h) = v50 * (h/50)^alpha`.
/// Near-calm 10 m speeds (<= 0.01 m/s) fall back to the 50 m speed.
pub fn hub_height_speed(v10: f64, v50: f64, h: f64) -> Result<f64, BaselineError> {
    if v50 <= 0.0 || v10 < 0.0 || h <= 0.0 {
        return Err(BaselineError::NonPositiveSpeed);
    }
    if v10 <= 0.01 {
        return Ok(v50);
    }
    let alpha = (v50 / v10).ln() / 5.0f64.ln();
    Ok(v50 * (h / 50.0).powf(alpha))
}

/// Total version used by the fleet loop: calm or degenerate inputs yield
/// the 50 m speed (possibly 0) instead of an error.
fn fleet_hub_speed(v10: f64, v50: f64, h: f64) -> f64 {
    if v50 <= 0.0 {
        return 0.0;
    }
    if v10 <= 0.01 {
        return v50;
    }
    let alpha = (v50 / v10).ln() / 5.0f64.ln();
    v50 * (h / 50.0).powf(alpha)
}

/// Capacity-weighted fleet capacity factors, hour by hour.
///
/// With [`BiasMode::MeanMatch`] all hub-height speeds are rescaled by one
/// factor, found by bisection, so the mean modelled CF matches the target.
pub fn simulate_fleet(
    field: &WindField,
    plants: &PlantRegistry,
    cfg: &BaselineConfig,
) -> Result<CapacityFactorSeries, BaselineError> {
    assert!(cfg.hub_height_m > 0.0, "hub height must be positive");
    let n_hours = field.axis.len();
    let n_plants = plants.len();
    let cells: Vec<CellWeights> = plants
        .plants
        .iter()
        .map(|p| locate(&field.grid, p.lon, p.lat))
        .collect::<Result<_, _>>()?;
    let capacities: Vec<f64> = plants.plants.iter().map(|p| p.capacity_mw).collect();
    let total_capacity: f64 = capacities.iter().sum();

    // hub-height speeds are independent of the bias scale; precompute once
    let mut speeds = vec![0.0f64; n_hours * n_plants];
    for hour in 0..n_hours {
        for (p, cell) in cells.iter().enumerate() {
            let mut v10 = 0.0;
            let mut v50 = 0.0;
            for (corner, weight) in cell.corners.iter().zip(cell.weights) {
                let (m10, m50) = field.speeds_10_50(*corner, hour);
                v10 += weight * m10;
                v50 += weight * m50;
            }
            speeds[hour * n_plants + p] = fleet_hub_speed(v10, v50, cfg.hub_height_m);
        }
    }

    let cf_series = |scale: f64| -> Vec<f64> {
        (0..n_hours)
            .map(|hour| {
                let mut acc = 0.0;
                for p in 0..n_plants {
                    acc += capacities[p] * cfg.curve.apply(speeds[hour * n_plants + p] * scale);
                }
                acc / total_capacity
            })
            .collect()
    };

    let scale = match cfg.bias {
        BiasMode::None => 1.0,
        BiasMode::MeanMatch { target_mean } => {
            find_mean_match_scale(&cf_series, target_mean, n_hours)?
        }
    };

    Ok(CapacityFactorSeries::new(field.axis, cf_series(scale)))
}

/// Bisection for the wind-speed scale whose mean CF equals the target.
fn find_mean_match_scale(
    cf_series: &dyn Fn(f64) -> Vec<f64>,
    target_mean: f64,
    n_hours: usize,
) -> Result<f64, BaselineError> {
    let mean_at = |scale: f64| -> f64 {
        cf_series(scale).iter().sum::<f64>() / n_hours as f64 - target_mean
    };
    // scan for a sign change, then bisect inside the bracket
    let n_scan = 64;
    let (lo_bound, hi_bound) = (0.05f64, 5.0f64);
    let step = (hi_bound / lo_bound).powf(1.0 / n_scan as f64);
    let mut lo = lo_bound;
    let mut f_lo = mean_at(lo);
    let mut bracket = None;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    for k in 1..=n_scan {
        let hi = lo_bound * step.powi(k);
        let f_hi = mean_at(hi);
        if f_hi == 0.0 {
            return Ok(hi);
        }
        if f_lo.signum() != f_hi.signum() {
            bracket = Some((lo, hi, f_lo));
            break;
        }
        lo = hi;
        f_lo = f_hi;
    }
    let (mut lo, mut hi, mut f_lo) = bracket.ok_or(BaselineError::BisectionFailure)?;
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let f_mid = mean_at(mid);
        if f_mid.abs() < 1e-12 || (hi - lo) < 1e-15 {
            break;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    if mean_at(mid).abs() > 1e-6 {
        return Err(BaselineError::BisectionFailure);
    }
    Ok(mid)
}

/// A deterministic desk-scale dataset: wind field, plant registry, and the
/// "observed" capacity factors produced by the comparator plus small noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub wind: WindField,
    pub plants: PlantRegistry,
    pub observed: CapacityFactorSeries,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generate a spatially correlated wind field (shared seasonal and diurnal
/// sinusoids plus autoregressive noise), random plant placements, and the
/// observed CF series, all driven by one seed. Calendar years start at
/// 2010-01-01 UTC.
pub fn synth_scenario(seed: u64, years: usize, grid: &GridSpec, n_plants: usize) -> Scenario {
    assert!(years >= 1, "need at least one year");
    assert!(n_plants >= 1, "need at least one plant");

    let start = Utc.with_ymd_and_hms(2010, 1, 1, 0, 0, 0).unwrap();
    let end = Utc
        .with_ymd_and_hms(2010 + years as i32, 1, 1, 0, 0, 0)
        .unwrap();
    let n_hours = (end - start).num_hours() as usize;
    let axis = TimeAxis::new(start, n_hours).expect("valid axis");
    let np = grid.n_points();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // per-point mean wind level
    let base: Vec<f64> = (0..np).map(|_| 6.5 + 2.4 * (rng.gen::<f64>() - 0.5)).collect();
    let season_phase: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    let diurnal_phase: f64 = rng.gen::<f64>() * std::f64::consts::TAU;

    const SEASON_AMPLITUDE: f64 = 1.6;
    const DIURNAL_AMPLITUDE: f64 = 0.7;
    const SHARED_RHO: f64 = 0.97;
    const SHARED_STD: f64 = 1.8;
    const LOCAL_RHO: f64 = 0.9;
    const LOCAL_STD: f64 = 0.5;

    let shared_innovation = SHARED_STD * (1.0 - SHARED_RHO * SHARED_RHO).sqrt();
    let local_innovation = LOCAL_STD * (1.0 - LOCAL_RHO * LOCAL_RHO).sqrt();
    let shear_10 = (10.0f64 / 50.0).powf(0.14);
    let shear_2 = (2.0f64 / 50.0).powf(0.14);

    let mut shared_ar = 0.0f64;
    let mut direction = rng.gen::<f64>() * std::f64::consts::TAU;
    let mut local_ar = vec![0.0f64; np];

    let mut data = vec![0.0f64; n_hours * 6 * np];
    for hour in 0..n_hours {
        let ts = axis.timestamp(hour);
        let year_pos = (ts.ordinal() - 1) as f64 / 365.25;
        let seasonal =
            SEASON_AMPLITUDE * (std::f64::consts::TAU * year_pos + season_phase).cos();
        let diurnal = DIURNAL_AMPLITUDE
            * (std::f64::consts::TAU * ts.hour() as f64 / 24.0 + diurnal_phase).sin();
        shared_ar = SHARED_RHO * shared_ar + shared_innovation * gaussian(&mut rng);
        direction += 0.05 * gaussian(&mut rng);
        let (sin_d, cos_d) = direction.sin_cos();
        let row = &mut data[hour * 6 * np..(hour + 1) * 6 * np];
        for p in 0..np {
            local_ar[p] = LOCAL_RHO * local_ar[p] + local_innovation * gaussian(&mut rng);
            let s50 = (base[p] + seasonal + diurnal + shared_ar + local_ar[p]).max(0.3);
            let s10 = s50 * shear_10;
            let s2 = s50 * shear_2;
            row[p] = s2 * cos_d; // U2M
            row[np + p] = s2 * sin_d; // V2M
            row[2 * np + p] = s10 * cos_d; // U10M
            row[3 * np + p] = s10 * sin_d; // V10M
            row[4 * np + p] = s50 * cos_d; // U50M
            row[5 * np + p] = s50 * sin_d; // V50M
        }
    }
    let wind = WindField::new(*grid, axis, data);

    let lon_span = grid.lon_max() - grid.lon0;
    let lat_span = grid.lat_max() - grid.lat0;
    let plants: Vec<Plant> = (0..n_plants)
        .map(|_| Plant {
            lon: grid.lon0 + (0.05 + 0.9 * rng.gen::<f64>()) * lon_span,
            lat: grid.lat0 + (0.05 + 0.9 * rng.gen::<f64>()) * lat_span,
            capacity_mw: 1.0 + 9.0 * rng.gen::<f64>(),
        })
        .collect();
    let plants = PlantRegistry::new(plants).expect("nonempty registry");

    let clean = simulate_fleet(&wind, &plants, &BaselineConfig::default())
        .expect("plants lie inside the hull by construction");
    let observed = CapacityFactorSeries::new(
        axis,
        clean
            .values
            .iter()
            .map(|&cf| (cf + 0.01 * gaussian(&mut rng)).clamp(0.0, 1.0))
            .collect(),
    );

    Scenario {
        wind,
        plants,
        observed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Plant;

    fn two_by_two_field(mags_10: [f64; 4], mags_50: [f64; 4]) -> WindField {
        let grid = GridSpec::from_bbox(0.0, 1.0, 50.0, 51.0, 1.0, 1.0).unwrap();
        let axis = TimeAxis::new(Utc.with_ymd_and_hms(2010, 1, 1, 0, 0, 0).unwrap(), 1).unwrap();
        let mut data = vec![0.0; 6 * 4];
        for p in 0..4 {
            data[2 * 4 + p] = mags_10[p]; // U10M carries the magnitude
            data[4 * 4 + p] = mags_50[p]; // U50M
        }
        WindField::new(grid, axis, data)
    }

    #[test]
    fn interpolation_on_grid_point_returns_point_value() {
        let field = two_by_two_field([1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]);
        let (v10, v50) = interpolate_wind(&field, 1.0, 50.0, 0).unwrap();
        assert!((v10 - 2.0).abs() < 1e-12);
        assert!((v50 - 6.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_at_cell_center_averages_corners() {
        let field = two_by_two_field([1.0, 1.0, 3.0, 3.0], [2.0, 2.0, 6.0, 6.0]);
        let (v10, v50) = interpolate_wind(&field, 0.5, 50.5, 0).unwrap();
        assert!((v10 - 2.0).abs() < 1e-12, "v10 {v10}");
        assert!((v50 - 4.0).abs() < 1e-12, "v50 {v50}");
    }

    #[test]
    fn location_outside_hull_is_rejected() {
        let field = two_by_two_field([1.0; 4], [2.0; 4]);
        assert!(matches!(
            interpolate_wind(&field, 1.5, 50.5, 0),
            Err(BaselineError::OutsideGrid { .. })
        ));
        assert!(matches!(
            interpolate_wind(&field, 0.5, 49.9, 0),
            Err(BaselineError::OutsideGrid { .. })
        ));
    }

    #[test]
    fn hub_speed_at_50m_is_v50() {
        assert_eq!(hub_height_speed(4.0, 6.0, 50.0).unwrap(), 6.0);
    }

    #[test]
    fn equal_speeds_have_zero_shear() {
        let v = hub_height_speed(5.0, 5.0, 100.0).unwrap();
        assert!((v - 5.0).abs() < 1e-12);
    }

    #[test]
    fn hub_speed_hand_oracle() {
        // alpha = ln(1.5)/ln(5), v(100) = 6 * 2^alpha
        let v = hub_height_speed(4.0, 6.0, 100.0).unwrap();
        assert!((v - 7.144799).abs() < 1e-4, "got {v}");
    }

    #[test]
    fn calm_10m_speed_falls_back_to_v50() {
        assert_eq!(hub_height_speed(0.005, 4.2, 120.0).unwrap(), 4.2);
    }

    #[test]
    fn non_positive_speeds_are_rejected() {
        assert!(matches!(
            hub_height_speed(4.0, 0.0, 100.0),
            Err(BaselineError::NonPositiveSpeed)
        ));
        assert!(matches!(
            hub_height_speed(-1.0, 4.0, 100.0),
            Err(BaselineError::NonPositiveSpeed)
        ));
        assert!(matches!(
            hub_height_speed(4.0, 5.0, 0.0),
            Err(BaselineError::NonPositiveSpeed)
        ));
    }

    #[test]
    fn curve_is_zero_outside_domain() {
        let curve = PowerCurve::new(vec![(3.0, 0.0), (12.0, 1.0), (25.0, 1.0), (25.01, 0.0)])
            .unwrap();
        assert_eq!(curve.apply(1.0), 0.0);
        assert_eq!(curve.apply(30.0), 0.0);
        assert_eq!(curve.apply(20.0), 1.0);
    }

    #[test]
    fn curve_interpolates_linearly() {
        let curve = PowerCurve::new(vec![(3.0, 0.0), (12.0, 1.0), (25.0, 1.0), (25.01, 0.0)])
            .unwrap();
        assert!((curve.apply(7.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_curves_are_rejected() {
        assert!(PowerCurve::new(vec![(3.0, 0.0)]).is_err());
        assert!(PowerCurve::new(vec![(3.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(PowerCurve::new(vec![(3.0, 0.5), (12.0, 1.0)]).is_err());
        assert!(PowerCurve::new(vec![(3.0, 0.0), (12.0, 1.5)]).is_err());
    }

    fn constant_speed_field(speed: f64, hours: usize) -> WindField {
        let grid = GridSpec::from_bbox(0.0, 1.0, 50.0, 51.0, 1.0, 1.0).unwrap();
        let axis =
            TimeAxis::new(Utc.with_ymd_and_hms(2010, 1, 1, 0, 0, 0).unwrap(), hours).unwrap();
        let np = 4;
        let mut data = vec![0.0; hours * 6 * np];
        for h in 0..hours {
            for p in 0..np {
                data[(h * 6 + 2) * np + p] = speed; // U10M
                data[(h * 6 + 4) * np + p] = speed; // U50M
            }
        }
        WindField::new(grid, axis, data)
    }

    #[test]
    fn rated_wind_gives_cf_one() {
        let field = constant_speed_field(15.0, 5);
        let plants = PlantRegistry::new(vec![Plant {
            lon: 0.5,
            lat: 50.5,
            capacity_mw: 2.0,
        }])
        .unwrap();
        let cf = simulate_fleet(&field, &plants, &BaselineConfig::default()).unwrap();
        assert!(cf.values.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn fleet_cf_is_capacity_weighted_mean() {
        // two equal-capacity plants at fractions 0.2 and 0.6
        let grid = GridSpec::from_bbox(0.0, 1.0, 50.0, 51.0, 1.0, 1.0).unwrap();
        let axis = TimeAxis::new(Utc.with_ymd_and_hms(2010, 1, 1, 0, 0, 0).unwrap(), 1).unwrap();
        let np = 4;
        let mut data = vec![0.0; 6 * np];
        // fraction 0.2 -> speed 4.8; fraction 0.6 -> speed 8.4 on the default curve
        data[2 * np] = 4.8;
        data[4 * np] = 4.8;
        data[2 * np + 1] = 8.4;
        data[4 * np + 1] = 8.4;
        let field = WindField::new(grid, axis, data);
        let plants = PlantRegistry::new(vec![
            Plant {
                lon: 0.0,
                lat: 50.0,
                capacity_mw: 3.0,
            },
            Plant {
                lon: 1.0,
                lat: 50.0,
                capacity_mw: 3.0,
            },
        ])
        .unwrap();
        let cfg = BaselineConfig {
            hub_height_m: 50.0,
            ..BaselineConfig::default()
        };
        let cf = simulate_fleet(&field, &plants, &cfg).unwrap();
        assert!((cf.values[0] - 0.4).abs() < 1e-12, "cf {}", cf.values[0]);
    }

    #[test]
    fn fleet_output_stays_within_unit_interval() {
        let grid = GridSpec::from_bbox(0.0, 2.0, 50.0, 52.0, 1.0, 1.0).unwrap();
        let scenario = synth_scenario(5, 1, &grid, 6);
        let cf = simulate_fleet(&scenario.wind, &scenario.plants, &BaselineConfig::default())
            .unwrap();
        assert!(cf.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn mean_match_hits_target_mean() {
        let grid = GridSpec::from_bbox(0.0, 2.0, 50.0, 52.0, 1.0, 1.0).unwrap();
        let scenario = synth_scenario(11, 1, &grid, 5);
        let target = 0.4;
        let cfg = BaselineConfig {
            bias: BiasMode::MeanMatch {
                target_mean: target,
            },
            ..BaselineConfig::default()
        };
        let cf = simulate_fleet(&scenario.wind, &scenario.plants, &cfg).unwrap();
        let mean = cf.values.iter().sum::<f64>() / cf.values.len() as f64;
        assert!((mean - target).abs() < 1e-6, "mean {mean}");
    }

    #[test]
    fn mean_match_unreachable_target_fails() {
        let field = constant_speed_field(15.0, 5);
        let plants = PlantRegistry::new(vec![Plant {
            lon: 0.5,
            lat: 50.5,
            capacity_mw: 2.0,
        }])
        .unwrap();
        let cfg = BaselineConfig {
            bias: BiasMode::MeanMatch { target_mean: 1.5 },
            ..BaselineConfig::default()
        };
        assert!(matches!(
            simulate_fleet(&field, &plants, &cfg),
            Err(BaselineError::BisectionFailure)
        ));
    }

    #[test]
    fn mean_match_preserves_speed_ordering() {
        // a single positive factor cannot reorder speeds
        let grid = GridSpec::from_bbox(0.0, 2.0, 50.0, 52.0, 1.0, 1.0).unwrap();
        let scenario = synth_scenario(13, 1, &grid, 4);
        let plant = &scenario.plants.plants[0];
        let mut speeds = Vec::new();
        for hour in 0..100 {
            let (v10, v50) =
                interpolate_wind(&scenario.wind, plant.lon, plant.lat, hour).unwrap();
            speeds.push(hub_height_speed(v10, v50, 80.0).unwrap());
        }
        let scale = 1.37;
        let mut order_before: Vec<usize> = (0..speeds.len()).collect();
        order_before.sort_by(|&a, &b| speeds[a].total_cmp(&speeds[b]));
        let scaled: Vec<f64> = speeds.iter().map(|s| s * scale).collect();
        let mut order_after: Vec<usize> = (0..scaled.len()).collect();
        order_after.sort_by(|&a, &b| scaled[a].total_cmp(&scaled[b]));
        assert_eq!(order_before, order_after);
    }

    #[test]
    fn scenario_is_deterministic_per_seed() {
        let grid = GridSpec::from_bbox(0.0, 2.0, 50.0, 52.0, 1.0, 1.0).unwrap();
        let a = synth_scenario(77, 1, &grid, 5);
        let b = synth_scenario(77, 1, &grid, 5);
        assert_eq!(a, b);
        let c = synth_scenario(78, 1, &grid, 5);
        assert_ne!(a.observed.values, c.observed.values);
    }

    #[test]
    fn scenario_cf_is_within_unit_interval() {
        let grid = GridSpec::from_bbox(0.0, 2.0, 50.0, 52.0, 1.0, 1.0).unwrap();
        let s = synth_scenario(3, 1, &grid, 8);
        assert!(s.observed.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(s.observed.axis.len(), 8760);
    }

    #[test]
    fn scenario_has_diurnal_structure() {
        use chrono::Timelike;
        let grid = GridSpec::from_bbox(0.0, 2.0, 50.0, 52.0, 1.0, 1.0).unwrap();
        let s = synth_scenario(21, 1, &grid, 6);
        let mut sums = [0.0f64; 24];
        let mut counts = [0usize; 24];
        for (i, &v) in s.observed.values.iter().enumerate() {
            let h = s.observed.axis.timestamp(i).hour() as usize;
            sums[h] += v;
            counts[h] += 1;
        }
        let means: Vec<f64> = (0..24).map(|h| sums[h] / counts[h] as f64).collect();
        let min = means.iter().copied().fold(f64::INFINITY, f64::min);
        let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(
            max - min > 0.005,
            "hourly means too flat: spread {}",
            max - min
        );
    }

    #[test]
    fn power_curve_csv_round_trip() {
        let curve = PowerCurve::default_turbine();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        curve.write_csv(&path).unwrap();
        let back = PowerCurve::from_csv(&path).unwrap();
        assert_eq!(back, curve);
    }
}
