//! Assembling the predictor matrix and round-tripping the range scaling.
//!
//! Run with: cargo run --release -p windsynth --example features_and_scaling

use windsynth::baseline::synth_scenario;
use windsynth::features::{apply_scaling, assemble, date_dummies, fit_scaling, invert_scaling};
use windsynth::grid::{select_all, GridSpec};
use windsynth::ingest::TimeAxis;

use chrono::{TimeZone, Utc};

fn main() {
    // the 43 calendar dummies for the first hours of 2010
    let axis = TimeAxis::new(Utc.with_ymd_and_hms(2010, 1, 1, 0, 0, 0).unwrap(), 48).unwrap();
    let dummies = date_dummies(&axis);
    println!("calendar dummies: {} columns", dummies.n_cols());
    let row = dummies.data.row(0);
    let active: Vec<String> = dummies
        .columns
        .iter()
        .zip(row)
        .filter(|(_, &v)| v == 1.0)
        .map(|(c, _)| c.name())
        .collect();
    println!("2010-01-01T00:00Z activates: {}", active.join(", "));

    // a full feature matrix: wind block + dummies
    let grid = GridSpec::from_bbox(5.0, 6.25, 50.0, 51.0, 0.625, 0.5).unwrap();
    let scenario = synth_scenario(3, 1, &grid, 4);
    let selection = select_all(&grid);
    let features = assemble(&scenario.wind, &selection, &scenario.wind.axis).unwrap();
    println!(
        "\nassembled matrix: {} hours x {} columns (6 x {} wind + 43 dummies)",
        features.n_rows(),
        features.n_cols(),
        selection.len()
    );

    // fit scaling on the first half, apply everywhere, invert back
    let fit_rows: Vec<usize> = (0..features.n_rows() / 2).collect();
    let params = fit_scaling(&features, &fit_rows);
    let scaled = apply_scaling(&features, &params).unwrap();
    let c = 0; // first wind column
    println!(
        "\ncolumn {}: mean {:.3}, range {:.3}",
        features.columns[c].name(),
        params.columns[c].mean,
        params.columns[c].range
    );
    let original: Vec<f64> = (0..5).map(|r| features.data.get(r, c)).collect();
    let transformed: Vec<f64> = (0..5).map(|r| scaled.data.get(r, c)).collect();
    let restored = invert_scaling(&transformed, &params.columns[c]);
    println!("original : {original:.3?}");
    println!("scaled   : {transformed:.3?}");
    println!("restored : {restored:.3?}");
    let worst = restored
        .iter()
        .zip(&original)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("round-trip max abs error: {worst:.2e}");
}
