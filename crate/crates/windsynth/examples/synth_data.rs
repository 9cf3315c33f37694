//! Generate a deterministic synthetic dataset and write it in the standard
//! CSV interchange formats.
//!
//! Run with: cargo run --release -p windsynth --example synth_data

use windsynth::baseline::synth_scenario;
use windsynth::grid::{self, GridSpec};
use windsynth::ingest::{self, CapacitySeries, GenerationSeries};

fn main() {
    let grid = GridSpec::from_bbox(5.0, 8.125, 46.0, 48.5, 0.625, 0.5).unwrap();
    let scenario = synth_scenario(7, 2, &grid, 12);

    let obs = &scenario.observed;
    let mean = obs.values.iter().sum::<f64>() / obs.values.len() as f64;
    let max = obs.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("scenario: seed 7, 2 years, {} grid points, {} plants", grid.n_points(), scenario.plants.len());
    println!("hours            : {}", obs.axis.len());
    println!("mean capacity fac: {mean:.3}");
    println!("max capacity fac : {max:.3}");
    println!("fleet capacity   : {:.1} MW", scenario.plants.total_capacity_mw());

    // emit the dataset the way the `synth` subcommand does
    let out = std::env::temp_dir().join("windsynth_example_data");
    std::fs::create_dir_all(&out).unwrap();
    let total = scenario.plants.total_capacity_mw();
    let n_days = obs.axis.len() / 24;
    let capacity = CapacitySeries {
        start_date: obs.axis.start().date_naive(),
        values: vec![total; n_days],
    };
    let generation = GenerationSeries {
        axis: obs.axis,
        values: obs.values.iter().map(|cf| cf * total).collect(),
    };
    grid::write_wind_csv(out.join("wind.csv"), &scenario.wind).unwrap();
    ingest::write_plants_csv(out.join("plants.csv"), &scenario.plants).unwrap();
    ingest::write_generation_csv(out.join("generation.csv"), &generation).unwrap();
    ingest::write_capacity_csv(out.join("capacity.csv"), &capacity).unwrap();
    println!("wrote wind/plants/generation/capacity CSVs to {}", out.display());

    // the files round-trip through the parsers
    let cap_back = ingest::parse_capacity_csv(out.join("capacity.csv")).unwrap();
    let gen_back = ingest::parse_generation_csv(out.join("generation.csv")).unwrap();
    let cf_back = ingest::to_capacity_factors(&gen_back, &cap_back).unwrap();
    let worst = cf_back
        .values
        .iter()
        .zip(&obs.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("capacity-factor round trip through the files: max abs error {worst:.2e}");
}
