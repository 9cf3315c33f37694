//! The three grid-point subsetting strategies on a country-scale grid.
//!
//! Run with: cargo run --release -p windsynth --example grid_subsetting

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use windsynth::grid::{select_all, select_capacity_quartile, select_k_nearest, GridSpec};
use windsynth::ingest::{Plant, PlantRegistry};

fn main() {
    // the bounding box used for national-scale runs: 18 x 21 = 378 points
    let grid = GridSpec::from_bbox(5.0, 15.625, 46.0, 56.0, 0.625, 0.5).unwrap();
    println!(
        "grid: {} x {} = {} points, spacing {} x {} degrees",
        grid.nlon,
        grid.nlat,
        grid.n_points(),
        grid.dlon,
        grid.dlat
    );

    // a synthetic fleet standing in for a real plant registry
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let plants = PlantRegistry::new(
        (0..400)
            .map(|_| Plant {
                lon: 6.0 + rng.gen::<f64>() * 8.5,
                lat: 47.0 + rng.gen::<f64>() * 8.0,
                capacity_mw: 0.5 + rng.gen::<f64>() * 7.5,
            })
            .collect(),
    )
    .unwrap();
    println!("fleet: {} plants, {:.0} MW", plants.len(), plants.total_capacity_mw());

    let all = select_all(&grid);
    println!("\nvariant mlm1 ({}): {} points", all.strategy.label(), all.len());

    let k4 = select_k_nearest(&grid, &plants, 4);
    println!(
        "variant mlm2 ({}): {} points (4 nearest per plant, deduplicated)",
        k4.strategy.label(),
        k4.len()
    );

    let q = select_capacity_quartile(&grid, &plants).unwrap();
    println!(
        "variant mlm3 ({}): {} points (assigned capacity above the third quartile)",
        q.strategy.label(),
        q.len()
    );

    println!("\nfirst mlm3 points (index, lon, lat):");
    for &idx in q.indices.iter().take(8) {
        let (lon, lat) = grid.point(idx);
        println!("  {idx:4}  {lon:7.3}  {lat:6.3}");
    }
}
