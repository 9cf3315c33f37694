//! End-to-end experiment on synthetic data: subset, fold plan, per-fold
//! training and prediction, stitching, and evaluation.
//!
//! Run with: cargo run --release -p windsynth --example full_experiment

use windsynth::baseline::synth_scenario;
use windsynth::grid::GridSpec;
use windsynth::mlp::BatchMode;
use windsynth::pipeline::{
    run_experiment, select_model, DataBundle, ExperimentConfig, TrainSettings, Variant, YearRange,
};
use windsynth::quality;

fn main() {
    let grid = GridSpec::from_bbox(5.0, 8.125, 46.0, 48.5, 0.625, 0.5).unwrap();
    let scenario = synth_scenario(42, 2, &grid, 15);
    println!(
        "scenario: {} hours, {} grid points, {} plants",
        scenario.observed.axis.len(),
        grid.n_points(),
        scenario.plants.len()
    );

    let bundle = DataBundle {
        wind: &scenario.wind,
        plants: Some(&scenario.plants),
        observed: &scenario.observed,
    };
    let train = TrainSettings {
        learning_rate: 0.2,
        epochs: 80,
        batch_mode: BatchMode::Minibatch(64),
        shuffle: true,
    };

    // two candidate network sizes, selected by NMAE / NRMSE / correlation
    let mut candidates = Vec::new();
    for hidden in [20usize, 30] {
        let cfg = ExperimentConfig {
            variant: Variant::Mlm2,
            hidden,
            seed: 11,
            years: YearRange::new(2010, 2011),
            block: 1,
            k_nearest: 4,
            train,
        };
        let out = run_experiment(&cfg, &bundle, 2).unwrap();
        assert!(out.verify_no_leakage());
        let metrics =
            quality::summary_metrics(&scenario.observed.values, &out.series.values).unwrap();
        println!(
            "hidden {hidden:2}: correlation {:.4}, nmae {:.4}, nrmse {:.4}",
            metrics.correlation, metrics.nmae, metrics.nrmse
        );
        candidates.push((format!("mlm2-h{hidden}"), out));
    }

    let winner = select_model(&candidates, &scenario.observed).unwrap();
    println!("selected: {winner}");

    let (_, best) = candidates.iter().find(|(l, _)| *l == winner).unwrap();
    for prov in &best.provenance {
        println!(
            "  fold {}: predicted {} from a model trained on {:?}",
            prov.fold_index, prov.predict_years, prov.train_years
        );
    }

    let report = quality::full_report(&scenario.observed, &best.series).unwrap();
    let out = std::env::temp_dir().join("windsynth_example_experiment");
    std::fs::create_dir_all(&out).unwrap();
    report.write_json(out.join("report.json")).unwrap();
    println!("wrote report.json to {}", out.display());
}
