//! The full validation battery on a pair of related series.
//!
//! Run with: cargo run --release -p windsynth --example quality_report

use windsynth::baseline::{simulate_fleet, synth_scenario, BaselineConfig};
use windsynth::grid::GridSpec;
use windsynth::quality;

fn main() {
    // observed = scenario truth; predicted = the comparator with a taller
    // hub, a deliberately imperfect model of the same fleet
    let grid = GridSpec::from_bbox(0.0, 2.5, 50.0, 52.0, 0.625, 0.5).unwrap();
    let scenario = synth_scenario(17, 1, &grid, 10);
    let cfg = BaselineConfig {
        hub_height_m: 120.0,
        ..BaselineConfig::default()
    };
    let predicted = simulate_fleet(&scenario.wind, &scenario.plants, &cfg).unwrap();

    let report = quality::full_report(&scenario.observed, &predicted).unwrap();

    println!("headline metrics over {} hours", report.n_hours);
    println!("  correlation {:.4}", report.correlation);
    println!("  nmae        {:.4}", report.nmae);
    println!("  nrmse       {:.4}", report.nrmse);
    println!(
        "  variance    {:.4} observed / {:.4} predicted",
        report.variance_observed, report.variance_predicted
    );

    println!("\nquantiles (observed vs predicted):");
    for q in &report.quantiles {
        println!("  {:3.0}%: {:.3} vs {:.3}", q.p * 100.0, q.observed, q.predicted);
    }

    println!("\nextreme events (runs of consecutive hours):");
    for e in &report.extremes {
        println!(
            "  {:20} freq {:4} vs {:4}, max duration {:?} vs {:?}",
            e.predicate,
            e.observed.frequency,
            e.predicted.frequency,
            e.observed.max_duration,
            e.predicted.max_duration
        );
    }

    println!("\npooled ramps:");
    for r in &report.ramps {
        println!(
            "  {}h: neg freq {} vs {}, pos freq {} vs {}, extremes |d|>0.2: {} vs {}",
            r.timeframe_h,
            r.observed.neg_freq,
            r.predicted.neg_freq,
            r.observed.pos_freq,
            r.predicted.pos_freq,
            r.observed.freq_below_neg_threshold + r.observed.freq_above_pos_threshold,
            r.predicted.freq_below_neg_threshold + r.predicted.freq_above_pos_threshold,
        );
    }

    println!("\ndiurnal deviation medians (hours 1..24):");
    let medians: Vec<String> = report
        .diurnal
        .iter()
        .map(|d| format!("{:+.3}", d.stats.median.unwrap_or(0.0)))
        .collect();
    println!("  {}", medians.join(" "));

    let out = std::env::temp_dir().join("windsynth_example_report");
    std::fs::create_dir_all(&out).unwrap();
    report.write_json(out.join("report.json")).unwrap();
    report.write_metrics_csv(out.join("table3_metrics.csv")).unwrap();
    report.write_extremes_csv(out.join("table3_extremes.csv")).unwrap();
    report.write_ramps_csv(out.join("table4_ramps.csv")).unwrap();
    report.write_plot_data(&out).unwrap();
    println!("\nwrote the report bundle to {}", out.display());
}
