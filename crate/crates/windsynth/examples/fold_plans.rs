//! Rolling train/predict fold plans over whole calendar years.
//!
//! Run with: cargo run --release -p windsynth --example fold_plans

use windsynth::pipeline::{axis_for_years, build_fold_plan, year_rows, YearRange};

fn main() {
    let period = YearRange::new(2010, 2016);
    let axis = axis_for_years(period);
    println!("period {period}: {} hours", axis.len());

    let plan = build_fold_plan(period, 2).unwrap();
    println!("\nblock = 2 years -> {} folds:", plan.folds.len());
    for fold in &plan.folds {
        let predict_hours: usize = fold
            .predict
            .years()
            .map(|y| year_rows(&axis, y).unwrap().len())
            .sum();
        let train_hours: usize = fold
            .train_years
            .iter()
            .map(|&y| year_rows(&axis, y).unwrap().len())
            .sum();
        let years: Vec<String> = fold.train_years.iter().map(|y| y.to_string()).collect();
        println!(
            "  fold {}: predict {} ({predict_hours} h), train {} ({train_hours} h, {:.0}%)",
            fold.index,
            fold.predict,
            years.join(" "),
            100.0 * train_hours as f64 / axis.len() as f64
        );
    }

    // the degenerate two-year case: each year trains on the other
    let small = build_fold_plan(YearRange::new(2010, 2011), 1).unwrap();
    println!("\n2010-2011 with block = 1:");
    for fold in &small.folds {
        println!("  fold {}: predict {}, train {:?}", fold.index, fold.predict, fold.train_years);
    }
}
