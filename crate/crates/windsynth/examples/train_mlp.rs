//! Seeded network training on a small regression problem, plus the
//! finite-difference gradient check.
//!
//! Run with: cargo run --release -p windsynth --example train_mlp

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use windsynth::features::DenseMatrix;
use windsynth::mlp::{self, BatchMode, MlpConfig};

fn main() {
    // y = sin(2*pi*x) / 2 + noise-free offset, scaled into the unit range
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows: Vec<Vec<f64>> = (0..400).map(|_| vec![rng.gen::<f64>()]).collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| 0.5 + 0.4 * (std::f64::consts::TAU * r[0]).sin())
        .collect();
    let x = DenseMatrix::from_rows(&rows);

    let config = MlpConfig {
        hidden_sizes: [12, 12, 12],
        learning_rate: 0.5,
        epochs: 1500,
        seed: 7,
        batch_mode: BatchMode::Minibatch(16),
        shuffle: true,
    };
    let model = mlp::init(&config, 1);
    println!(
        "network: 1 -> {} -> {} -> {} -> 1 ({} parameters, seed {})",
        config.hidden_sizes[0],
        config.hidden_sizes[1],
        config.hidden_sizes[2],
        model.n_parameters(),
        config.seed
    );

    // verify backprop against central finite differences before training
    let err = mlp::gradient_check(&model, &x, &y, 1e-5).unwrap();
    println!("gradient check vs central differences: max rel err {err:.2e}");

    let (model, report) = mlp::train(model, &x, &y, &config).unwrap();
    println!("\nepoch losses:");
    for e in [0, 49, 199, 499, 999, 1499] {
        println!("  epoch {:4}: {:.6}", e + 1, report.epoch_losses[e]);
    }

    let preds = mlp::predict(&model, &x).unwrap();
    let worst = preds
        .iter()
        .zip(&y)
        .map(|(p, t)| (p - t).abs())
        .fold(0.0f64, f64::max);
    println!("\nfinal loss {:.6e}, worst abs error {worst:.3}", report.final_loss());

    // rerunning with the same seed reproduces the weights bit for bit
    let again = mlp::train(mlp::init(&config, 1), &x, &y, &config).unwrap().0;
    assert_eq!(again, model);
    println!("retraining with the same seed is bit-identical");
}
