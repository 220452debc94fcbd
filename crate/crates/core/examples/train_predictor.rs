//! Fits the load forecaster to a Poisson trace and saves it.
//!
//! `cargo run --release --example train_predictor [out.bin]`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shra::predictor::{
    dataset_rmse, load_model, predict_active, save_model, train, ModelShape, PredictorModel, TrainingConfig,
};
use shra::traffic::{generate_training_traces, TrafficConfig};

fn main() -> shra::Result<()> {
    let shape = ModelShape {
        hidden1: 8,
        attention: 8,
        hidden2: 8,
        ..ModelShape::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let trace = generate_training_traces(&TrafficConfig::poisson(3.0), 400, shape.window, &mut rng)?;
    let cfg = TrainingConfig {
        epochs: 40,
        ..TrainingConfig::default()
    };
    let (model, loss) = train(PredictorModel::random(shape, 7), &trace.pairs, &cfg)?;
    for (epoch, rmse) in loss.rmse.iter().enumerate().skip(9).step_by(10) {
        println!("epoch {:>3}  rmse {rmse:.4}", epoch + 1);
    }
    println!(
        "final rmse {:.4}, Poisson noise floor {:.4}",
        dataset_rmse(&model, &trace.pairs)?,
        3f64.sqrt()
    );

    let path = std::env::args().nth(1).unwrap_or_else(|| "predictor.bin".into());
    save_model(&model, &path)?;
    let back = load_model(&path)?;
    let history = &trace.counts[trace.counts.len() - shape.window..];
    println!(
        "saved {path}; next-slot forecast after {history:?}: {}",
        predict_active(&back, history)?
    );
    Ok(())
}
