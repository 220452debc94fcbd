//! Mini-batch gradient descent on RMSE.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::PredictorModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Samples per update; the loss of each batch is its RMSE.
    pub batch_size: usize,
    /// Drives the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.01,
            epochs: 200,
            batch_size: 1,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning rate must be >= 0, got {}", self.learning_rate));
        }
        if self.epochs == 0 {
            problems.push("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            problems.push("batch size must be at least 1".into());
        }
        problems
    }
}

/// Training-set RMSE, in device counts, after each epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    pub rmse: Vec<f64>,
}

impl LossTrace {
    pub fn last(&self) -> Option<f64> {
        self.rmse.last().copied()
    }
}

pub fn write_loss_csv<W: Write>(mut out: W, trace: &LossTrace) -> std::io::Result<()> {
    writeln!(out, "epoch,rmse")?;
    for (epoch, rmse) in trace.rmse.iter().enumerate() {
        writeln!(out, "{},{}", epoch + 1, rmse)?;
    }
    Ok(())
}

/// RMSE of `model` over `dataset`, in counts.
pub fn dataset_rmse(model: &PredictorModel, dataset: &[(Vec<f64>, f64)]) -> Result<f64> {
    let mut sq = 0.0;
    for (history, next) in dataset {
        let x: Vec<f64> = history.iter().map(|v| v / model.scale).collect();
        let y = model.forward_normalized(&x)? * model.scale;
        sq += (y - next).powi(2);
    }
    Ok((sq / dataset.len() as f64).sqrt())
}

/// Fits `model` to `(history, next)` pairs given in raw counts.
///
/// The normalization scale is reset to the largest count in the data (at
/// least 1) before the first update.
pub fn train(
    mut model: PredictorModel,
    dataset: &[(Vec<f64>, f64)],
    config: &TrainingConfig,
) -> Result<(PredictorModel, LossTrace)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let problems = config.validate();
    if !problems.is_empty() {
        return Err(Error::InvalidConfig(problems));
    }
    model.validate()?;
    if let Some((h, _)) = dataset.iter().find(|(h, _)| h.len() != model.window) {
        return Err(Error::Shape {
            what: "training window",
            expected: model.window,
            got: h.len(),
        });
    }

    let scale = dataset
        .iter()
        .flat_map(|(h, y)| h.iter().chain(std::iter::once(y)))
        .fold(1.0f64, |m, &v| m.max(v));
    model.scale = scale;
    let normalized: Vec<(Vec<f64>, f64)> = dataset
        .iter()
        .map(|(h, y)| (h.iter().map(|v| v / scale).collect(), y / scale))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..normalized.len()).collect();
    let mut trace = LossTrace::default();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut caches = Vec::with_capacity(batch.len());
            let mut sq = 0.0;
            for &i in batch {
                let (x, y) = &normalized[i];
                let cache = model.forward_cached(x)?;
                let err = cache.output - y;
                sq += err * err;
                caches.push((cache, err));
            }
            let n = batch.len() as f64;
            let rmse = (sq / n).sqrt();
            if rmse == 0.0 || config.learning_rate == 0.0 {
                continue;
            }
            let mut grad = model.zeros_like();
            for (cache, err) in &caches {
                model.backprop(cache, err / (n * rmse), &mut grad);
            }
            let lr = config.learning_rate;
            for (w, g) in model.tensors_mut().into_iter().zip(grad.tensors()) {
                for (a, b) in w.iter_mut().zip(g) {
                    *a -= lr * b;
                }
            }
        }
        trace.rmse.push(dataset_rmse(&model, dataset)?);
    }
    Ok((model, trace))
}
