//! Active-device forecaster.
//!
//! Two LSTM layers with an attention block between them and a scalar
//! fully-connected head:
//!
//! ```text
//! counts/scale ─▶ LSTM₁ ─▶ LT₁…LT_m ─▶ attention(prev = LT_m) ─▶ context
//!                              │                                   │
//!                              └──────────── [LT_l, context] ◀─────┘
//!                                                 │
//!                                          LSTM₂ ─▶ h_m ─▶ FC ─▶ ×scale ─▶ round
//! ```
//!
//! Counts are divided by `scale` (the largest count seen in training) on the
//! way in and multiplied back before rounding.

mod attention;
mod gradcheck;
mod linalg;
mod lstm;
mod persist;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use attention::{attention_forward, AttentionOutput, AttentionParams};
pub use gradcheck::{gradient_check, GradientCheck};
pub use lstm::{lstm_forward, lstm_forward_traced, CellVariant, LstmLayerParams, LstmStep};
pub use persist::{load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use train::{dataset_rmse, train, write_loss_csv, LossTrace, TrainingConfig};

use crate::error::{Error, Result};
use attention::attention_backward;
use linalg::dot;
use lstm::lstm_backward;

/// Half-width of the uniform initialization interval.
pub const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    pub hidden1: usize,
    pub attention: usize,
    pub hidden2: usize,
    /// History length m.
    pub window: usize,
    pub cell: CellVariant,
}

impl Default for ModelShape {
    fn default() -> Self {
        ModelShape {
            hidden1: 16,
            attention: 16,
            hidden2: 16,
            window: 10,
            cell: CellVariant::Standard,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel {
    pub lstm1: LstmLayerParams,
    pub attention: AttentionParams,
    pub lstm2: LstmLayerParams,
    pub fc_weights: Vec<f64>,
    pub fc_bias: Vec<f64>,
    pub window: usize,
    pub cell: CellVariant,
    /// Count normalization; inputs are divided by it, outputs multiplied.
    pub scale: f64,
}

/// Activations of one forward pass.
pub(crate) struct ForwardCache {
    steps1: Vec<LstmStep>,
    layer1: Vec<Vec<f64>>,
    attention: AttentionOutput,
    steps2: Vec<LstmStep>,
    pub(crate) output: f64,
}

impl PredictorModel {
    pub fn zeros(shape: ModelShape) -> Self {
        PredictorModel {
            lstm1: LstmLayerParams::zeros(1, shape.hidden1),
            attention: AttentionParams::zeros(shape.hidden1, shape.attention),
            lstm2: LstmLayerParams::zeros(2 * shape.hidden1, shape.hidden2),
            fc_weights: vec![0.0; shape.hidden2],
            fc_bias: vec![0.0],
            window: shape.window,
            cell: shape.cell,
            scale: 1.0,
        }
    }

    /// Uniform `[-0.1, 0.1]` initialization from `seed`.
    pub fn random(shape: ModelShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Self::zeros(shape);
        m.lstm1 = LstmLayerParams::random(1, shape.hidden1, INIT_SCALE, &mut rng);
        m.attention = AttentionParams::random(shape.hidden1, shape.attention, INIT_SCALE, &mut rng);
        m.lstm2 = LstmLayerParams::random(2 * shape.hidden1, shape.hidden2, INIT_SCALE, &mut rng);
        for w in m.fc_weights.iter_mut().chain(m.fc_bias.iter_mut()) {
            *w = rand::Rng::random_range(&mut rng, -INIT_SCALE..=INIT_SCALE);
        }
        m
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            hidden1: self.lstm1.hidden_size,
            attention: self.attention.attention_size,
            hidden2: self.lstm2.hidden_size,
            window: self.window,
            cell: self.cell,
        }
    }

    /// Checks that the layers chain and every parameter is finite.
    pub fn validate(&self) -> Result<()> {
        self.lstm1.validate()?;
        self.attention.validate()?;
        self.lstm2.validate()?;
        let h1 = self.lstm1.hidden_size;
        let checks = [
            ("first layer input", self.lstm1.input_size, 1),
            ("attention feature size", self.attention.feature_size, h1),
            ("second layer input", self.lstm2.input_size, 2 * h1),
            ("fully-connected weights", self.fc_weights.len(), self.lstm2.hidden_size),
            ("fully-connected bias", self.fc_bias.len(), 1),
        ];
        for (what, got, expected) in checks {
            if got != expected {
                return Err(Error::Shape { what, expected, got });
            }
        }
        if self.window == 0 {
            return Err(Error::Domain("history window must be at least 1".into()));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Domain(format!(
                "normalization scale must be positive, got {}",
                self.scale
            )));
        }
        if self.tensors().iter().flat_map(|t| t.iter()).any(|w| !w.is_finite()) {
            return Err(Error::Domain("model parameters must be finite".into()));
        }
        Ok(())
    }

    /// Parameter tensors in persistence order.
    pub fn tensors(&self) -> [&[f64]; 9] {
        [
            &self.lstm1.weights,
            &self.lstm1.bias,
            &self.attention.query,
            &self.attention.input_weights,
            &self.attention.recurrent_weights,
            &self.lstm2.weights,
            &self.lstm2.bias,
            &self.fc_weights,
            &self.fc_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 9] {
        [
            &mut self.lstm1.weights,
            &mut self.lstm1.bias,
            &mut self.attention.query,
            &mut self.attention.input_weights,
            &mut self.attention.recurrent_weights,
            &mut self.lstm2.weights,
            &mut self.lstm2.bias,
            &mut self.fc_weights,
            &mut self.fc_bias,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Same shape, all parameters zero; used as a gradient accumulator.
    pub(crate) fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.iter_mut().for_each(|w| *w = 0.0);
        }
        z
    }

    pub(crate) fn forward_cached(&self, history: &[f64]) -> Result<ForwardCache> {
        if history.len() != self.window {
            return Err(Error::Shape {
                what: "history window",
                expected: self.window,
                got: history.len(),
            });
        }
        let h1 = self.lstm1.hidden_size;
        let h2 = self.lstm2.hidden_size;
        let inputs: Vec<Vec<f64>> = history.iter().map(|&x| vec![x]).collect();
        let steps1 = lstm_forward_traced(&self.lstm1, &inputs, &vec![0.0; h1], &vec![0.0; h1], self.cell)?;
        let layer1: Vec<Vec<f64>> = steps1.iter().map(|s| s.hidden.clone()).collect();
        let previous = layer1.last().expect("window >= 1").clone();
        let attention = attention_forward(&self.attention, &layer1, &previous)?;
        let inputs2: Vec<Vec<f64>> = layer1
            .iter()
            .map(|lt| lt.iter().chain(&attention.context).copied().collect())
            .collect();
        let steps2 = lstm_forward_traced(&self.lstm2, &inputs2, &vec![0.0; h2], &vec![0.0; h2], self.cell)?;
        let last = &steps2.last().expect("window >= 1").hidden;
        let output = dot(&self.fc_weights, last) + self.fc_bias[0];
        Ok(ForwardCache {
            steps1,
            layer1,
            attention,
            steps2,
            output,
        })
    }

    /// Network output for an already-normalized history.
    pub fn forward_normalized(&self, history: &[f64]) -> Result<f64> {
        Ok(self.forward_cached(history)?.output)
    }

    /// Unrounded forecast in device counts.
    pub fn forecast(&self, history: &[usize]) -> Result<f64> {
        let x: Vec<f64> = history.iter().map(|&c| c as f64 / self.scale).collect();
        Ok(self.forward_normalized(&x)? * self.scale)
    }

    /// Accumulates `d_output · ∂output/∂θ` into `grad`.
    pub(crate) fn backprop(&self, cache: &ForwardCache, d_output: f64, grad: &mut PredictorModel) {
        let m = self.window;
        let h1 = self.lstm1.hidden_size;
        let last = &cache.steps2[m - 1].hidden;
        for (g, h) in grad.fc_weights.iter_mut().zip(last) {
            *g += d_output * h;
        }
        grad.fc_bias[0] += d_output;

        let mut d_h2 = vec![vec![0.0; self.lstm2.hidden_size]; m];
        d_h2[m - 1] = self.fc_weights.iter().map(|w| w * d_output).collect();
        let d_in2 = lstm_backward(&self.lstm2, &cache.steps2, &d_h2, self.cell, &mut grad.lstm2);

        let mut d_layer1: Vec<Vec<f64>> = d_in2.iter().map(|d| d[..h1].to_vec()).collect();
        let mut d_context = vec![0.0; h1];
        for d in &d_in2 {
            for (c, v) in d_context.iter_mut().zip(&d[h1..]) {
                *c += v;
            }
        }
        let previous = &cache.layer1[m - 1];
        let (d_att, d_prev) = attention_backward(
            &self.attention,
            &cache.layer1,
            previous,
            &cache.attention,
            &d_context,
            &mut grad.attention,
        );
        for (dl, da) in d_layer1.iter_mut().zip(&d_att) {
            for (a, b) in dl.iter_mut().zip(da) {
                *a += b;
            }
        }
        for (a, b) in d_layer1[m - 1].iter_mut().zip(&d_prev) {
            *a += b;
        }
        lstm_backward(&self.lstm1, &cache.steps1, &d_layer1, self.cell, &mut grad.lstm1);
    }
}

/// Forecast for the next slot, rounded and clamped at zero.
pub fn predict_active(model: &PredictorModel, history: &[usize]) -> Result<usize> {
    Ok(round_count(model.forecast(history)?))
}

/// Nearest non-negative integer.
pub fn round_count(value: f64) -> usize {
    if value.is_finite() && value > 0.0 {
        value.round() as usize
    } else {
        0
    }
}
