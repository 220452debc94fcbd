//! Additive attention over the first layer's outputs.
//!
//! Scores are `e_l = Qᵀ tanh(W_in·LT_l + W_rec·prev)`; the weights are their
//! softmax and the context is the weighted sum of the `LT_l`. `W_in` is shared
//! across time steps.

use rand::Rng;

use super::linalg::{dot, matvec_add, matvec_t_add, outer_add};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// Width of each `LT_l` (and of `prev`).
    pub feature_size: usize,
    pub attention_size: usize,
    /// `Q`, length `attention_size`.
    pub query: Vec<f64>,
    /// `attention_size × feature_size`.
    pub input_weights: Vec<f64>,
    /// `attention_size × feature_size`.
    pub recurrent_weights: Vec<f64>,
}

impl AttentionParams {
    pub fn zeros(feature_size: usize, attention_size: usize) -> Self {
        AttentionParams {
            feature_size,
            attention_size,
            query: vec![0.0; attention_size],
            input_weights: vec![0.0; attention_size * feature_size],
            recurrent_weights: vec![0.0; attention_size * feature_size],
        }
    }

    pub fn random<R: Rng + ?Sized>(feature_size: usize, attention_size: usize, scale: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(feature_size, attention_size);
        for w in p
            .query
            .iter_mut()
            .chain(p.input_weights.iter_mut())
            .chain(p.recurrent_weights.iter_mut())
        {
            *w = rng.random_range(-scale..=scale);
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let (d, f) = (self.attention_size, self.feature_size);
        if d == 0 || f == 0 {
            return Err(Error::Domain("attention sizes must be positive".into()));
        }
        for (what, len, expected) in [
            ("attention query", self.query.len(), d),
            ("attention input weights", self.input_weights.len(), d * f),
            ("attention recurrent weights", self.recurrent_weights.len(), d * f),
        ] {
            if len != expected {
                return Err(Error::Shape {
                    what,
                    expected,
                    got: len,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub scores: Vec<f64>,
    /// Softmax of `scores`; non-negative, sums to one.
    pub weights: Vec<f64>,
    pub context: Vec<f64>,
    /// `tanh(W_in·LT_l + W_rec·prev)` per step.
    pub(crate) activations: Vec<Vec<f64>>,
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn attention_forward(params: &AttentionParams, outputs: &[Vec<f64>], previous: &[f64]) -> Result<AttentionOutput> {
    let (d, f) = (params.attention_size, params.feature_size);
    if outputs.is_empty() {
        return Err(Error::Domain("attention needs at least one time step".into()));
    }
    if previous.len() != f {
        return Err(Error::Shape {
            what: "attention previous context",
            expected: f,
            got: previous.len(),
        });
    }
    let mut recurrent = vec![0.0; d];
    matvec_add(&params.recurrent_weights, d, f, previous, &mut recurrent);

    let mut activations = Vec::with_capacity(outputs.len());
    let mut scores = Vec::with_capacity(outputs.len());
    for lt in outputs {
        if lt.len() != f {
            return Err(Error::Shape {
                what: "attention input",
                expected: f,
                got: lt.len(),
            });
        }
        let mut u = recurrent.clone();
        matvec_add(&params.input_weights, d, f, lt, &mut u);
        let a: Vec<f64> = u.iter().map(|v| v.tanh()).collect();
        scores.push(dot(&params.query, &a));
        activations.push(a);
    }
    let weights = softmax(&scores);
    let mut context = vec![0.0; f];
    for (w, lt) in weights.iter().zip(outputs) {
        for (c, v) in context.iter_mut().zip(lt) {
            *c += w * v;
        }
    }
    Ok(AttentionOutput {
        scores,
        weights,
        context,
        activations,
    })
}

/// Returns `(d_outputs, d_previous)` and accumulates parameter gradients.
pub(crate) fn attention_backward(
    params: &AttentionParams,
    outputs: &[Vec<f64>],
    previous: &[f64],
    fwd: &AttentionOutput,
    d_context: &[f64],
    grad: &mut AttentionParams,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (d, f) = (params.attention_size, params.feature_size);
    let d_weights: Vec<f64> = outputs.iter().map(|lt| dot(d_context, lt)).collect();
    let mean: f64 = fwd.weights.iter().zip(&d_weights).map(|(w, g)| w * g).sum();

    let mut d_outputs: Vec<Vec<f64>> = fwd
        .weights
        .iter()
        .map(|&w| d_context.iter().map(|g| w * g).collect())
        .collect();
    let mut d_previous = vec![0.0; f];
    let mut du_total = vec![0.0; d];
    for (l, lt) in outputs.iter().enumerate() {
        let de = fwd.weights[l] * (d_weights[l] - mean);
        let a = &fwd.activations[l];
        for (q, av) in grad.query.iter_mut().zip(a) {
            *q += de * av;
        }
        let du: Vec<f64> = (0..d).map(|k| de * params.query[k] * (1.0 - a[k] * a[k])).collect();
        outer_add(&mut grad.input_weights, f, &du, lt);
        matvec_t_add(&params.input_weights, d, f, &du, &mut d_outputs[l]);
        for (t, v) in du_total.iter_mut().zip(&du) {
            *t += v;
        }
    }
    outer_add(&mut grad.recurrent_weights, f, &du_total, previous);
    matvec_t_add(&params.recurrent_weights, d, f, &du_total, &mut d_previous);
    (d_outputs, d_previous)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn steps() -> Vec<Vec<f64>> {
        vec![vec![0.2, -0.1, 0.4], vec![0.9, 0.3, -0.5], vec![-0.6, 0.0, 0.1]]
    }

    #[test]
    fn zero_query_gives_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = AttentionParams::random(3, 4, 0.5, &mut rng);
        p.query.iter_mut().for_each(|q| *q = 0.0);
        let out = attention_forward(&p, &steps(), &[0.1, 0.2, 0.3]).unwrap();
        for w in &out.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
        let mean: Vec<f64> = (0..3)
            .map(|k| steps().iter().map(|s| s[k]).sum::<f64>() / 3.0)
            .collect();
        for (c, m) in out.context.iter().zip(mean) {
            assert!((c - m).abs() < 1e-12);
        }
    }

    #[test]
    fn single_step_takes_all_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = AttentionParams::random(3, 2, 1.0, &mut rng);
        let lt = vec![vec![0.5, -0.25, 0.125]];
        let out = attention_forward(&p, &lt, &[0.0; 3]).unwrap();
        assert_eq!(out.weights, vec![1.0]);
        assert_eq!(out.context, lt[0]);
    }

    #[test]
    fn equal_scores_are_uniform() {
        let w = softmax(&[2.5; 7]);
        assert!(w.iter().all(|x| (x - 1.0 / 7.0).abs() < 1e-15));
    }

    #[test]
    fn softmax_survives_large_scores() {
        let w = softmax(&[1000.0, 0.0, -1000.0]);
        assert!((w[0] - 1.0).abs() < 1e-12 && w.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn shape_errors() {
        let p = AttentionParams::zeros(3, 2);
        assert!(attention_forward(&p, &[], &[0.0; 3]).is_err());
        assert!(attention_forward(&p, &steps(), &[0.0; 2]).is_err());
        assert!(attention_forward(&p, &[vec![1.0]], &[0.0; 3]).is_err());
    }
}
