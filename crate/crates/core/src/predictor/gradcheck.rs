//! Finite-difference check of the BPTT gradients.

use super::PredictorModel;
use crate::error::Result;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Gradients smaller than this are compared on an absolute scale.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub max_abs_error: f64,
    /// Flattened in [`PredictorModel::tensors`] order.
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

fn half_squared_error(model: &PredictorModel, history: &[f64], target: f64) -> Result<f64> {
    let y = model.forward_normalized(history)?;
    Ok(0.5 * (y - target).powi(2))
}

/// Compares backprop against central differences of `½(ŷ - y)²` on every
/// parameter. `history` and `target` are in normalized units.
pub fn gradient_check(model: &PredictorModel, history: &[f64], target: f64) -> Result<GradientCheck> {
    let cache = model.forward_cached(history)?;
    let mut grad = model.zeros_like();
    model.backprop(&cache, cache.output - target, &mut grad);
    let analytic: Vec<f64> = grad.tensors().iter().flat_map(|t| t.iter().copied()).collect();

    let mut probe = model.clone();
    let mut numeric = Vec::with_capacity(analytic.len());
    for t in 0..9 {
        for k in 0..probe.tensors()[t].len() {
            let orig = probe.tensors()[t][k];
            probe.tensors_mut()[t][k] = orig + FD_STEP;
            let plus = half_squared_error(&probe, history, target)?;
            probe.tensors_mut()[t][k] = orig - FD_STEP;
            let minus = half_squared_error(&probe, history, target)?;
            probe.tensors_mut()[t][k] = orig;
            numeric.push((plus - minus) / (2.0 * FD_STEP));
        }
    }

    let (mut max_rel, mut max_abs) = (0.0f64, 0.0f64);
    for (a, n) in analytic.iter().zip(&numeric) {
        let abs = (a - n).abs();
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(abs / a.abs().max(n.abs()).max(RELATIVE_FLOOR));
    }
    Ok(GradientCheck {
        max_relative_error: max_rel,
        max_abs_error: max_abs,
        analytic,
        numeric,
    })
}
