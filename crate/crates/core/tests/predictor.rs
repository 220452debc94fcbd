//! Predictor properties: attention, gates, gradients and training behaviour.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use shra::predictor::{
    attention_forward, dataset_rmse, gradient_check, load_model, lstm_forward_traced, predict_active, save_model,
    train, AttentionParams, CellVariant, LstmLayerParams, ModelShape, PredictorModel, TrainingConfig,
};
use shra::traffic::{generate_training_traces, sliding_pairs, TrafficConfig};

fn small_shape(window: usize) -> ModelShape {
    ModelShape {
        hidden1: 4,
        attention: 4,
        hidden2: 4,
        window,
        cell: CellVariant::Standard,
    }
}

proptest! {
    #[test]
    fn attention_weights_form_a_distribution(
        steps in 1usize..12,
        feature in 1usize..6,
        att in 1usize..6,
        scale in 0.01f64..3.0,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = AttentionParams::random(feature, att, scale, &mut rng);
        let outputs: Vec<Vec<f64>> = (0..steps)
            .map(|t| (0..feature).map(|k| ((t * 7 + k * 3) as f64).sin()).collect())
            .collect();
        let prev = outputs[steps - 1].clone();
        let out = attention_forward(&params, &outputs, &prev).unwrap();
        prop_assert_eq!(out.weights.len(), steps);
        prop_assert!(out.weights.iter().all(|&w| w > 0.0 && w <= 1.0));
        prop_assert!((out.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for k in 0..feature {
            let lo = outputs.iter().map(|o| o[k]).fold(f64::INFINITY, f64::min);
            let hi = outputs.iter().map(|o| o[k]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(out.context[k] >= lo - 1e-12 && out.context[k] <= hi + 1e-12);
        }
    }

    #[test]
    fn gates_stay_open_interval(
        hidden in 1usize..6,
        scale in 0.01f64..2.0,
        xs in proptest::collection::vec(-1.0f64..1.0, 1..10),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = LstmLayerParams::random(1, hidden, scale, &mut rng);
        let inputs: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let zero = vec![0.0; hidden];
        for variant in [CellVariant::Standard, CellVariant::ForgetCandidateProduct] {
            let steps = lstm_forward_traced(&params, &inputs, &zero, &zero, variant).unwrap();
            for s in &steps {
                for g in s.forget.iter().chain(&s.input).chain(&s.output) {
                    prop_assert!(*g > 0.0 && *g < 1.0);
                }
                prop_assert!(s.candidate.iter().all(|c| c.abs() < 1.0));
                prop_assert!(s.hidden.iter().all(|h| h.abs() < 1.0));
            }
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    for (seed, cell) in [(1, CellVariant::Standard), (2, CellVariant::ForgetCandidateProduct)] {
        let mut model = PredictorModel::random(small_shape(6), seed);
        for t in model.tensors_mut() {
            t.iter_mut().for_each(|w| *w *= 8.0);
        }
        model.cell = cell;
        let check = gradient_check(&model, &[0.2, 0.9, 0.1, 0.5, 0.7, 0.3], 0.4).unwrap();
        assert!(
            check.max_relative_error < 1e-4,
            "{cell:?}: {}",
            check.max_relative_error
        );
    }
}

#[test]
fn zero_model_gradient_is_exact() {
    let model = PredictorModel::zeros(small_shape(5));
    let check = gradient_check(&model, &[0.5; 5], 0.25).unwrap();
    assert!(check.max_abs_error < 1e-8, "{}", check.max_abs_error);
    // only the output bias sees a gradient: d/db ½(b - y)² = -y
    let nonzero: Vec<f64> = check.analytic.iter().copied().filter(|g| *g != 0.0).collect();
    assert_eq!(nonzero, vec![-0.25]);
}

#[test]
fn single_sample_descent_moves_bias_by_lr() {
    // zero weights: output = bias, and one-sample RMSE has gradient sign(b - y)
    let data = vec![(vec![0.0; 3], 5.0)];
    let cfg = TrainingConfig {
        learning_rate: 0.01,
        epochs: 50,
        ..TrainingConfig::default()
    };
    let (model, loss) = train(PredictorModel::zeros(small_shape(3)), &data, &cfg).unwrap();
    assert_eq!(model.scale, 5.0);
    assert!((model.fc_bias[0] - 0.5).abs() < 1e-12);
    for (epoch, rmse) in loss.rmse.iter().enumerate() {
        let expected = 5.0 * (1.0 - 0.01 * (epoch + 1) as f64);
        assert!((rmse - expected).abs() < 1e-9, "epoch {epoch}: {rmse}");
    }
}

#[test]
fn zero_learning_rate_is_a_no_op() {
    let data = sliding_pairs(&[1, 4, 2, 8, 5, 7, 1, 3], 3);
    let start = PredictorModel::random(small_shape(3), 3);
    let cfg = TrainingConfig {
        learning_rate: 0.0,
        epochs: 5,
        ..TrainingConfig::default()
    };
    let (model, loss) = train(start.clone(), &data, &cfg).unwrap();
    assert_eq!(model.tensors(), start.tensors());
    assert_eq!(loss.rmse.len(), 5);
    assert!(loss.rmse.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn poisson_fit_approaches_noise_floor() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let trace = generate_training_traces(&TrafficConfig::poisson(3.0), 310, 10, &mut rng).unwrap();
    let shape = ModelShape {
        hidden1: 8,
        attention: 8,
        hidden2: 8,
        ..ModelShape::default()
    };
    let cfg = TrainingConfig {
        epochs: 60,
        ..TrainingConfig::default()
    };
    let (model, _) = train(PredictorModel::random(shape, 17), &trace.pairs, &cfg).unwrap();
    let rmse = dataset_rmse(&model, &trace.pairs).unwrap();
    assert!(rmse <= 3f64.sqrt() + 0.1, "rmse {rmse}");
}

#[test]
fn saved_model_forecasts_identically() {
    let data = sliding_pairs(&[3, 5, 2, 6, 4, 3, 5, 2, 6, 4, 3, 5], 4);
    let cfg = TrainingConfig {
        epochs: 5,
        ..TrainingConfig::default()
    };
    let (model, _) = train(PredictorModel::random(small_shape(4), 8), &data, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    save_model(&model, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, model);
    let history = [4, 3, 5, 2];
    assert_eq!(
        back.forecast(&history).unwrap().to_bits(),
        model.forecast(&history).unwrap().to_bits()
    );
    assert_eq!(
        predict_active(&back, &history).unwrap(),
        predict_active(&model, &history).unwrap()
    );
}
