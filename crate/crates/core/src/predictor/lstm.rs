//! LSTM layer with explicit BPTT.
//!
//! Every gate has the affine form `σ(b + W·[h_{t-1}, x_t])`. Gate rows are
//! stacked in the order forget, input, output, candidate.

use rand::Rng;

use super::linalg::{matvec_add, matvec_t_add, outer_add, sigmoid};
use crate::error::{Error, Result};

/// Recurrence used by a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellVariant {
    /// Forget/input/output gates with a carried cell state.
    #[default]
    Standard,
    /// Memoryless cell whose output is `forget ⊙ candidate`; input and output
    /// gates are computed but unused.
    ForgetCandidateProduct,
}

impl CellVariant {
    pub(crate) fn code(self) -> u32 {
        match self {
            CellVariant::Standard => 0,
            CellVariant::ForgetCandidateProduct => 1,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(CellVariant::Standard),
            1 => Some(CellVariant::ForgetCandidateProduct),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub input_size: usize,
    pub hidden_size: usize,
    /// `4H × (H + I)`, columns ordered `[h_{t-1}, x_t]`.
    pub weights: Vec<f64>,
    /// `4H`.
    pub bias: Vec<f64>,
}

impl LstmLayerParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        LstmLayerParams {
            input_size,
            hidden_size,
            weights: vec![0.0; 4 * hidden_size * (hidden_size + input_size)],
            bias: vec![0.0; 4 * hidden_size],
        }
    }

    /// Uniform in `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(input_size: usize, hidden_size: usize, scale: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_size, hidden_size);
        for w in p.weights.iter_mut().chain(p.bias.iter_mut()) {
            *w = rng.random_range(-scale..=scale);
        }
        p
    }

    pub fn columns(&self) -> usize {
        self.hidden_size + self.input_size
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden_size;
        if h == 0 || self.input_size == 0 {
            return Err(Error::Domain("LSTM layer sizes must be positive".into()));
        }
        if self.weights.len() != 4 * h * self.columns() {
            return Err(Error::Shape {
                what: "LSTM weights",
                expected: 4 * h * self.columns(),
                got: self.weights.len(),
            });
        }
        if self.bias.len() != 4 * h {
            return Err(Error::Shape {
                what: "LSTM bias",
                expected: 4 * h,
                got: self.bias.len(),
            });
        }
        if self.weights.iter().chain(&self.bias).any(|w| !w.is_finite()) {
            return Err(Error::Domain("LSTM parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Everything one time step needs for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    /// `[h_{t-1}, x_t]`.
    pub concat: Vec<f64>,
    pub cell_prev: Vec<f64>,
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    pub candidate: Vec<f64>,
    pub cell: Vec<f64>,
    pub cell_tanh: Vec<f64>,
    pub hidden: Vec<f64>,
}

/// Forward pass keeping per-step activations.
pub fn lstm_forward_traced(
    params: &LstmLayerParams,
    inputs: &[Vec<f64>],
    h0: &[f64],
    c0: &[f64],
    variant: CellVariant,
) -> Result<Vec<LstmStep>> {
    let h = params.hidden_size;
    let cols = params.columns();
    for (what, len) in [("initial hidden state", h0.len()), ("initial cell state", c0.len())] {
        if len != h {
            return Err(Error::Shape {
                what,
                expected: h,
                got: len,
            });
        }
    }
    let mut h_prev = h0.to_vec();
    let mut c_prev = c0.to_vec();
    let mut steps = Vec::with_capacity(inputs.len());
    for x in inputs {
        if x.len() != params.input_size {
            return Err(Error::Shape {
                what: "LSTM input",
                expected: params.input_size,
                got: x.len(),
            });
        }
        let mut concat = Vec::with_capacity(cols);
        concat.extend_from_slice(&h_prev);
        concat.extend_from_slice(x);
        let mut z = params.bias.clone();
        matvec_add(&params.weights, 4 * h, cols, &concat, &mut z);

        let forget: Vec<f64> = z[..h].iter().map(|&v| sigmoid(v)).collect();
        let input: Vec<f64> = z[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
        let output: Vec<f64> = z[2 * h..3 * h].iter().map(|&v| sigmoid(v)).collect();
        let candidate: Vec<f64> = z[3 * h..].iter().map(|v| v.tanh()).collect();

        let (cell, cell_tanh, hidden) = match variant {
            CellVariant::Standard => {
                let cell: Vec<f64> = (0..h)
                    .map(|k| forget[k] * c_prev[k] + input[k] * candidate[k])
                    .collect();
                let cell_tanh: Vec<f64> = cell.iter().map(|c| c.tanh()).collect();
                let hidden = (0..h).map(|k| output[k] * cell_tanh[k]).collect();
                (cell, cell_tanh, hidden)
            }
            CellVariant::ForgetCandidateProduct => {
                let hidden = (0..h).map(|k| forget[k] * candidate[k]).collect();
                (vec![0.0; h], vec![0.0; h], hidden)
            }
        };
        h_prev.clone_from(&hidden);
        let next_cell = cell.clone();
        steps.push(LstmStep {
            concat,
            cell_prev: std::mem::replace(&mut c_prev, next_cell),
            forget,
            input,
            output,
            candidate,
            cell,
            cell_tanh,
            hidden,
        });
    }
    Ok(steps)
}

/// Hidden state after every step.
pub fn lstm_forward(
    params: &LstmLayerParams,
    inputs: &[Vec<f64>],
    h0: &[f64],
    c0: &[f64],
    variant: CellVariant,
) -> Result<Vec<Vec<f64>>> {
    Ok(lstm_forward_traced(params, inputs, h0, c0, variant)?
        .into_iter()
        .map(|s| s.hidden)
        .collect())
}

/// BPTT through one layer. `d_hidden[t]` is the loss gradient arriving at
/// `h_t` from above; parameter gradients are accumulated into `grad` and the
/// input gradients are returned.
pub(crate) fn lstm_backward(
    params: &LstmLayerParams,
    steps: &[LstmStep],
    d_hidden: &[Vec<f64>],
    variant: CellVariant,
    grad: &mut LstmLayerParams,
) -> Vec<Vec<f64>> {
    let h = params.hidden_size;
    let cols = params.columns();
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut d_inputs = vec![Vec::new(); steps.len()];
    let mut dz = vec![0.0; 4 * h];

    for (t, step) in steps.iter().enumerate().rev() {
        for k in 0..h {
            let dh = d_hidden[t][k] + dh_next[k];
            let (f, i, o, cc) = (step.forget[k], step.input[k], step.output[k], step.candidate[k]);
            let (df, di, d_o, dcc) = match variant {
                CellVariant::Standard => {
                    let ct = step.cell_tanh[k];
                    let dc = dc_next[k] + dh * o * (1.0 - ct * ct);
                    dc_next[k] = dc * f;
                    (dc * step.cell_prev[k], dc * cc, dh * ct, dc * i)
                }
                CellVariant::ForgetCandidateProduct => (dh * cc, 0.0, 0.0, dh * f),
            };
            dz[k] = df * f * (1.0 - f);
            dz[h + k] = di * i * (1.0 - i);
            dz[2 * h + k] = d_o * o * (1.0 - o);
            dz[3 * h + k] = dcc * (1.0 - cc * cc);
        }
        outer_add(&mut grad.weights, cols, &dz, &step.concat);
        for (b, d) in grad.bias.iter_mut().zip(&dz) {
            *b += d;
        }
        let mut d_concat = vec![0.0; cols];
        matvec_t_add(&params.weights, 4 * h, cols, &dz, &mut d_concat);
        dh_next.copy_from_slice(&d_concat[..h]);
        d_inputs[t] = d_concat[h..].to_vec();
    }
    d_inputs
}
