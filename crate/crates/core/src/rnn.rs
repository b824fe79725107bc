//! Reference propagation for simple recurrent networks unrolled over time.

use std::sync::Arc;

use crate::activation::ActivationKind;
use crate::error::{check_len, Error, Result};
use crate::linalg::{Blocks, Matrix};
use crate::net::{outer, softmax_xent, FeedForwardNet, ForwardTrace, Layer};

#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentLayer {
    pub weights: Arc<Matrix>,
    /// Square, side equal to the layer output width.
    pub recurrent: Arc<Matrix>,
    pub bias: Vec<f64>,
    pub activation: ActivationKind,
}

impl RecurrentLayer {
    pub fn new(
        weights: Matrix,
        recurrent: Matrix,
        bias: Vec<f64>,
        activation: ActivationKind,
    ) -> Result<Self> {
        check_len("recurrent matrix rows", weights.rows(), recurrent.rows())?;
        check_len("recurrent matrix cols", weights.rows(), recurrent.cols())?;
        let base = Layer::new(weights, bias, activation)?;
        Ok(Self {
            weights: base.weights,
            recurrent: Arc::new(recurrent),
            bias: base.bias,
            activation,
        })
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentNet {
    layers: Vec<RecurrentLayer>,
    horizon: usize,
}

/// Per-time-step traces; `steps[s - 1]` is time step `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnTrace {
    pub steps: Vec<ForwardTrace>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RnnGradients {
    pub weight_grads: Vec<Matrix>,
    pub recurrent_grads: Vec<Matrix>,
    pub bias_grads: Vec<Vec<f64>>,
    /// `layer_errors[s - 1][k]` holds `v(k, s)` for `k = 0..=l`.
    pub layer_errors: Vec<Blocks>,
}

impl RecurrentNet {
    pub fn new(layers: Vec<RecurrentLayer>, horizon: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Invalid("a network needs at least one layer".into()));
        }
        if horizon == 0 {
            return Err(Error::Invalid("horizon must be at least 1".into()));
        }
        for pair in layers.windows(2) {
            check_len("layer chaining", pair[0].outputs(), pair[1].weights.cols())?;
        }
        Ok(Self { layers, horizon })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn layers(&self) -> &[RecurrentLayer] {
        &self.layers
    }

    pub fn layer(&self, k: usize) -> &RecurrentLayer {
        &self.layers[k - 1]
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].weights.cols())
            .chain(self.layers.iter().map(RecurrentLayer::outputs))
            .collect()
    }

    pub fn weight_storage(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.recurrent.len())
            .sum()
    }

    /// The feed-forward network obtained by dropping the recurrent matrices.
    pub fn feed_forward(&self) -> FeedForwardNet {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                weights: Arc::clone(&l.weights),
                bias: l.bias.clone(),
                activation: l.activation,
            })
            .collect();
        FeedForwardNet::new(layers).expect("validated on construction")
    }

    /// Time loop outer (ascending), layer loop inner; the state before `s = 1` is zero.
    pub fn forward(&self, inputs: &[Vec<f64>]) -> Result<RnnTrace> {
        check_len("rnn input sequence", self.horizon, inputs.len())?;
        let mut steps: Vec<ForwardTrace> = Vec::with_capacity(self.horizon);
        for (s, input) in inputs.iter().enumerate() {
            check_len("rnn input", self.layers[0].weights.cols(), input.len())?;
            let mut pre = Vec::with_capacity(self.depth());
            let mut act = Vec::with_capacity(self.depth() + 1);
            act.push(input.clone());
            for (idx, layer) in self.layers.iter().enumerate() {
                let mut y = layer.weights.matvec(&act[idx]);
                if s > 0 {
                    let carried = layer.recurrent.matvec(steps[s - 1].activation(idx + 1));
                    for (yi, ci) in y.iter_mut().zip(&carried) {
                        *yi += ci;
                    }
                }
                for (yi, bi) in y.iter_mut().zip(&layer.bias) {
                    *yi += bi;
                }
                let z = y.iter().map(|&v| layer.activation.value(v)).collect();
                pre.push(y);
                act.push(z);
            }
            steps.push(ForwardTrace {
                pre_activations: pre,
                activations: act,
            });
        }
        Ok(RnnTrace { steps })
    }

    /// Backpropagation through time.
    ///
    /// Every layer, the output layer included, receives the recurrent error
    /// `U(k)ᵀ v(k, s+1)` from the following time step; terms past the horizon
    /// are zero.
    pub fn backward(&self, trace: &RnnTrace, output_errors: &[Vec<f64>]) -> Result<RnnGradients> {
        let l = self.depth();
        let tau = self.horizon;
        check_len("rnn trace horizon", tau, trace.steps.len())?;
        check_len("rnn output errors", tau, output_errors.len())?;
        let widths = self.widths();
        for step in &trace.steps {
            step.check_against(&widths)?;
        }

        let mut errors: Vec<Blocks> = vec![vec![Vec::new(); l + 1]; tau];
        for s in (0..tau).rev() {
            check_len("rnn output error", widths[l], output_errors[s].len())?;
            let step = &trace.steps[s];
            for k in (1..=l).rev() {
                let layer = self.layer(k);
                let mut t = if k == l {
                    output_errors[s].clone()
                } else {
                    self.layer(k + 1).weights.matvec_transposed(&errors[s][k + 1])
                };
                if s + 1 < tau {
                    let carried = layer.recurrent.matvec_transposed(&errors[s + 1][k]);
                    for (ti, ci) in t.iter_mut().zip(&carried) {
                        *ti += ci;
                    }
                }
                errors[s][k] = t
                    .iter()
                    .zip(step.pre(k))
                    .map(|(&v, &y)| v * layer.activation.derivative(y))
                    .collect();
            }
            errors[s][0] = self.layer(1).weights.matvec_transposed(&errors[s][1]);
        }

        let mut weight_grads = Vec::with_capacity(l);
        let mut recurrent_grads = Vec::with_capacity(l);
        let mut bias_grads = Vec::with_capacity(l);
        for k in 1..=l {
            let layer = self.layer(k);
            let mut gw = Matrix::zeros(layer.weights.rows(), layer.weights.cols());
            let mut gu = Matrix::zeros(layer.outputs(), layer.outputs());
            let mut gb = vec![0.0; layer.outputs()];
            for s in 0..tau {
                add_into(&mut gw, &outer(&errors[s][k], trace.steps[s].activation(k - 1)));
                if s > 0 {
                    add_into(&mut gu, &outer(&errors[s][k], trace.steps[s - 1].activation(k)));
                }
                for (g, v) in gb.iter_mut().zip(&errors[s][k]) {
                    *g += v;
                }
            }
            weight_grads.push(gw);
            recurrent_grads.push(gu);
            bias_grads.push(gb);
        }
        Ok(RnnGradients {
            weight_grads,
            recurrent_grads,
            bias_grads,
            layer_errors: errors,
        })
    }

    /// Sum over time of the softmax cross-entropy of each step's output.
    pub fn loss(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
        check_len("rnn targets", self.horizon, targets.len())?;
        let trace = self.forward(inputs)?;
        let mut total = 0.0;
        for (step, target) in trace.steps.iter().zip(targets) {
            total += softmax_xent(step.output(), target)?.0;
        }
        Ok(total)
    }
}

fn add_into(acc: &mut Matrix, m: &Matrix) {
    for (a, v) in acc.as_mut_slice().iter_mut().zip(m.as_slice()) {
        *a += v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn accumulator() -> RecurrentNet {
        let one = || Matrix::from_row_major(1, 1, vec![1.0]).unwrap();
        let layer = RecurrentLayer::new(one(), one(), vec![0.0], ActivationKind::Identity).unwrap();
        RecurrentNet::new(vec![layer], 3).unwrap()
    }

    #[test]
    fn accumulator_produces_running_sum() {
        let net = accumulator();
        let trace = net.forward(&[vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        for (s, step) in trace.steps.iter().enumerate() {
            assert_eq!(step.output(), &[(s + 1) as f64]);
        }
    }

    #[test]
    fn single_step_degenerates_to_feed_forward() {
        let w = Matrix::from_fn(2, 3, |i, j| 0.3 * i as f64 - 0.2 * j as f64 + 0.1);
        let u = Matrix::from_fn(2, 2, |i, j| if i == j { 0.7 } else { -0.4 });
        let layer = RecurrentLayer::new(w, u, vec![0.05, -0.1], ActivationKind::Tanh).unwrap();
        let net = RecurrentNet::new(vec![layer], 1).unwrap();
        let x = vec![0.2, -0.5, 0.9];
        let rt = net.forward(&[x.clone()]).unwrap();
        let ft = net.feed_forward().forward(&x).unwrap();
        assert_eq!(rt.steps[0], ft);

        let eps = vec![0.3, -0.6];
        let rg = net.backward(&rt, &[eps.clone()]).unwrap();
        let fg = net.feed_forward().backward(&ft, &eps).unwrap();
        assert_eq!(rg.layer_errors[0], fg.layer_errors);
        assert_eq!(rg.weight_grads, fg.weight_grads);
        assert!(rg.recurrent_grads[0].as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_errors_give_zero_gradients() {
        let net = accumulator();
        let inputs = vec![vec![1.0], vec![2.0], vec![3.0]];
        let trace = net.forward(&inputs).unwrap();
        let g = net.backward(&trace, &[vec![0.0], vec![0.0], vec![0.0]]).unwrap();
        assert!(g.layer_errors.iter().flatten().flatten().all(|v| *v == 0.0));
        assert!(g.recurrent_grads[0].as_slice()[0] == 0.0);
    }

    #[test]
    fn accumulator_gradients_by_hand() {
        // z(s) = z(s-1) + x(s); with unit errors at every step, v(1, s) = τ - s + 1.
        let net = accumulator();
        let inputs = vec![vec![1.0], vec![1.0], vec![1.0]];
        let trace = net.forward(&inputs).unwrap();
        let g = net.backward(&trace, &[vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        let v: Vec<f64> = g.layer_errors.iter().map(|e| e[1][0]).collect();
        assert_eq!(v, vec![3.0, 2.0, 1.0]);
        // ΔU = Σ_{s≥2} v(s) z(s-1) = 2·1 + 1·2
        assert_eq!(g.recurrent_grads[0].as_slice(), &[4.0]);
    }
}
