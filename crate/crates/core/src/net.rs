//! Sequential reference propagation for feed-forward networks.
//!
//! This is the ground truth every triangular solver is checked against, so the
//! evaluation order is fixed: layers ascending on the way forward, descending
//! on the way back.

use std::sync::Arc;

use crate::activation::ActivationKind;
use crate::error::{check_len, Error, Result};
use crate::linalg::{Blocks, Matrix};

/// One affine layer followed by a component-wise activation.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `n_out × n_in`, shared with any system assembled from this network.
    pub weights: Arc<Matrix>,
    pub bias: Vec<f64>,
    pub activation: ActivationKind,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: ActivationKind) -> Result<Self> {
        check_len("layer bias", weights.rows(), bias.len())?;
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::Invalid("layer dimensions must be at least 1".into()));
        }
        Ok(Self {
            weights: Arc::new(weights),
            bias,
            activation,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeedForwardNet {
    layers: Vec<Layer>,
}

impl FeedForwardNet {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Invalid("a network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            check_len("layer chaining", pair[0].outputs(), pair[1].inputs())?;
        }
        Ok(Self { layers })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Layer `k` in 1-based numbering.
    pub fn layer(&self, k: usize) -> &Layer {
        &self.layers[k - 1]
    }

    /// `[n_0, n_1, ..., n_l]` with `n_0` the input width.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs())
            .chain(self.layers.iter().map(Layer::outputs))
            .collect()
    }

    /// Total number of weight entries (biases excluded).
    pub fn weight_storage(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len()).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardTrace> {
        check_len("network input", self.layers[0].inputs(), input.len())?;
        let mut pre = Vec::with_capacity(self.depth());
        let mut act = Vec::with_capacity(self.depth() + 1);
        act.push(input.to_vec());
        for layer in &self.layers {
            let z_prev = act.last().expect("input pushed");
            let mut y = layer.weights.matvec(z_prev);
            for (yi, bi) in y.iter_mut().zip(&layer.bias) {
                *yi += bi;
            }
            let z = y.iter().map(|&v| layer.activation.value(v)).collect();
            pre.push(y);
            act.push(z);
        }
        Ok(ForwardTrace {
            pre_activations: pre,
            activations: act,
        })
    }

    /// Propagates the output-layer error `epsilon` back through the network.
    pub fn backward(&self, trace: &ForwardTrace, epsilon: &[f64]) -> Result<GradientSet> {
        trace.check_against(&self.widths())?;
        let l = self.depth();
        check_len("output error", self.layer(l).outputs(), epsilon.len())?;

        let mut errors: Blocks = vec![Vec::new(); l + 1];
        let fprime = |k: usize, i: usize| self.layer(k).activation.derivative(trace.pre(k)[i]);

        errors[l] = epsilon
            .iter()
            .enumerate()
            .map(|(i, &e)| e * fprime(l, i))
            .collect();
        for k in (2..=l).rev() {
            let t = self.layer(k).weights.matvec_transposed(&errors[k]);
            errors[k - 1] = t
                .iter()
                .enumerate()
                .map(|(i, &v)| v * fprime(k - 1, i))
                .collect();
        }
        errors[0] = self.layer(1).weights.matvec_transposed(&errors[1]);

        let weight_grads = (1..=l)
            .map(|k| outer(&errors[k], trace.activation(k - 1)))
            .collect();
        let bias_grads = errors[1..].to_vec();
        Ok(GradientSet {
            weight_grads,
            bias_grads,
            layer_errors: errors,
        })
    }

    /// Loss of one sample under softmax cross-entropy on the final activations.
    pub fn loss(&self, input: &[f64], target: &[f64]) -> Result<f64> {
        let trace = self.forward(input)?;
        Ok(softmax_xent(trace.output(), target)?.0)
    }

    /// Mini-batch SGD: `W ← W − (α/r) Σ ΔW`, likewise for biases.
    pub fn sgd_step(&self, grads: &[GradientSet], rate: f64, batch: usize) -> Result<Self> {
        check_len("sgd batch size", batch, grads.len())?;
        if batch == 0 {
            return Err(Error::Invalid("batch size must be positive".into()));
        }
        let scale = rate / batch as f64;
        let mut layers = Vec::with_capacity(self.depth());
        for (k, layer) in self.layers.iter().enumerate() {
            let mut w_sum = Matrix::zeros(layer.outputs(), layer.inputs());
            let mut b_sum = vec![0.0; layer.outputs()];
            for g in grads {
                let gw = &g.weight_grads[k];
                if (gw.rows(), gw.cols()) != (w_sum.rows(), w_sum.cols()) {
                    return Err(Error::dim("sgd weight gradient", w_sum.len(), gw.len()));
                }
                check_len("sgd bias gradient", b_sum.len(), g.bias_grads[k].len())?;
                for (s, v) in w_sum.as_mut_slice().iter_mut().zip(gw.as_slice()) {
                    *s += v;
                }
                for (s, v) in b_sum.iter_mut().zip(&g.bias_grads[k]) {
                    *s += v;
                }
            }
            let mut w = (*layer.weights).clone();
            for (wv, s) in w.as_mut_slice().iter_mut().zip(w_sum.as_slice()) {
                *wv -= scale * s;
            }
            let b = layer
                .bias
                .iter()
                .zip(&b_sum)
                .map(|(b, s)| b - scale * s)
                .collect();
            layers.push(Layer::new(w, b, layer.activation)?);
        }
        FeedForwardNet::new(layers)
    }
}

/// Recorded pre-activations `y(k)` and activations `z(k)` of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    /// `pre_activations[k - 1]` holds `y(k)` for `k = 1..=l`.
    pub pre_activations: Vec<Vec<f64>>,
    /// `activations[k]` holds `z(k)`; `activations[0]` is the input.
    pub activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn depth(&self) -> usize {
        self.pre_activations.len()
    }

    pub fn pre(&self, k: usize) -> &[f64] {
        &self.pre_activations[k - 1]
    }

    pub fn activation(&self, k: usize) -> &[f64] {
        &self.activations[k]
    }

    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace holds the input")
    }

    pub(crate) fn check_against(&self, widths: &[usize]) -> Result<()> {
        check_len("trace depth", widths.len() - 1, self.pre_activations.len())?;
        check_len("trace activations", widths.len(), self.activations.len())?;
        for (k, &w) in widths.iter().enumerate() {
            check_len("trace activation width", w, self.activations[k].len())?;
            if k > 0 {
                check_len("trace pre-activation width", w, self.pre(k).len())?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub weight_grads: Vec<Matrix>,
    pub bias_grads: Vec<Vec<f64>>,
    /// `v(0) ..= v(l)`.
    pub layer_errors: Blocks,
}

pub(crate) fn outer(a: &[f64], b: &[f64]) -> Matrix {
    Matrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j])
}

/// Softmax cross-entropy. Returns the loss and its gradient `p − z*` with
/// respect to the logits.
pub fn softmax_xent(logits: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_len("softmax target", logits.len(), target.len())?;
    let p = softmax(logits);
    let loss = -target
        .iter()
        .zip(&p)
        .filter(|(t, _)| **t != 0.0)
        .map(|(t, pi)| t * pi.ln())
        .sum::<f64>();
    let grad = p.iter().zip(target).map(|(pi, t)| pi - t).collect();
    Ok((loss, grad))
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let shift = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - shift).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
