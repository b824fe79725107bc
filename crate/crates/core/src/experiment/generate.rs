//! Seeded network and data generation.
//!
//! All randomness comes from SplitMix64. A value in `[lo, hi]` is
//! `lo + (hi − lo) · u` with `u = (next_u64 >> 11) · 2⁻⁵³`. Network
//! parameters, sample data and perturbations each use their own stream,
//! seeded with the spec seed XOR a fixed per-stream constant.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::Result;
use crate::linalg::Matrix;
use crate::net::{softmax_xent, FeedForwardNet, Layer};
use crate::rnn::{RecurrentLayer, RecurrentNet};

use super::spec::{ExperimentSpec, NetworkKind};

pub const NETWORK_STREAM: u64 = 0;
pub const DATA_STREAM: u64 = 0x5DA7_A5EE_D000_0001;
pub const PERTURBATION_STREAM: u64 = 0x7E57_0015_E000_0002;

pub struct SeededRng(SplitMix64);

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self(SplitMix64::seed_from_u64(seed ^ stream))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn matrix(&mut self, rows: usize, cols: usize, bound: f64) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.uniform(-bound, bound))
    }

    pub fn vector(&mut self, len: usize, bound: f64) -> Vec<f64> {
        (0..len).map(|_| self.uniform(-bound, bound)).collect()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.unit() * n as f64) as usize % n
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Network {
    Fnn(FeedForwardNet),
    Rnn(RecurrentNet),
}

impl Network {
    pub fn widths(&self) -> Vec<usize> {
        match self {
            Network::Fnn(n) => n.widths(),
            Network::Rnn(n) => n.widths(),
        }
    }

    pub fn kind(&self) -> NetworkKind {
        match self {
            Network::Fnn(_) => NetworkKind::Fnn,
            Network::Rnn(_) => NetworkKind::Rnn,
        }
    }
}

/// Layer `k` draws `W` (row-major), then `U` for recurrent nets, then `b`.
/// `W` and `b` use bound `1/√n_{k−1}`; `U` uses `1/√n_k`.
pub fn generate_network(spec: &ExperimentSpec) -> Result<Network> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed, NETWORK_STREAM);
    let w = &spec.widths;
    match spec.kind {
        NetworkKind::Fnn => {
            let layers = (1..w.len())
                .map(|k| {
                    let bound = 1.0 / (w[k - 1] as f64).sqrt();
                    let weights = rng.matrix(w[k], w[k - 1], bound);
                    let bias = rng.vector(w[k], bound);
                    Layer::new(weights, bias, spec.activation)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Network::Fnn(FeedForwardNet::new(layers)?))
        }
        NetworkKind::Rnn => {
            let layers = (1..w.len())
                .map(|k| {
                    let bound = 1.0 / (w[k - 1] as f64).sqrt();
                    let weights = rng.matrix(w[k], w[k - 1], bound);
                    let recurrent = rng.matrix(w[k], w[k], 1.0 / (w[k] as f64).sqrt());
                    let bias = rng.vector(w[k], bound);
                    RecurrentLayer::new(weights, recurrent, bias, spec.activation)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Network::Rnn(RecurrentNet::new(layers, spec.tau)?))
        }
    }
}

/// One mini-batch member: an input and a one-hot target per time step.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleData {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

/// Inputs uniform in `[−1, 1]`, targets one-hot over the output width.
pub fn generate_data(spec: &ExperimentSpec) -> Vec<SampleData> {
    let mut rng = SeededRng::new(spec.seed, DATA_STREAM);
    let n_in = spec.widths[0];
    let n_out = *spec.widths.last().expect("validated widths");
    (0..spec.batch)
        .map(|_| {
            let mut inputs = Vec::with_capacity(spec.tau);
            let mut targets = Vec::with_capacity(spec.tau);
            for _ in 0..spec.tau {
                inputs.push(rng.vector(n_in, 1.0));
                let mut t = vec![0.0; n_out];
                t[rng.below(n_out)] = 1.0;
                targets.push(t);
            }
            SampleData { inputs, targets }
        })
        .collect()
}

/// Output-layer error `∂loss/∂z(l)` for softmax cross-entropy.
pub fn output_error(output: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    Ok(softmax_xent(output, target)?.1)
}

/// A network whose weights and biases are shifted by `sigma` times a fixed
/// noise draw in `[−1, 1]`.
pub fn perturb_network(net: &FeedForwardNet, sigma: f64, seed: u64) -> Result<FeedForwardNet> {
    let mut rng = SeededRng::new(seed, PERTURBATION_STREAM);
    let layers = net
        .layers()
        .iter()
        .map(|layer| {
            let w = &layer.weights;
            let noise = rng.matrix(w.rows(), w.cols(), 1.0);
            let weights = Matrix::from_fn(w.rows(), w.cols(), |i, j| w.get(i, j) + sigma * noise.get(i, j));
            let bias = layer
                .bias
                .iter()
                .map(|b| b + sigma * rng.uniform(-1.0, 1.0))
                .collect();
            Layer::new(weights, bias, layer.activation)
        })
        .collect::<Result<Vec<_>>>()?;
    FeedForwardNet::new(layers)
}
