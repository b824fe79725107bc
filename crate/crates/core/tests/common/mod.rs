//! Finite-difference gradient oracle.
//!
//! Losses are re-evaluated in 192-bit floating point so that central
//! differences with `h = 1e-5` are limited by truncation error rather than by
//! the `ulp(loss) / h` rounding floor of plain doubles.

#![allow(dead_code)]

use astro_float::{BigFloat, Consts, RoundingMode};

use trilayer::{ActivationKind, FeedForwardNet, Matrix, RecurrentNet};

pub const FD_STEP: f64 = 1e-5;

const PREC: usize = 192;
const RM: RoundingMode = RoundingMode::ToEven;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Param {
    W,
    U,
    B,
}

/// One parameter shifted by `h`: entry `(i, j)` of layer `layer` (0-based).
#[derive(Clone, Copy, Debug)]
pub struct Bump {
    pub layer: usize,
    pub param: Param,
    pub i: usize,
    pub j: usize,
    pub h: f64,
}

impl Bump {
    fn at(&self, layer: usize, param: Param, i: usize, j: usize) -> f64 {
        let hit = self.layer == layer && self.param == param && self.i == i;
        if hit && (param == Param::B || self.j == j) {
            self.h
        } else {
            0.0
        }
    }
}

struct Mp {
    consts: Consts,
}

impl Mp {
    fn new() -> Self {
        Self {
            consts: Consts::new().expect("constant cache"),
        }
    }

    fn num(v: f64) -> BigFloat {
        BigFloat::from_f64(v, PREC)
    }

    fn add(a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, PREC, RM)
    }

    fn sub(a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.sub(b, PREC, RM)
    }

    fn mul(a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, PREC, RM)
    }

    /// Exact sum of two doubles.
    fn shifted(v: f64, h: f64) -> BigFloat {
        Self::add(&Self::num(v), &Self::num(h))
    }

    fn is_negative(a: &BigFloat) -> bool {
        a.is_negative() && !a.is_zero()
    }

    fn activate(&mut self, kind: ActivationKind, y: BigFloat) -> BigFloat {
        match kind {
            ActivationKind::Identity => y,
            ActivationKind::Relu if Self::is_negative(&y) => Self::num(0.0),
            ActivationKind::Relu => y,
            ActivationKind::LeakyRelu { slope } if Self::is_negative(&y) => Self::mul(&y, &Self::num(slope)),
            ActivationKind::LeakyRelu { .. } => y,
            ActivationKind::Tanh => y.tanh(PREC, RM, &mut self.consts),
            ActivationKind::Sigmoid => {
                let e = y.neg().exp(PREC, RM, &mut self.consts);
                Self::num(1.0).div(&Self::add(&Self::num(1.0), &e), PREC, RM)
            }
        }
    }

    fn xent(&mut self, logits: &[BigFloat], target: &[f64]) -> BigFloat {
        let mut total = Self::num(0.0);
        for v in logits {
            total = Self::add(&total, &v.exp(PREC, RM, &mut self.consts));
        }
        let log_total = total.ln(PREC, RM, &mut self.consts);
        let mut loss = Self::num(0.0);
        for (v, &t) in logits.iter().zip(target) {
            if t != 0.0 {
                loss = Self::add(&loss, &Self::mul(&Self::sub(&log_total, v), &Self::num(t)));
            }
        }
        loss
    }

    fn affine(w: &Matrix, x: &[BigFloat], b: &[f64], layer: usize, bump: &Bump) -> Vec<BigFloat> {
        (0..w.rows())
            .map(|i| {
                let mut acc = Self::shifted(b[i], bump.at(layer, Param::B, i, 0));
                for (j, xj) in x.iter().enumerate() {
                    let wij = Self::shifted(w.get(i, j), bump.at(layer, Param::W, i, j));
                    acc = Self::add(&acc, &Self::mul(&wij, xj));
                }
                acc
            })
            .collect()
    }
}

fn to_f64(v: &BigFloat) -> f64 {
    let text = v.to_string();
    text.parse().unwrap_or_else(|_| panic!("unparseable {text}"))
}

pub fn fnn_loss(net: &FeedForwardNet, input: &[f64], target: &[f64], bump: &Bump) -> BigFloat {
    let mut mp = Mp::new();
    let mut z: Vec<BigFloat> = input.iter().map(|&v| Mp::num(v)).collect();
    for (k, layer) in net.layers().iter().enumerate() {
        z = Mp::affine(&layer.weights, &z, &layer.bias, k, bump)
            .into_iter()
            .map(|y| mp.activate(layer.activation, y))
            .collect();
    }
    mp.xent(&z, target)
}

pub fn rnn_loss(net: &RecurrentNet, inputs: &[Vec<f64>], targets: &[Vec<f64>], bump: &Bump) -> BigFloat {
    let mut mp = Mp::new();
    let mut state: Vec<Vec<BigFloat>> = net
        .layers()
        .iter()
        .map(|l| vec![Mp::num(0.0); l.outputs()])
        .collect();
    let mut total = Mp::num(0.0);
    for (input, target) in inputs.iter().zip(targets) {
        let mut z: Vec<BigFloat> = input.iter().map(|&v| Mp::num(v)).collect();
        for (k, layer) in net.layers().iter().enumerate() {
            let mut y = Mp::affine(&layer.weights, &z, &layer.bias, k, bump);
            for (i, yi) in y.iter_mut().enumerate() {
                for (j, sj) in state[k].iter().enumerate() {
                    let uij = Mp::shifted(layer.recurrent.get(i, j), bump.at(k, Param::U, i, j));
                    *yi = Mp::add(yi, &Mp::mul(&uij, sj));
                }
            }
            z = y.into_iter().map(|v| mp.activate(layer.activation, v)).collect();
            state[k] = z.clone();
        }
        total = Mp::add(&total, &mp.xent(&z, target));
    }
    total
}

/// Central difference of `loss` in parameter `(layer, param, i, j)`.
pub fn central(layer: usize, param: Param, i: usize, j: usize, loss: impl Fn(&Bump) -> BigFloat) -> f64 {
    let at = |h| Bump {
        layer,
        param,
        i,
        j,
        h,
    };
    let diff = Mp::sub(&loss(&at(FD_STEP)), &loss(&at(-FD_STEP)));
    to_f64(&diff.div(&Mp::num(2.0 * FD_STEP), PREC, RM))
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Largest entrywise relative error of the reference FNN gradients.
pub fn fnn_gradient_error(net: &FeedForwardNet, input: &[f64], target: &[f64]) -> f64 {
    let trace = net.forward(input).unwrap();
    let eps = trilayer::net::softmax_xent(trace.output(), target).unwrap().1;
    let grads = net.backward(&trace, &eps).unwrap();
    let loss = |b: &Bump| fnn_loss(net, input, target, b);
    let mut worst: f64 = 0.0;
    for (k, layer) in net.layers().iter().enumerate() {
        for i in 0..layer.weights.rows() {
            for j in 0..layer.weights.cols() {
                let fd = central(k, Param::W, i, j, loss);
                worst = worst.max(rel_err(grads.weight_grads[k].get(i, j), fd));
            }
            let fd = central(k, Param::B, i, 0, loss);
            worst = worst.max(rel_err(grads.bias_grads[k][i], fd));
        }
    }
    worst
}

/// Largest entrywise relative error of the BPTT gradients.
pub fn rnn_gradient_error(net: &RecurrentNet, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let trace = net.forward(inputs).unwrap();
    let errors: Vec<Vec<f64>> = trace
        .steps
        .iter()
        .zip(targets)
        .map(|(s, t)| trilayer::net::softmax_xent(s.output(), t).unwrap().1)
        .collect();
    let grads = net.backward(&trace, &errors).unwrap();
    let loss = |b: &Bump| rnn_loss(net, inputs, targets, b);
    let mut worst: f64 = 0.0;
    for (k, layer) in net.layers().iter().enumerate() {
        for i in 0..layer.weights.rows() {
            for j in 0..layer.weights.cols() {
                let fd = central(k, Param::W, i, j, loss);
                worst = worst.max(rel_err(grads.weight_grads[k].get(i, j), fd));
            }
            for j in 0..layer.recurrent.cols() {
                let fd = central(k, Param::U, i, j, loss);
                worst = worst.max(rel_err(grads.recurrent_grads[k].get(i, j), fd));
            }
            let fd = central(k, Param::B, i, 0, loss);
            worst = worst.max(rel_err(grads.bias_grads[k][i], fd));
        }
    }
    worst
}
