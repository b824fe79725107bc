//! Assembly of the triangular systems equivalent to propagation.

use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::linalg::Blocks;
use crate::net::{FeedForwardNet, ForwardTrace};
use crate::system::chain::{BlockChainSystem, Orientation};
use crate::system::operator::{InverseDiagonal, LinearOperator};

/// Threshold below which `y` and `f(y)` count as exactly zero.
pub const DEFAULT_EPS_ZERO: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuildOptions {
    pub eps_zero: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            eps_zero: DEFAULT_EPS_ZERO,
        }
    }
}

/// Entry of `D⁻¹` for a forward system: `f(y) / y`.
///
/// When both `y` and `f(y)` vanish the entry is set to one. A vanishing `y`
/// with non-zero `f(y)` has no representation and is a [`Error::Breakdown`].
pub fn diag_ratio_forward(y: f64, f: f64, eps_zero: f64) -> Result<f64> {
    ratio(y, f, eps_zero).ok_or(Error::Breakdown {
        block: 0,
        entry: 0,
        y,
        f,
    })
}

fn ratio(y: f64, f: f64, eps_zero: f64) -> Option<f64> {
    if y.abs() >= eps_zero {
        Some(f / y)
    } else if f.abs() < eps_zero {
        Some(1.0)
    } else {
        None
    }
}

/// Forward inverse diagonals from a recorded trace; block 0 is the identity.
///
/// The trace may come from an earlier network state, which turns the solve
/// into an approximate forward pass.
pub(crate) fn forward_inv_diagonals(
    widths: &[usize],
    trace: &ForwardTrace,
    opts: &BuildOptions,
) -> Result<Vec<InverseDiagonal>> {
    trace.check_against(widths)?;
    let mut diags = Vec::with_capacity(widths.len());
    diags.push(InverseDiagonal::Identity(widths[0]));
    for k in 1..widths.len() {
        let values = trace
            .pre(k)
            .iter()
            .zip(trace.activation(k))
            .enumerate()
            .map(|(i, (&y, &f))| {
                ratio(y, f, opts.eps_zero).ok_or(Error::Breakdown {
                    block: k,
                    entry: i,
                    y,
                    f,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        diags.push(InverseDiagonal::Values(values));
    }
    Ok(diags)
}

pub(crate) fn backward_inv_diagonals(
    net: &FeedForwardNet,
    trace: &ForwardTrace,
) -> Result<Vec<InverseDiagonal>> {
    let widths = net.widths();
    trace.check_against(&widths)?;
    let mut diags = Vec::with_capacity(widths.len());
    diags.push(InverseDiagonal::Identity(widths[0]));
    for k in 1..widths.len() {
        let act = net.layer(k).activation;
        diags.push(InverseDiagonal::Values(
            trace.pre(k).iter().map(|&y| act.derivative(y)).collect(),
        ));
    }
    Ok(diags)
}

pub(crate) fn forward_couplings(net: &FeedForwardNet) -> Arc<Vec<LinearOperator>> {
    Arc::new(
        net.layers()
            .iter()
            .map(|l| LinearOperator::Dense(Arc::clone(&l.weights)))
            .collect(),
    )
}

pub(crate) fn backward_couplings(net: &FeedForwardNet) -> Arc<Vec<LinearOperator>> {
    Arc::new(
        net.layers()
            .iter()
            .map(|l| LinearOperator::TransposedDense(Arc::clone(&l.weights)))
            .collect(),
    )
}

pub(crate) fn forward_rhs(net: &FeedForwardNet, input: &[f64]) -> Result<Blocks> {
    check_len("system input", net.widths()[0], input.len())?;
    Ok(std::iter::once(input.to_vec())
        .chain(net.layers().iter().map(|l| l.bias.clone()))
        .collect())
}

pub(crate) fn backward_rhs(net: &FeedForwardNet, epsilon: &[f64]) -> Result<Blocks> {
    let widths = net.widths();
    check_len("output error", *widths.last().expect("non-empty"), epsilon.len())?;
    let mut rhs: Blocks = widths.iter().map(|&w| vec![0.0; w]).collect();
    *rhs.last_mut().expect("non-empty") = epsilon.to_vec();
    Ok(rhs)
}

/// Lower system `L z = (x*, b(1), ..., b(l))` whose solution is the forward pass.
pub fn build_forward_system(
    net: &FeedForwardNet,
    input: &[f64],
    trace: &ForwardTrace,
) -> Result<BlockChainSystem> {
    build_forward_system_with(net, input, trace, &BuildOptions::default())
}

pub fn build_forward_system_with(
    net: &FeedForwardNet,
    input: &[f64],
    trace: &ForwardTrace,
    opts: &BuildOptions,
) -> Result<BlockChainSystem> {
    let diags = forward_inv_diagonals(&net.widths(), trace, opts)?;
    BlockChainSystem::new(
        Orientation::LowerForward,
        diags,
        forward_couplings(net),
        forward_rhs(net, input)?,
    )
}

/// Upper system `R v = (0, ..., 0, ε)` whose solution is `v(0), ..., v(l)`.
pub fn build_backward_system(
    net: &FeedForwardNet,
    trace: &ForwardTrace,
    epsilon: &[f64],
) -> Result<BlockChainSystem> {
    BlockChainSystem::new(
        Orientation::UpperBackward,
        backward_inv_diagonals(net, trace)?,
        backward_couplings(net),
        backward_rhs(net, epsilon)?,
    )
}
