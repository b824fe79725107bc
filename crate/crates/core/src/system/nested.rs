//! Time-unrolled systems for recurrent networks.
//!
//! Each time step contributes a whole layer chain as one diagonal block; the
//! chains are coupled through the block-diagonal recurrent operator, whose
//! input-layer block is zero.

use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::linalg::Blocks;
use crate::net::ForwardTrace;
use crate::rnn::{RecurrentNet, RnnTrace};
use crate::system::build::{forward_inv_diagonals, BuildOptions};
use crate::system::chain::{BlockChainSystem, Orientation};
use crate::system::operator::{InverseDiagonal, LinearOperator};

/// Block-diagonal coupling between consecutive time steps.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeCoupling {
    blocks: Vec<LinearOperator>,
}

impl TimeCoupling {
    pub fn new(blocks: Vec<LinearOperator>) -> Result<Self> {
        for op in &blocks {
            check_len("time coupling block", op.rows(), op.cols())?;
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[LinearOperator] {
        &self.blocks
    }

    pub fn apply(&self, x: &[Vec<f64>]) -> Blocks {
        self.blocks
            .iter()
            .zip(x)
            .map(|(op, xk)| op.apply(xk))
            .collect()
    }

    pub fn cost(&self) -> u64 {
        self.blocks.iter().map(LinearOperator::cost).sum()
    }

    /// Largest single-block cost: the critical path when blocks run concurrently.
    pub fn max_block_cost(&self) -> u64 {
        self.blocks.iter().map(LinearOperator::cost).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NestedBlockSystem {
    orientation: Orientation,
    time_blocks: Vec<BlockChainSystem>,
    time_coupling: TimeCoupling,
}

impl NestedBlockSystem {
    pub fn new(
        orientation: Orientation,
        time_blocks: Vec<BlockChainSystem>,
        time_coupling: TimeCoupling,
    ) -> Result<Self> {
        let first = time_blocks.first().ok_or(Error::TooFewBlocks {
            blocks: 0,
            required: 1,
        })?;
        let widths = first.widths();
        check_len("time coupling blocks", widths.len(), time_coupling.blocks.len())?;
        for (w, op) in widths.iter().zip(&time_coupling.blocks) {
            check_len("time coupling width", *w, op.rows())?;
        }
        for block in &time_blocks {
            if block.orientation() != orientation {
                return Err(Error::Invalid("time blocks must share one orientation".into()));
            }
            if block.widths() != widths {
                return Err(Error::Invalid("time blocks must share one block structure".into()));
            }
        }
        Ok(Self {
            orientation,
            time_blocks,
            time_coupling,
        })
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn horizon(&self) -> usize {
        self.time_blocks.len()
    }

    pub fn time_blocks(&self) -> &[BlockChainSystem] {
        &self.time_blocks
    }

    pub fn time_coupling(&self) -> &TimeCoupling {
        &self.time_coupling
    }

    pub fn layer_widths(&self) -> Vec<usize> {
        self.time_blocks[0].widths()
    }

    pub fn dim(&self) -> usize {
        self.time_blocks.iter().map(BlockChainSystem::dim).sum()
    }

    /// The time step feeding time block `s`, if any.
    pub fn time_neighbor(&self, s: usize) -> Option<usize> {
        match self.orientation {
            Orientation::LowerForward if s > 0 => Some(s - 1),
            Orientation::UpperBackward if s + 1 < self.horizon() => Some(s + 1),
            _ => None,
        }
    }

    pub fn time_order(&self) -> Vec<usize> {
        let tau = self.horizon();
        match self.orientation {
            Orientation::LowerForward => (0..tau).collect(),
            Orientation::UpperBackward => (0..tau).rev().collect(),
        }
    }

    /// `max ‖D⁻¹(r − L x)‖∞` over time blocks, where each block's right-hand
    /// side already includes the coupling from its time neighbour.
    pub fn scaled_residual(&self, x: &[Blocks]) -> Result<f64> {
        check_len("nested solution horizon", self.horizon(), x.len())?;
        let mut res: f64 = 0.0;
        for s in 0..self.horizon() {
            let block = self.effective_block(s, x)?;
            res = res.max(block.scaled_residual(&x[s])?);
        }
        Ok(res)
    }

    /// Time block `s` with the neighbour's recurrent contribution folded into its rhs.
    pub(crate) fn effective_block(&self, s: usize, x: &[Blocks]) -> Result<BlockChainSystem> {
        let block = &self.time_blocks[s];
        match self.time_neighbor(s) {
            None => Ok(block.clone()),
            Some(nbr) => {
                let carried = self.time_coupling.apply(&x[nbr]);
                block.with_rhs(add_blocks(block.rhs(), &carried))
            }
        }
    }
}

pub(crate) fn add_blocks(a: &[Vec<f64>], b: &[Vec<f64>]) -> Blocks {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
        .collect()
}

fn time_coupling(rnet: &RecurrentNet, transposed: bool) -> TimeCoupling {
    let widths = rnet.widths();
    let mut blocks = Vec::with_capacity(widths.len());
    blocks.push(LinearOperator::Zero {
        rows: widths[0],
        cols: widths[0],
    });
    for layer in rnet.layers() {
        let u = Arc::clone(&layer.recurrent);
        blocks.push(if transposed {
            LinearOperator::TransposedDense(u)
        } else {
            LinearOperator::Dense(u)
        });
    }
    TimeCoupling { blocks }
}

/// Lower-in-time system whose solution is the unrolled forward pass.
pub fn build_rnn_forward_system(
    rnet: &RecurrentNet,
    inputs: &[Vec<f64>],
    trace: &RnnTrace,
) -> Result<NestedBlockSystem> {
    build_rnn_forward_system_with(rnet, inputs, trace, &BuildOptions::default())
}

pub fn build_rnn_forward_system_with(
    rnet: &RecurrentNet,
    inputs: &[Vec<f64>],
    trace: &RnnTrace,
    opts: &BuildOptions,
) -> Result<NestedBlockSystem> {
    check_len("rnn input sequence", rnet.horizon(), inputs.len())?;
    check_len("rnn trace horizon", rnet.horizon(), trace.steps.len())?;
    let widths = rnet.widths();
    let couplings: Arc<Vec<LinearOperator>> = Arc::new(
        rnet.layers()
            .iter()
            .map(|l| LinearOperator::Dense(Arc::clone(&l.weights)))
            .collect(),
    );
    let mut blocks = Vec::with_capacity(rnet.horizon());
    for (input, step) in inputs.iter().zip(&trace.steps) {
        check_len("rnn input", widths[0], input.len())?;
        let diags = forward_inv_diagonals(&widths, step, opts)?;
        let rhs = std::iter::once(input.clone())
            .chain(rnet.layers().iter().map(|l| l.bias.clone()))
            .collect();
        blocks.push(BlockChainSystem::new(
            Orientation::LowerForward,
            diags,
            Arc::clone(&couplings),
            rhs,
        )?);
    }
    NestedBlockSystem::new(Orientation::LowerForward, blocks, time_coupling(rnet, false))
}

/// Upper-in-time system whose solution is the BPTT layer errors.
pub fn build_rnn_backward_system(
    rnet: &RecurrentNet,
    trace: &RnnTrace,
    output_errors: &[Vec<f64>],
) -> Result<NestedBlockSystem> {
    check_len("rnn trace horizon", rnet.horizon(), trace.steps.len())?;
    check_len("rnn output errors", rnet.horizon(), output_errors.len())?;
    let widths = rnet.widths();
    let couplings: Arc<Vec<LinearOperator>> = Arc::new(
        rnet.layers()
            .iter()
            .map(|l| LinearOperator::TransposedDense(Arc::clone(&l.weights)))
            .collect(),
    );
    let mut blocks = Vec::with_capacity(rnet.horizon());
    for (step, eps) in trace.steps.iter().zip(output_errors) {
        check_len("rnn output error", widths[widths.len() - 1], eps.len())?;
        let diags = backward_diagonals(rnet, step, &widths)?;
        let mut rhs: Blocks = widths.iter().map(|&w| vec![0.0; w]).collect();
        *rhs.last_mut().expect("non-empty") = eps.clone();
        blocks.push(BlockChainSystem::new(
            Orientation::UpperBackward,
            diags,
            Arc::clone(&couplings),
            rhs,
        )?);
    }
    NestedBlockSystem::new(Orientation::UpperBackward, blocks, time_coupling(rnet, true))
}

fn backward_diagonals(
    rnet: &RecurrentNet,
    step: &ForwardTrace,
    widths: &[usize],
) -> Result<Vec<InverseDiagonal>> {
    step.check_against(widths)?;
    let mut diags = vec![InverseDiagonal::Identity(widths[0])];
    for k in 1..widths.len() {
        let act = rnet.layer(k).activation;
        diags.push(InverseDiagonal::Values(
            step.pre(k).iter().map(|&y| act.derivative(y)).collect(),
        ));
    }
    Ok(diags)
}
