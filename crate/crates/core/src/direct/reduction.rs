//! One level of odd-even reduction.
//!
//! Eliminating every other block couples block `k` directly to `k ∓ 2`:
//!
//! ```text
//! lower:  D_k x_k − (A_k D_{k−1}⁻¹ A_{k−1}) x_{k−2} = A_k D_{k−1}⁻¹ r_{k−1} + r_k
//! upper:  D_k x_k − (A_k D_{k+1}⁻¹ A_{k+1}) x_{k+2} = A_k D_{k+1}⁻¹ r_{k+1} + r_k
//! ```
//!
//! so the even- and odd-indexed blocks form two independent chains of half the
//! length. An even block count simply leaves the trailing block in the chain
//! its parity selects.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{Blocks, Matrix};
use crate::system::{BlockChainSystem, InverseDiagonal, LinearOperator, Orientation};
use crate::work::WorkCounters;

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionLevel {
    pub odd_chain: BlockChainSystem,
    pub even_chain: BlockChainSystem,
    /// `odd_indices[j]` is the original index of block `j` of the odd chain.
    pub odd_indices: Vec<usize>,
    pub even_indices: Vec<usize>,
    /// Cost of building the reduced couplings and right-hand sides.
    pub work: WorkCounters,
    /// Multiply-adds spent on blocks that receive a reduced coupling: the
    /// coupling product plus that block's new right-hand side. The remaining
    /// `work.fma` is the right-hand side of the one block next to the free end.
    pub coupled_fma: u64,
}

impl ReductionLevel {
    pub fn orientation(&self) -> Orientation {
        self.odd_chain.orientation()
    }

    pub fn block_count(&self) -> usize {
        self.odd_indices.len() + self.even_indices.len()
    }

    /// Scatters the two chain solutions back into original block order.
    pub fn interleave(&self, odd: Blocks, even: Blocks) -> Blocks {
        let mut out: Blocks = vec![Vec::new(); self.block_count()];
        for (idx, v) in self.odd_indices.iter().zip(odd) {
            out[*idx] = v;
        }
        for (idx, v) in self.even_indices.iter().zip(even) {
            out[*idx] = v;
        }
        out
    }

    /// Scalar entries held by the newly created couplings.
    pub fn intermediate_storage(&self) -> u64 {
        self.odd_chain.coupling_storage() + self.even_chain.coupling_storage()
    }
}

pub fn reduce_once(system: &BlockChainSystem) -> Result<ReductionLevel> {
    reduce_once_with(system, Exec::Sequential)
}

struct ReducedBlock {
    rhs: Vec<f64>,
    /// Coupling to the block two positions away in solve order, if any.
    coupling: Option<LinearOperator>,
    work: WorkCounters,
}

pub fn reduce_once_with(system: &BlockChainSystem, exec: Exec) -> Result<ReductionLevel> {
    let n = system.block_count();
    if n < 3 {
        return Err(Error::TooFewBlocks {
            blocks: n,
            required: 3,
        });
    }
    let reduced = exec.map_range(n, |k| reduce_block(system, k));

    let mut work = WorkCounters::default();
    let mut coupled_fma = 0;
    for b in &reduced {
        if b.coupling.is_some() {
            coupled_fma += b.work.fma;
        }
        work.fma += b.work.fma;
        work.activation += b.work.activation;
        work.parallel_steps = work.parallel_steps.max(b.work.parallel_steps);
    }

    let odd_indices: Vec<usize> = (1..n).step_by(2).collect();
    let even_indices: Vec<usize> = (0..n).step_by(2).collect();
    let odd_chain = build_chain(system, &reduced, &odd_indices)?;
    let even_chain = build_chain(system, &reduced, &even_indices)?;
    work.peak_blocks_live = odd_chain.coupling_storage() + even_chain.coupling_storage();

    Ok(ReductionLevel {
        odd_chain,
        even_chain,
        odd_indices,
        even_indices,
        work,
        coupled_fma,
    })
}

fn reduce_block(system: &BlockChainSystem, k: usize) -> ReducedBlock {
    let Some((mid, outer)) = system.coupling_into(k) else {
        return ReducedBlock {
            rhs: system.rhs()[k].clone(),
            coupling: None,
            work: WorkCounters::default(),
        };
    };
    let mid_diag = system.inv_diagonal(mid);
    let mid_rhs = &system.rhs()[mid];
    let mut work = WorkCounters::default();

    let (rhs, coupling) = match system.coupling_into(mid) {
        // The neighbour is itself coupled: form A_k D⁻¹ once and reuse it.
        Some((_, inner)) => {
            let scaled = scale_operator(outer, mid_diag, &mut work);
            let mut g = scaled.apply(mid_rhs);
            work.fma += scaled.cost();
            for (gi, ri) in g.iter_mut().zip(&system.rhs()[k]) {
                *gi += ri;
            }
            let product = compose(&scaled, inner, &mut work);
            (g, Some(product))
        }
        None => {
            let mut t = mid_rhs.clone();
            work.activation += mid_diag.scale(&mut t);
            let mut g = outer.apply(&t);
            work.fma += outer.cost();
            for (gi, ri) in g.iter_mut().zip(&system.rhs()[k]) {
                *gi += ri;
            }
            (g, None)
        }
    };
    work.parallel_steps = work.fma;
    ReducedBlock {
        rhs,
        coupling,
        work,
    }
}

/// `A diag(d)`, as a dense operator unless `A` is zero.
fn scale_operator(
    op: &LinearOperator,
    diag: &InverseDiagonal,
    work: &mut WorkCounters,
) -> LinearOperator {
    match op {
        LinearOperator::Zero { .. } => op.clone(),
        _ => {
            let dense = op.to_dense();
            match diag {
                InverseDiagonal::Identity(_) => LinearOperator::Dense(Arc::new(dense)),
                InverseDiagonal::Values(d) => {
                    work.activation += dense.len() as u64;
                    LinearOperator::Dense(Arc::new(dense.scale_columns(d)))
                }
            }
        }
    }
}

fn compose(left: &LinearOperator, right: &LinearOperator, work: &mut WorkCounters) -> LinearOperator {
    match (left, right) {
        (LinearOperator::Zero { .. }, _) | (_, LinearOperator::Zero { .. }) => LinearOperator::Zero {
            rows: left.rows(),
            cols: right.cols(),
        },
        _ => {
            let l = left.to_dense();
            let r = right.to_dense();
            work.fma += (l.rows() * l.cols() * r.cols()) as u64;
            LinearOperator::Dense(Arc::new(l.matmul(&r)))
        }
    }
}

fn build_chain(
    system: &BlockChainSystem,
    reduced: &[ReducedBlock],
    indices: &[usize],
) -> Result<BlockChainSystem> {
    let diags = indices
        .iter()
        .map(|&k| system.inv_diagonal(k).clone())
        .collect();
    let rhs = indices.iter().map(|&k| reduced[k].rhs.clone()).collect();
    let couplings = indices
        .windows(2)
        .map(|pair| {
            let owner = match system.orientation() {
                Orientation::LowerForward => pair[1],
                Orientation::UpperBackward => pair[0],
            };
            reduced[owner]
                .coupling
                .clone()
                .expect("interior chain blocks carry a reduced coupling")
        })
        .collect();
    BlockChainSystem::new(system.orientation(), diags, Arc::new(couplings), rhs)
}

/// A reduced chain read as a propagation through modified weights.
///
/// Lower chains propagate from the first block with weights `B`; upper chains
/// propagate from the last block with weights `Cᵀ`. In both cases the
/// diagonal scaling plays the role of the activation.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagationView {
    pub orientation: Orientation,
    /// `weights[j]` joins chain blocks `j` and `j + 1`.
    pub weights: Vec<Matrix>,
    /// Reduced right-hand sides `g` / `h`, one per chain block.
    pub inputs: Blocks,
    pub scalings: Vec<Vec<f64>>,
}

impl PropagationView {
    fn from_chain(chain: &BlockChainSystem) -> Self {
        Self {
            orientation: chain.orientation(),
            weights: chain.couplings().iter().map(LinearOperator::to_dense).collect(),
            inputs: chain.rhs().clone(),
            scalings: chain.inv_diagonals().iter().map(InverseDiagonal::values).collect(),
        }
    }

    /// Runs the propagation; the result is indexed by chain position.
    pub fn propagate(&self) -> Blocks {
        let n = self.inputs.len();
        let mut out: Blocks = vec![Vec::new(); n];
        let step = |prev: Option<Vec<f64>>, j: usize| -> Vec<f64> {
            let mut v = self.inputs[j].clone();
            if let Some(p) = prev {
                for (vi, pi) in v.iter_mut().zip(p) {
                    *vi += pi;
                }
            }
            v.iter().zip(&self.scalings[j]).map(|(a, d)| a * d).collect()
        };
        match self.orientation {
            Orientation::LowerForward => {
                out[0] = step(None, 0);
                for j in 1..n {
                    let carried = self.weights[j - 1].matvec(&out[j - 1]);
                    out[j] = step(Some(carried), j);
                }
            }
            Orientation::UpperBackward => {
                out[n - 1] = step(None, n - 1);
                for j in (0..n - 1).rev() {
                    let carried = self.weights[j].matvec(&out[j + 1]);
                    out[j] = step(Some(carried), j);
                }
            }
        }
        out
    }
}

/// The two independent propagations a reduction level decouples into,
/// as `(odd, even)`.
pub fn equivalent_propagations(level: &ReductionLevel) -> (PropagationView, PropagationView) {
    (
        PropagationView::from_chain(&level.odd_chain),
        PropagationView::from_chain(&level.even_chain),
    )
}
