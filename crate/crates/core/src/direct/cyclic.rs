use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::Blocks;
use crate::system::BlockChainSystem;
use crate::work::WorkCounters;

use super::reduction::reduce_once_with;
use super::substitution::substitute;
use super::SolveReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CyclicOptions {
    /// Chains with at most this many blocks are finished by substitution.
    pub leaf_threshold: usize,
    pub exec: Exec,
}

impl Default for CyclicOptions {
    fn default() -> Self {
        Self {
            leaf_threshold: 2,
            exec: Exec::default(),
        }
    }
}

pub fn solve_cyclic_reduction(system: &BlockChainSystem, leaf_threshold: usize) -> Result<SolveReport> {
    solve_cyclic_reduction_with(
        system,
        &CyclicOptions {
            leaf_threshold,
            ..CyclicOptions::default()
        },
    )
}

pub fn solve_cyclic_reduction_with(
    system: &BlockChainSystem,
    opts: &CyclicOptions,
) -> Result<SolveReport> {
    let (solution, work, depth) = cyclic_solve(system, opts)?;
    let residual_norm = system.scaled_residual(&solution)?;
    Ok(SolveReport {
        solution,
        residual_norm,
        recursion_depth: depth,
        work,
    })
}

/// Solution, work and recursion depth, without the final residual check.
pub(crate) fn cyclic_solve(
    system: &BlockChainSystem,
    opts: &CyclicOptions,
) -> Result<(Blocks, WorkCounters, usize)> {
    if opts.leaf_threshold < 2 {
        return Err(Error::Invalid(format!(
            "leaf threshold must be at least 2, got {}",
            opts.leaf_threshold
        )));
    }
    // The original couplings belong to the network and are not intermediate.
    recurse(system.clone(), 0, opts)
}

/// Solves `system`, which owns `own_storage` intermediate scalars.
///
/// The system is consumed: once its two child chains exist nothing in it is
/// needed again, so it is dropped before the children are solved.
fn recurse(
    system: BlockChainSystem,
    own_storage: u64,
    opts: &CyclicOptions,
) -> Result<(Blocks, WorkCounters, usize)> {
    if system.block_count() <= opts.leaf_threshold {
        let (x, mut work) = substitute(&system);
        work.peak_blocks_live = own_storage;
        return Ok((x, work, 0));
    }
    let level = reduce_once_with(&system, opts.exec)?;
    drop(system);

    let odd_storage = level.odd_chain.coupling_storage();
    let even_storage = level.even_chain.coupling_storage();
    let mut reduce_work = level.work;
    reduce_work.peak_blocks_live = own_storage + odd_storage + even_storage;

    let odd_indices = level.odd_indices;
    let even_indices = level.even_indices;
    let (odd, even) = opts.exec.join(
        || recurse(level.odd_chain, odd_storage, opts),
        || recurse(level.even_chain, even_storage, opts),
    );
    let (odd_x, odd_work, odd_depth) = odd?;
    let (even_x, even_work, even_depth) = even?;

    let mut solution: Blocks = vec![Vec::new(); odd_indices.len() + even_indices.len()];
    for (idx, v) in odd_indices.iter().zip(odd_x) {
        solution[*idx] = v;
    }
    for (idx, v) in even_indices.iter().zip(even_x) {
        solution[*idx] = v;
    }
    let work = reduce_work.then(odd_work.fork(even_work));
    Ok((solution, work, 1 + odd_depth.max(even_depth)))
}
