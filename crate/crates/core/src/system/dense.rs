//! Dense materialization of small systems, for cross-checking.

use crate::error::{Error, Result};
use crate::linalg::{flatten, Matrix};
use crate::system::chain::BlockChainSystem;
use crate::system::nested::NestedBlockSystem;

pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Offsets of each block inside the flattened vector.
pub(crate) fn offsets(widths: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(widths.len() + 1);
    let mut acc = 0;
    out.push(0);
    for w in widths {
        acc += w;
        out.push(acc);
    }
    out
}

fn check_cap(dim: usize, cap: usize) -> Result<()> {
    if dim > cap {
        Err(Error::DenseCap { dim, cap })
    } else {
        Ok(())
    }
}

/// Writes the unscaled matrix of `system` into `out` at `(base, base)`.
fn write_chain(system: &BlockChainSystem, out: &mut Matrix, base: usize, block_base: usize) -> Result<()> {
    let off = offsets(&system.widths());
    for k in 0..system.block_count() {
        let d = system.inv_diagonal(k);
        for i in 0..d.len() {
            let v = d.get(i);
            if v == 0.0 {
                return Err(Error::Singular {
                    block: block_base + k,
                    entry: i,
                });
            }
            out.set(base + off[k] + i, base + off[k] + i, 1.0 / v);
        }
        if let Some((nbr, op)) = system.coupling_into(k) {
            let m = op.to_dense();
            for i in 0..m.rows() {
                for j in 0..m.cols() {
                    out.set(base + off[k] + i, base + off[nbr] + j, -m.get(i, j));
                }
            }
        }
    }
    Ok(())
}

/// The matrix `L` (or `R`) with diagonal blocks `D_k` and negated couplings,
/// plus the flattened right-hand side.
pub fn assemble_dense(system: &BlockChainSystem) -> Result<(Matrix, Vec<f64>)> {
    assemble_dense_with_cap(system, DEFAULT_DENSE_CAP)
}

pub fn assemble_dense_with_cap(system: &BlockChainSystem, cap: usize) -> Result<(Matrix, Vec<f64>)> {
    let dim = system.dim();
    check_cap(dim, cap)?;
    let mut m = Matrix::zeros(dim, dim);
    write_chain(system, &mut m, 0, 0)?;
    Ok((m, flatten(system.rhs())))
}

pub fn assemble_dense_nested(system: &NestedBlockSystem) -> Result<(Matrix, Vec<f64>)> {
    assemble_dense_nested_with_cap(system, DEFAULT_DENSE_CAP)
}

pub fn assemble_dense_nested_with_cap(
    system: &NestedBlockSystem,
    cap: usize,
) -> Result<(Matrix, Vec<f64>)> {
    let dim = system.dim();
    check_cap(dim, cap)?;
    let inner = system.time_blocks()[0].dim();
    let widths = system.layer_widths();
    let off = offsets(&widths);
    let mut m = Matrix::zeros(dim, dim);
    let mut rhs = Vec::with_capacity(dim);
    for (s, block) in system.time_blocks().iter().enumerate() {
        write_chain(block, &mut m, s * inner, s * widths.len())?;
        rhs.extend(flatten(block.rhs()));
        if let Some(nbr) = system.time_neighbor(s) {
            for (k, op) in system.time_coupling().blocks().iter().enumerate() {
                let u = op.to_dense();
                for i in 0..u.rows() {
                    for j in 0..u.cols() {
                        m.set(s * inner + off[k] + i, nbr * inner + off[k] + j, -u.get(i, j));
                    }
                }
            }
        }
    }
    Ok((m, rhs))
}
