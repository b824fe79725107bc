//! Dense check of the scaling/permutation form of one reduction level.
//!
//! Rows of the scaling matrix are laid out in chain order: forward systems
//! list the odd chain first, backward systems the even chain first. The row
//! for block `k` has `I` at column `k` and `A_k D_nbr⁻¹` at the column of the
//! block feeding `k`'s neighbour, so `S L̄ P` comes out block diagonal with the
//! two reduced chains on the diagonal.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{flatten, max_abs_diff, Matrix};
use crate::system::{assemble_dense, offsets, BlockChainSystem, Orientation};

use super::reduction::reduce_once;

pub const APPENDIX_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AppendixCheck {
    /// `max |S L̄ P − blockdiag(L̄_first, L̄_second)|`.
    pub max_deviation: f64,
    /// `max |S b̄ − (g_first, g_second)|`.
    pub rhs_deviation: f64,
    /// Same comparison with the closing even-chain row built from the last
    /// coupling (`W^(l) D^(l−1)⁻¹` in place of `W^(l−1) D^(l−2)⁻¹`).
    /// Only defined for forward systems whose shapes allow the swap.
    pub literal_deviation: Option<f64>,
    pub passed: bool,
}

pub fn appendix_scaling_check(system: &BlockChainSystem) -> Result<AppendixCheck> {
    let level = reduce_once(system)?;
    let (first, second, order) = match system.orientation() {
        Orientation::LowerForward => (&level.odd_chain, &level.even_chain, [&level.odd_indices, &level.even_indices]),
        Orientation::UpperBackward => (&level.even_chain, &level.odd_chain, [&level.even_indices, &level.odd_indices]),
    };
    let order: Vec<usize> = order.iter().flat_map(|v| v.iter().copied()).collect();

    let (l_bar, b_bar) = assemble_dense(system)?;
    let (l_first, _) = assemble_dense(first)?;
    let (l_second, _) = assemble_dense(second)?;
    let dim = system.dim();
    let mut expected = Matrix::zeros(dim, dim);
    let split = l_first.rows();
    for i in 0..split {
        for j in 0..split {
            expected.set(i, j, l_first.get(i, j));
        }
    }
    for i in 0..l_second.rows() {
        for j in 0..l_second.rows() {
            expected.set(split + i, split + j, l_second.get(i, j));
        }
    }
    let mut expected_rhs = flatten(first.rhs());
    expected_rhs.extend(flatten(second.rhs()));

    let s = scaling_matrix(system, &order, None)?;
    let p = permutation_matrix(system, &order);
    let reordered = s.matmul(&l_bar).matmul(&p);
    let max_deviation = reordered.max_abs_diff(&expected);
    let rhs_deviation = max_abs_diff(&s.matvec(&b_bar), &expected_rhs);

    let literal_deviation = literal_override(system)
        .and_then(|ovr| scaling_matrix(system, &order, Some(ovr)).ok())
        .map(|s_lit| s_lit.matmul(&l_bar).matmul(&p).max_abs_diff(&expected));

    Ok(AppendixCheck {
        max_deviation,
        rhs_deviation,
        literal_deviation,
        passed: max_deviation < APPENDIX_TOLERANCE && rhs_deviation < APPENDIX_TOLERANCE,
    })
}

/// `A_k diag(d_nbr)` for block row `k`, with the column block it multiplies.
fn scaling_entry(system: &BlockChainSystem, k: usize) -> Option<(usize, Matrix)> {
    let (nbr, op) = system.coupling_into(k)?;
    let m = op.to_dense().scale_columns(&system.inv_diagonal(nbr).values());
    Some((nbr, m))
}

/// Closing row of the forward even chain with the last coupling swapped in:
/// row `l − 1` gets `A_l diag(d_{l−1})` where `A_{l−1} diag(d_{l−2})` belongs.
fn literal_override(system: &BlockChainSystem) -> Option<(usize, Matrix)> {
    let n = system.block_count();
    if system.orientation() != Orientation::LowerForward || n < 3 {
        return None;
    }
    let last = n - 1;
    let (_, m) = scaling_entry(system, last)?;
    let row = if last.is_multiple_of(2) { last } else { last - 1 };
    let (_, correct) = scaling_entry(system, row)?;
    if (m.rows(), m.cols()) != (correct.rows(), correct.cols()) {
        return None;
    }
    Some((row, m))
}

fn scaling_matrix(
    system: &BlockChainSystem,
    order: &[usize],
    replace: Option<(usize, Matrix)>,
) -> Result<Matrix> {
    let widths = system.widths();
    let off = offsets(&widths);
    let dim = system.dim();
    let mut s = Matrix::zeros(dim, dim);
    let mut row_base = 0;
    for &k in order {
        for i in 0..widths[k] {
            s.set(row_base + i, off[k] + i, 1.0);
        }
        let entry = match &replace {
            Some((row, m)) if *row == k => scaling_entry(system, k).map(|(nbr, _)| (nbr, m.clone())),
            _ => scaling_entry(system, k),
        };
        if let Some((nbr, m)) = entry {
            write_block(&mut s, row_base, off[nbr], &m)?;
        }
        row_base += widths[k];
    }
    Ok(s)
}

fn write_block(s: &mut Matrix, r0: usize, c0: usize, m: &Matrix) -> Result<()> {
    if r0 + m.rows() > s.rows() || c0 + m.cols() > s.cols() {
        return Err(Error::dim("scaling block", s.rows(), r0 + m.rows()));
    }
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            s.set(r0 + i, c0 + j, m.get(i, j));
        }
    }
    Ok(())
}

/// Column permutation taking chain order back to original block order.
fn permutation_matrix(system: &BlockChainSystem, order: &[usize]) -> Matrix {
    let widths = system.widths();
    let off = offsets(&widths);
    let dim = system.dim();
    let mut p = Matrix::zeros(dim, dim);
    let mut col = 0;
    for &k in order {
        for i in 0..widths[k] {
            p.set(off[k] + i, col + i, 1.0);
        }
        col += widths[k];
    }
    p
}
