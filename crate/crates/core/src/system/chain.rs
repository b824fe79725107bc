use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::exec::Exec;
use crate::linalg::{norm_inf, Blocks};
use crate::system::operator::{InverseDiagonal, LinearOperator};
use crate::work::WorkCounters;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// Block `k` is coupled to block `k − 1` (forward propagation).
    LowerForward,
    /// Block `k` is coupled to block `k + 1` (backward propagation).
    UpperBackward,
}

/// A block bi-diagonal triangular system.
///
/// Block row `k` reads `D_k x_k − A x_nbr = r_k`, where `nbr` is `k − 1` for a
/// lower system and `k + 1` for an upper one. Only `D_k⁻¹` is stored.
/// `couplings[j]` always joins blocks `j` and `j + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockChainSystem {
    orientation: Orientation,
    inv_diagonals: Vec<InverseDiagonal>,
    couplings: Arc<Vec<LinearOperator>>,
    rhs: Blocks,
}

impl BlockChainSystem {
    pub fn new(
        orientation: Orientation,
        inv_diagonals: Vec<InverseDiagonal>,
        couplings: Arc<Vec<LinearOperator>>,
        rhs: Blocks,
    ) -> Result<Self> {
        if inv_diagonals.is_empty() {
            return Err(Error::TooFewBlocks {
                blocks: 0,
                required: 1,
            });
        }
        check_len("system right-hand side blocks", inv_diagonals.len(), rhs.len())?;
        check_len("system couplings", inv_diagonals.len() - 1, couplings.len())?;
        for (d, r) in inv_diagonals.iter().zip(&rhs) {
            check_len("right-hand side block width", d.len(), r.len())?;
        }
        for (j, op) in couplings.iter().enumerate() {
            let (lo, hi) = (inv_diagonals[j].len(), inv_diagonals[j + 1].len());
            let (rows, cols) = match orientation {
                Orientation::LowerForward => (hi, lo),
                Orientation::UpperBackward => (lo, hi),
            };
            check_len("coupling rows", rows, op.rows())?;
            check_len("coupling cols", cols, op.cols())?;
        }
        Ok(Self {
            orientation,
            inv_diagonals,
            couplings,
            rhs,
        })
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn block_count(&self) -> usize {
        self.inv_diagonals.len()
    }

    pub fn widths(&self) -> Vec<usize> {
        self.inv_diagonals.iter().map(InverseDiagonal::len).collect()
    }

    pub fn dim(&self) -> usize {
        self.inv_diagonals.iter().map(InverseDiagonal::len).sum()
    }

    pub fn inv_diagonals(&self) -> &[InverseDiagonal] {
        &self.inv_diagonals
    }

    pub fn inv_diagonal(&self, k: usize) -> &InverseDiagonal {
        &self.inv_diagonals[k]
    }

    pub fn couplings(&self) -> &Arc<Vec<LinearOperator>> {
        &self.couplings
    }

    pub fn rhs(&self) -> &Blocks {
        &self.rhs
    }

    /// Same matrix, different right-hand side.
    pub fn with_rhs(&self, rhs: Blocks) -> Result<Self> {
        check_len("right-hand side blocks", self.block_count(), rhs.len())?;
        for (d, r) in self.inv_diagonals.iter().zip(&rhs) {
            check_len("right-hand side block width", d.len(), r.len())?;
        }
        Ok(Self {
            orientation: self.orientation,
            inv_diagonals: self.inv_diagonals.clone(),
            couplings: Arc::clone(&self.couplings),
            rhs,
        })
    }

    /// The neighbour feeding block row `k` and the operator that carries it.
    pub fn coupling_into(&self, k: usize) -> Option<(usize, &LinearOperator)> {
        match self.orientation {
            Orientation::LowerForward if k > 0 => Some((k - 1, &self.couplings[k - 1])),
            Orientation::UpperBackward if k + 1 < self.block_count() => {
                Some((k + 1, &self.couplings[k]))
            }
            _ => None,
        }
    }

    /// Block indices in substitution order.
    pub fn solve_order(&self) -> Vec<usize> {
        let n = self.block_count();
        match self.orientation {
            Orientation::LowerForward => (0..n).collect(),
            Orientation::UpperBackward => (0..n).rev().collect(),
        }
    }

    pub(crate) fn check_blocks(&self, p: &[Vec<f64>]) -> Result<()> {
        check_len("block vector", self.block_count(), p.len())?;
        for (d, b) in self.inv_diagonals.iter().zip(p) {
            check_len("block vector width", d.len(), b.len())?;
        }
        Ok(())
    }

    /// `N p` with `N = I − D⁻¹A` the scaled strictly-triangular part:
    /// `(N p)_k = D_k⁻¹ (A p_nbr)`, zero for the uncoupled end block.
    pub fn apply_offdiag(&self, p: &[Vec<f64>], exec: Exec) -> (Blocks, WorkCounters) {
        let rows = exec.map_range(self.block_count(), |k| match self.coupling_into(k) {
            Some((nbr, op)) => {
                let mut u = op.apply(&p[nbr]);
                let muls = self.inv_diagonals[k].scale(&mut u);
                (u, op.cost(), muls)
            }
            None => (vec![0.0; self.inv_diagonals[k].len()], 0, 0),
        });
        let mut work = WorkCounters::default();
        let mut out = Vec::with_capacity(rows.len());
        for (u, fma, muls) in rows {
            work.fma += fma;
            work.activation += muls;
            work.parallel_steps = work.parallel_steps.max(fma);
            out.push(u);
        }
        (out, work)
    }

    /// `q = (D⁻¹ L) p`: unit block diagonal, scaled negated couplings.
    pub fn scaled_matvec(&self, p: &[Vec<f64>]) -> Result<(Blocks, WorkCounters)> {
        self.scaled_matvec_with(p, Exec::Sequential)
    }

    pub fn scaled_matvec_with(
        &self,
        p: &[Vec<f64>],
        exec: Exec,
    ) -> Result<(Blocks, WorkCounters)> {
        self.check_blocks(p)?;
        let (mut q, work) = self.apply_offdiag(p, exec);
        for (qk, pk) in q.iter_mut().zip(p) {
            for (qi, pi) in qk.iter_mut().zip(pk) {
                *qi = pi - *qi;
            }
        }
        Ok((q, work))
    }

    /// `D⁻¹ r` and the multiplies it took.
    pub fn scaled_rhs(&self) -> (Blocks, u64) {
        let mut muls = 0;
        let out = self
            .rhs
            .iter()
            .zip(&self.inv_diagonals)
            .map(|(r, d)| {
                let mut v = r.clone();
                muls += d.scale(&mut v);
                v
            })
            .collect();
        (out, muls)
    }

    /// `‖D⁻¹(r − L x)‖∞`.
    pub fn scaled_residual(&self, x: &[Vec<f64>]) -> Result<f64> {
        let (q, _) = self.scaled_matvec(x)?;
        let (b, _) = self.scaled_rhs();
        Ok(b.iter()
            .zip(&q)
            .flat_map(|(bk, qk)| bk.iter().zip(qk).map(|(a, c)| (a - c).abs()))
            .fold(0.0, f64::max))
    }

    /// `(‖r − L x‖∞, ‖r‖∞)` on the unscaled system.
    ///
    /// A zero inverse-diagonal entry stands for an infinite diagonal; its row is
    /// taken in the limit form `x_i = 0`, so the residual component is `x_i`.
    pub fn unscaled_residual(&self, x: &[Vec<f64>]) -> Result<(f64, f64)> {
        self.check_blocks(x)?;
        let mut res: f64 = 0.0;
        for k in 0..self.block_count() {
            let mut u = match self.coupling_into(k) {
                Some((nbr, op)) => op.apply(&x[nbr]),
                None => vec![0.0; x[k].len()],
            };
            for (ui, ri) in u.iter_mut().zip(&self.rhs[k]) {
                *ui += ri;
            }
            for (i, (&xi, &ui)) in x[k].iter().zip(&u).enumerate() {
                let d = self.inv_diagonals[k].get(i);
                let r = if d != 0.0 { xi / d - ui } else { xi };
                res = res.max(r.abs());
            }
        }
        let rhs_norm = self.rhs.iter().map(|r| norm_inf(r)).fold(0.0, f64::max);
        Ok((res, rhs_norm))
    }

    /// Total coupling storage in scalar entries.
    pub fn coupling_storage(&self) -> u64 {
        self.couplings.iter().map(LinearOperator::storage).sum()
    }
}
