use serde::Serialize;

use crate::system::BlockChainSystem;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominanceReport {
    /// Per block row: `max_i Σ_j |A_ij| / |D_ii|`, `+∞` where `D_ii = 0`.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

impl DominanceReport {
    /// Strict row diagonal dominance of the whole matrix.
    pub fn is_dominant(&self) -> bool {
        self.max_ratio < 1.0
    }
}

/// Row dominance ratios of the unscaled system, read straight from the stored
/// inverse diagonal: `|D_ii|⁻¹ = |d_i|`.
///
/// Informational only: the triangular structure makes every stationary
/// iteration here converge whatever these ratios are.
pub fn diagonal_dominance_check(system: &BlockChainSystem) -> DominanceReport {
    let ratios: Vec<f64> = (0..system.block_count())
        .map(|k| {
            let Some((_, op)) = system.coupling_into(k) else {
                return 0.0;
            };
            let a = op.to_dense();
            let d = system.inv_diagonal(k);
            (0..a.rows())
                .map(|i| {
                    let row_sum: f64 = a.row(i).iter().map(|v| v.abs()).sum();
                    let di = d.get(i).abs();
                    if di.is_infinite() {
                        f64::INFINITY
                    } else {
                        row_sum * di
                    }
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    DominanceReport { ratios, max_ratio }
}
