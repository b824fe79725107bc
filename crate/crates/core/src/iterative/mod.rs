//! Iterative solvers on the diagonally scaled systems `(D⁻¹L) x = D⁻¹ r`.
//!
//! The scaled matrix is `I − N` with `N` strictly block triangular, so every
//! stationary iteration here is exact after at most block-count steps.

mod batch;
mod bicgstab;
mod dominance;
mod hybrid;
mod stationary;

pub use batch::{solve_shifted_batch, solve_shifted_batch_with, Method};
pub use bicgstab::{bicgstab_solve, bicgstab_solve_with};
pub use dominance::{diagonal_dominance_check, DominanceReport};
pub use hybrid::{hybrid_solve_rnn, hybrid_solve_rnn_with, OuterMethod};
pub use stationary::{jacobi_solve, jacobi_solve_with, richardson_solve, richardson_solve_with};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Blocks;
use crate::system::BlockChainSystem;
use crate::work::WorkCounters;

/// `q = (D⁻¹L) p` on a block chain; see [`BlockChainSystem::scaled_matvec`].
pub fn scaled_matvec(system: &BlockChainSystem, p: &[Vec<f64>]) -> Result<Blocks> {
    system.scaled_matvec(p).map(|(q, _)| q)
}

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_BREAKDOWN_EPS: f64 = 1e-30;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationConfig {
    /// Target for `‖b̃ − Ãx‖∞ / ‖b̃‖∞` on the scaled system.
    pub tol: f64,
    /// `None` means four times the block count.
    pub max_iters: Option<usize>,
    /// Richardson damping.
    pub omega: f64,
    pub breakdown_eps: f64,
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iters: None,
            omega: 1.0,
            breakdown_eps: DEFAULT_BREAKDOWN_EPS,
        }
    }
}

impl IterationConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = Some(max_iters);
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    // Negated so NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub(crate) fn resolve(&self, blocks: usize) -> Result<usize> {
        if !(self.tol > 0.0) {
            return Err(Error::Invalid(format!("tolerance must be positive, got {}", self.tol)));
        }
        if !self.omega.is_finite() {
            return Err(Error::Invalid(format!("damping must be finite, got {}", self.omega)));
        }
        let max_iters = self.max_iters.unwrap_or(4 * blocks);
        if max_iters == 0 {
            return Err(Error::Invalid("max_iters must be at least 1".into()));
        }
        Ok(max_iters)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterReport<S = Blocks> {
    pub solution: S,
    /// η: iterations taken.
    pub iterations: usize,
    /// Relative scaled residuals `r_0 … r_η`.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub restarts: usize,
    /// `‖r − L x‖∞` on the unscaled system.
    pub unscaled_residual: f64,
    /// Work inside the iteration loop.
    pub work: WorkCounters,
    /// Forming the scaled right-hand side.
    pub setup: WorkCounters,
    /// Full-length vectors the method keeps alive.
    pub live_vectors: usize,
}

impl<S> IterReport<S> {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }
}
