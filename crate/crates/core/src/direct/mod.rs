//! Exact solvers: block substitution, odd-even cyclic reduction, and the
//! nested time-over-layers solver for recurrent systems.

mod appendix;
mod cyclic;
mod nested;
mod reduction;
mod substitution;

pub use appendix::{appendix_scaling_check, AppendixCheck, APPENDIX_TOLERANCE};
pub use cyclic::{solve_cyclic_reduction, solve_cyclic_reduction_with, CyclicOptions};
pub use nested::{
    solve_nested_rnn, solve_nested_rnn_with, InnerSolver, NestedOptions, NestedSolveReport,
};
pub use reduction::{
    equivalent_propagations, reduce_once, reduce_once_with, PropagationView, ReductionLevel,
};
pub use substitution::solve_substitution;

pub(crate) use nested::inner_solve;

use crate::linalg::Blocks;
use crate::work::WorkCounters;

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    /// Solution blocks in the original block order.
    pub solution: Blocks,
    /// `‖D⁻¹(r − L x)‖∞` on the original system.
    pub residual_norm: f64,
    pub recursion_depth: usize,
    pub work: WorkCounters,
}
