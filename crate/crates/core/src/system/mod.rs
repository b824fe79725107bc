//! Block bi-diagonal triangular systems equivalent to forward and backward
//! propagation, for single samples, mini-batches, and recurrent networks.

mod batch;
mod build;
mod chain;
mod dense;
mod nested;
mod operator;

pub use batch::{build_shifted_batch, build_shifted_batch_with, BatchSample, Mode, ShiftedBatch};
pub use build::{
    build_backward_system, build_forward_system, build_forward_system_with, diag_ratio_forward,
    BuildOptions, DEFAULT_EPS_ZERO,
};
pub use chain::{BlockChainSystem, Orientation};
pub use dense::{
    assemble_dense, assemble_dense_nested, assemble_dense_nested_with_cap,
    assemble_dense_with_cap, DEFAULT_DENSE_CAP,
};
pub use nested::{
    build_rnn_backward_system, build_rnn_forward_system, build_rnn_forward_system_with,
    NestedBlockSystem, TimeCoupling,
};
pub use operator::{InverseDiagonal, LinearOperator};

pub(crate) use dense::offsets;
