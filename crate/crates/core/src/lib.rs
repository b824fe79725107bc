//! Forward and backward propagation through feed-forward and recurrent
//! networks, posed as block bi-diagonal triangular systems and solved by
//! substitution, cyclic reduction, or stationary and Krylov iterations.

pub mod activation;
pub mod direct;
pub mod error;
pub mod iterative;
pub mod exec;
pub mod experiment;
pub mod linalg;
pub mod net;
pub mod rnn;
pub mod system;
pub mod work;

pub use activation::ActivationKind;
pub use error::{Error, Result};
pub use exec::Exec;
pub use linalg::{Blocks, Matrix};
pub use net::{FeedForwardNet, ForwardTrace, GradientSet, Layer};
pub use rnn::{RecurrentLayer, RecurrentNet, RnnGradients, RnnTrace};
pub use work::WorkCounters;
