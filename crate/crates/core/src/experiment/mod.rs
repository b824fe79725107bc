//! Experiment harness: seeded generation, solver runs checked against the
//! sequential reference, closed-form work prediction, and serialization.

mod generate;
mod io;
mod predict;
mod run;
mod spec;
mod stale;

pub use generate::{
    generate_data, generate_network, output_error, perturb_network, Network, SampleData,
    SeededRng, DATA_STREAM, NETWORK_STREAM, PERTURBATION_STREAM,
};
pub use io::{read_network, write_network, LayerFile, NetworkFile};
pub use predict::{
    predict_depth, predict_work, reduction_level_coupled_fma, PredictMethod, PredictedWork,
    Realised,
};
pub use run::{run_experiment, run_experiment_with, Report, CSV_HEADER, VERIFY_TOLERANCE};
pub use spec::{ExperimentSpec, InnerKind, NetworkKind, SolverChoice};
pub use stale::{stale_diagonal_error, stale_diagonal_experiment, StalePoint};
