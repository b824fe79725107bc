//! Forward passes with diagonals taken from an earlier network state.
//!
//! The diagonals of network `N` are recorded from its own forward pass. After
//! a perturbation `N′ = N + σ·noise`, the forward system of `N′` is solved with
//! those recorded diagonals and compared against the true forward pass of
//! `N′`.

use serde::Serialize;

use crate::direct::solve_substitution;
use crate::error::{Error, Result};
use crate::linalg::blocks_max_abs_diff;
use crate::system::build_forward_system;

use super::generate::{generate_data, generate_network, perturb_network, Network};
use super::spec::{ExperimentSpec, NetworkKind};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StalePoint {
    pub sigma: f64,
    /// Median over seeds of the largest activation error.
    pub median_error: f64,
    pub errors: Vec<f64>,
    /// Seeds whose recorded diagonals could not be formed.
    pub breakdowns: usize,
}

/// Error of the stale-diagonal forward pass for one seed and one `σ`.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn stale_diagonal_error(spec: &ExperimentSpec, sigma: f64) -> Result<f64> {
    if spec.kind != NetworkKind::Fnn {
        return Err(Error::Invalid("stale-diagonal runs take feed-forward networks".into()));
    }
    if !(sigma >= 0.0) {
        return Err(Error::Invalid(format!("perturbation scale must be non-negative, got {sigma}")));
    }
    let Network::Fnn(net) = generate_network(spec)? else {
        unreachable!("kind checked above")
    };
    let input = generate_data(spec)[0].inputs[0].clone();
    let recorded = net.forward(&input)?;
    let moved = perturb_network(&net, sigma, spec.seed)?;
    let system = build_forward_system(&moved, &input, &recorded)?;
    let approx = solve_substitution(&system)?;
    let truth = moved.forward(&input)?;
    Ok(blocks_max_abs_diff(&approx.solution, &truth.activations))
}

pub fn stale_diagonal_experiment(
    spec: &ExperimentSpec,
    sigmas: &[f64],
    seeds: &[u64],
) -> Result<Vec<StalePoint>> {
    sigmas
        .iter()
        .map(|&sigma| {
            let mut errors = Vec::with_capacity(seeds.len());
            let mut breakdowns = 0;
            for &seed in seeds {
                let s = ExperimentSpec {
                    seed,
                    ..spec.clone()
                };
                match stale_diagonal_error(&s, sigma) {
                    Ok(e) => errors.push(e),
                    Err(Error::Breakdown { .. }) => breakdowns += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok(StalePoint {
                sigma,
                median_error: median(&errors),
                errors,
                breakdowns,
            })
        })
        .collect()
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
