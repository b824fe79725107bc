//! Outer iteration over time, inner direct solves over layers.
//!
//! Scaling each time row by `L̄_s⁻¹` gives `z_s − L̄_s⁻¹ Ū z_nbr = L̄_s⁻¹ b_s`,
//! again unit diagonal with a strictly triangular remainder over time. Each
//! application of that remainder is one inner solve per coupled time step.

use serde::{Deserialize, Serialize};

use crate::direct::{inner_solve, InnerSolver};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{flatten, unflatten, Blocks};
use crate::system::NestedBlockSystem;
use crate::work::WorkCounters;

use super::bicgstab::{bicgstab_core, BICGSTAB_LIVE_VECTORS};
use super::stationary::{stationary_core, STATIONARY_LIVE_VECTORS};
use super::{IterReport, IterationConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OuterMethod {
    Jacobi,
    #[serde(rename = "bicgstab")]
    BiCgStab,
}

pub fn hybrid_solve_rnn(
    system: &NestedBlockSystem,
    outer: OuterMethod,
    inner: InnerSolver,
    config: &IterationConfig,
) -> Result<IterReport<Vec<Blocks>>> {
    hybrid_solve_rnn_with(system, outer, inner, config, Exec::default())
}

pub fn hybrid_solve_rnn_with(
    system: &NestedBlockSystem,
    outer: OuterMethod,
    inner: InnerSolver,
    config: &IterationConfig,
    exec: Exec,
) -> Result<IterReport<Vec<Blocks>>> {
    let tau = system.horizon();
    let max_iters = config.resolve(tau)?;
    let widths = system.layer_widths();
    let step_dim: usize = widths.iter().sum();
    let blocks = system.time_blocks();

    let scaled = exec.map(blocks, |_, b| inner_solve(b, b.rhs().clone(), inner, Exec::Sequential));
    let mut rhs = Vec::with_capacity(tau * step_dim);
    let mut setup = WorkCounters::default();
    for r in scaled {
        let (x, w) = r?;
        rhs.extend(flatten(&x));
        setup = setup.fork(w);
    }

    // Strictly triangular part over time: (N z)_s = L̄_s⁻¹ Ū z_nbr.
    let offdiag = |z: &[f64]| -> (Vec<f64>, WorkCounters) {
        let rows = exec.map_range(tau, |s| match system.time_neighbor(s) {
            None => (vec![0.0; step_dim], WorkCounters::default()),
            Some(nbr) => {
                let znbr = unflatten(&z[nbr * step_dim..(nbr + 1) * step_dim], &widths);
                let carried = system.time_coupling().apply(&znbr);
                let apply = WorkCounters {
                    fma: system.time_coupling().cost(),
                    parallel_steps: system.time_coupling().max_block_cost(),
                    ..WorkCounters::default()
                };
                let (x, w) = inner_solve(&blocks[s], carried, inner, Exec::Sequential)
                    .expect("inner solver validated during setup");
                (flatten(&x), apply.then(w))
            }
        });
        let mut out = Vec::with_capacity(tau * step_dim);
        let mut work = WorkCounters::default();
        for (x, w) in rows {
            out.extend(x);
            work = work.fork(w);
        }
        (out, work)
    };

    let (x, iterations, history, converged, restarts, work, live) = match outer {
        OuterMethod::Jacobi => {
            let run = stationary_core(std::slice::from_ref(&rhs), 1.0, config.tol, max_iters, |active, xs| {
                active
                    .iter()
                    .map(|&s| {
                        let (mut q, w) = offdiag(&xs[s]);
                        for (qi, bi) in q.iter_mut().zip(&rhs) {
                            *qi += bi;
                        }
                        (q, w)
                    })
                    .collect()
            })
            .pop()
            .ok_or_else(|| Error::Invalid("empty outer run".into()))?;
            (run.x, run.iterations, run.history, run.converged, 0, run.work, STATIONARY_LIVE_VECTORS)
        }
        OuterMethod::BiCgStab => {
            let run = bicgstab_core(&rhs, config, max_iters, |p| {
                let (mut q, w) = offdiag(p);
                for (qi, pi) in q.iter_mut().zip(p) {
                    *qi = pi - *qi;
                }
                (q, w)
            });
            (run.x, run.iterations, run.history, run.converged, run.restarts, run.work, BICGSTAB_LIVE_VECTORS)
        }
    };

    let solution: Vec<Blocks> = (0..tau)
        .map(|s| unflatten(&x[s * step_dim..(s + 1) * step_dim], &widths))
        .collect();
    let mut unscaled_residual: f64 = 0.0;
    for s in 0..tau {
        let (res, _) = system.effective_block(s, &solution)?.unscaled_residual(&solution[s])?;
        unscaled_residual = unscaled_residual.max(res);
    }
    Ok(IterReport {
        solution,
        iterations,
        residual_history: history,
        converged,
        restarts,
        unscaled_residual,
        work,
        setup,
        live_vectors: live,
    })
}
