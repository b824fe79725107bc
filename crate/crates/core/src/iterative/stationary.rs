//! Jacobi and damped Richardson on the scaled system.
//!
//! With `Ã = I − N`, both read `x_{i+1} = (1 − ω) x_i + ω (b̃ + N x_i)`;
//! Jacobi is `ω = 1`. The vector `b̃ + N x_i` also gives the residual
//! `b̃ − Ãx_i`, so each iteration costs exactly one application of `N`.
//!
//! On a block chain the sweep is evaluated as `D⁻¹(A x_nbr + r)`, the same
//! arithmetic substitution performs, so every block Jacobi has fixed agrees
//! with substitution bit for bit.

use crate::error::Result;
use crate::exec::Exec;
use crate::linalg::{flatten, norm_inf, unflatten};
use crate::system::BlockChainSystem;
use crate::work::WorkCounters;

use super::{IterReport, IterationConfig};

pub(crate) const STATIONARY_LIVE_VECTORS: usize = 2;

pub fn jacobi_solve(system: &BlockChainSystem, config: &IterationConfig) -> Result<IterReport> {
    jacobi_solve_with(system, config, Exec::default())
}

pub fn jacobi_solve_with(
    system: &BlockChainSystem,
    config: &IterationConfig,
    exec: Exec,
) -> Result<IterReport> {
    let cfg = IterationConfig {
        omega: 1.0,
        ..*config
    };
    richardson_solve_with(system, &cfg, exec)
}

pub fn richardson_solve(system: &BlockChainSystem, config: &IterationConfig) -> Result<IterReport> {
    richardson_solve_with(system, config, Exec::default())
}

pub fn richardson_solve_with(
    system: &BlockChainSystem,
    config: &IterationConfig,
    exec: Exec,
) -> Result<IterReport> {
    let mut reports = lockstep(std::slice::from_ref(system), config, exec)?;
    Ok(reports.pop().expect("one member"))
}

/// Runs the stationary iteration on several systems that share their
/// couplings, applying each coupling to every active member in one pass.
pub(crate) fn lockstep(
    members: &[BlockChainSystem],
    config: &IterationConfig,
    exec: Exec,
) -> Result<Vec<IterReport>> {
    let first = &members[0];
    let max_iters = config.resolve(first.block_count())?;
    let widths = first.widths();
    let mut rhs = Vec::with_capacity(members.len());
    let mut setup = Vec::with_capacity(members.len());
    for m in members {
        let (b, muls) = m.scaled_rhs();
        rhs.push(flatten(&b));
        setup.push(WorkCounters::serial(0, muls));
    }

    let runs = stationary_core(&rhs, config.omega, config.tol, max_iters, |active, xs| {
        // Sweep rows, each evaluated for every active member.
        let rows = exec.map_range(first.block_count(), |k| {
            let (nbr, op) = first.coupling_into(k)?;
            let lo: usize = widths[..nbr].iter().sum();
            let per: Vec<(Vec<f64>, u64)> = active
                .iter()
                .map(|&s| {
                    let m = &members[s];
                    let mut u = op.apply(&xs[s][lo..lo + widths[nbr]]);
                    for (ui, ri) in u.iter_mut().zip(&m.rhs()[k]) {
                        *ui += ri;
                    }
                    let muls = m.inv_diagonal(k).scale(&mut u);
                    (u, muls)
                })
                .collect();
            Some((op.cost(), per))
        });
        active
            .iter()
            .enumerate()
            .map(|(a, &s)| {
                let mut out = Vec::with_capacity(rhs[s].len());
                let mut work = WorkCounters::default();
                let mut lo = 0;
                for (k, row) in rows.iter().enumerate() {
                    match row {
                        Some((cost, per)) => {
                            out.extend_from_slice(&per[a].0);
                            work.fma += cost;
                            work.activation += per[a].1;
                            work.parallel_steps = work.parallel_steps.max(*cost);
                        }
                        // The uncoupled end block is constant: b̃_k.
                        None => out.extend_from_slice(&rhs[s][lo..lo + widths[k]]),
                    }
                    lo += widths[k];
                }
                (out, work)
            })
            .collect()
    });

    members
        .iter()
        .zip(runs)
        .zip(setup)
        .map(|((m, run), setup)| {
            let solution = unflatten(&run.x, &widths);
            let (unscaled_residual, _) = m.unscaled_residual(&solution)?;
            Ok(IterReport {
                solution,
                iterations: run.iterations,
                residual_history: run.history,
                converged: run.converged,
                restarts: 0,
                unscaled_residual,
                work: run.work,
                setup,
                live_vectors: STATIONARY_LIVE_VECTORS,
            })
        })
        .collect()
}

pub(crate) struct StationaryRun {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub converged: bool,
    pub work: WorkCounters,
}

/// `sweep(active, xs)` returns `b̃_s + N xs[s]` and its cost for each active `s`,
/// in the order given.
pub(crate) fn stationary_core<F>(
    rhs: &[Vec<f64>],
    omega: f64,
    tol: f64,
    max_iters: usize,
    mut sweep: F,
) -> Vec<StationaryRun>
where
    F: FnMut(&[usize], &[Vec<f64>]) -> Vec<(Vec<f64>, WorkCounters)>,
{
    let mut runs: Vec<StationaryRun> = Vec::with_capacity(rhs.len());
    let mut norms = Vec::with_capacity(rhs.len());
    for b in rhs {
        let b_norm = norm_inf(b);
        norms.push(b_norm);
        if b_norm == 0.0 {
            runs.push(StationaryRun {
                x: vec![0.0; b.len()],
                iterations: 0,
                history: vec![0.0],
                converged: true,
                work: WorkCounters::default(),
            });
        } else {
            // x_0 = 0, so N x_0 = 0 and x_1 needs no coupling product.
            runs.push(StationaryRun {
                x: b.iter().map(|bi| omega * bi).collect(),
                iterations: 1,
                history: vec![1.0],
                converged: false,
                work: WorkCounters::default(),
            });
        }
    }
    let mut active: Vec<usize> = (0..rhs.len()).filter(|&s| norms[s] != 0.0).collect();
    while !active.is_empty() {
        let xs: Vec<Vec<f64>> = runs.iter().map(|r| r.x.clone()).collect();
        let products = sweep(&active, &xs);
        let mut still = Vec::with_capacity(active.len());
        for (&s, (y, w)) in active.iter().zip(products) {
            let run = &mut runs[s];
            run.work = run.work.then(w);
            let res = y
                .iter()
                .zip(&run.x)
                .map(|(yi, xi)| (yi - xi).abs())
                .fold(0.0, f64::max);
            let rel = res / norms[s];
            run.history.push(rel);
            if rel <= tol {
                run.converged = true;
                continue;
            }
            if run.iterations >= max_iters {
                continue;
            }
            for (xi, yi) in run.x.iter_mut().zip(&y) {
                *xi = (1.0 - omega) * *xi + omega * yi;
            }
            run.iterations += 1;
            still.push(s);
        }
        active = still;
    }
    runs
}
