//! Unpreconditioned BiCGStab on the scaled operator `I − N`, whose
//! eigenvalues are all exactly one.

use crate::error::Result;
use crate::exec::Exec;
use crate::linalg::{dot, flatten, norm_inf, unflatten};
use crate::system::BlockChainSystem;
use crate::work::WorkCounters;

use super::{IterReport, IterationConfig};

/// `x, r, r̂, p, v, s, t`.
pub(crate) const BICGSTAB_LIVE_VECTORS: usize = 7;

pub fn bicgstab_solve(system: &BlockChainSystem, config: &IterationConfig) -> Result<IterReport> {
    bicgstab_solve_with(system, config, Exec::default())
}

pub fn bicgstab_solve_with(
    system: &BlockChainSystem,
    config: &IterationConfig,
    exec: Exec,
) -> Result<IterReport> {
    let max_iters = config.resolve(system.block_count())?;
    let widths = system.widths();
    let (b, muls) = system.scaled_rhs();
    let b = flatten(&b);
    let run = bicgstab_core(&b, config, max_iters, |p| {
        let (q, work) = system
            .scaled_matvec_with(&unflatten(p, &widths), exec)
            .expect("iterate shapes follow the system");
        (flatten(&q), work)
    });
    let solution = unflatten(&run.x, &widths);
    let (unscaled_residual, _) = system.unscaled_residual(&solution)?;
    Ok(IterReport {
        solution,
        iterations: run.iterations,
        residual_history: run.history,
        converged: run.converged,
        restarts: run.restarts,
        unscaled_residual,
        work: run.work,
        setup: WorkCounters::serial(0, muls),
        live_vectors: BICGSTAB_LIVE_VECTORS,
    })
}

pub(crate) struct KrylovRun {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub converged: bool,
    pub restarts: usize,
    pub work: WorkCounters,
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// BiCGStab from `x_0 = 0` with `r̂ = r_0`.
///
/// Every iteration applies the operator exactly twice. A `ρ` or `ω` below
/// `breakdown_eps` in magnitude restarts from the current iterate, which costs
/// one more application to recompute the true residual.
pub(crate) fn bicgstab_core<F>(
    b: &[f64],
    config: &IterationConfig,
    max_iters: usize,
    mut apply: F,
) -> KrylovRun
where
    F: FnMut(&[f64]) -> (Vec<f64>, WorkCounters),
{
    let n = b.len();
    let b_norm = norm_inf(b);
    let mut x = vec![0.0; n];
    let mut work = WorkCounters::default();
    if b_norm == 0.0 {
        return KrylovRun {
            x,
            iterations: 0,
            history: vec![0.0],
            converged: true,
            restarts: 0,
            work,
        };
    }
    let eps = config.breakdown_eps;
    let mut r = b.to_vec();
    let mut r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let (mut rho_prev, mut alpha, mut omega): (f64, f64, f64) = (1.0, 1.0, 1.0);
    let mut history = vec![1.0];
    let mut restarts = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iters {
        let mut rho = dot(&r_hat, &r);
        if rho.abs() < eps || omega.abs() < eps {
            let (ax, w) = apply(&x);
            work = work.then(w);
            r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            r_hat = r.clone();
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            rho_prev = 1.0;
            alpha = 1.0;
            omega = 1.0;
            restarts += 1;
            rho = dot(&r_hat, &r);
            if rho.abs() < eps {
                break;
            }
        }
        iterations += 1;
        let beta = (rho / rho_prev) * (alpha / omega);
        for ((pi, ri), vi) in p.iter_mut().zip(&r).zip(&v) {
            *pi = ri + beta * (*pi - omega * vi);
        }
        let (vp, w) = apply(&p);
        work = work.then(w);
        v = vp;
        let den = dot(&r_hat, &v);
        alpha = if den != 0.0 { rho / den } else { 0.0 };
        let mut s = r.clone();
        axpy(&mut s, -alpha, &v);
        let (t, w) = apply(&s);
        work = work.then(w);
        let tt = dot(&t, &t);
        let s_rel = norm_inf(&s) / b_norm;
        if s_rel <= config.tol {
            axpy(&mut x, alpha, &p);
            history.push(s_rel);
            converged = true;
            break;
        }
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        axpy(&mut x, alpha, &p);
        axpy(&mut x, omega, &s);
        r = s;
        axpy(&mut r, -omega, &t);
        let rel = norm_inf(&r) / b_norm;
        history.push(rel);
        if rel <= config.tol {
            converged = true;
            break;
        }
        if alpha == 0.0 {
            // Forces a restart on the next pass.
            omega = 0.0;
        }
        rho_prev = rho;
    }
    KrylovRun {
        x,
        iterations,
        history,
        converged,
        restarts,
        work,
    }
}
