//! Nested solve for time-unrolled recurrent systems.
//!
//! The outer chain runs over time; each of its diagonal blocks is a whole
//! layer chain, solved by substitution or cyclic reduction. Odd-even
//! reduction over time produces dense couplings `Ū L̄⁻¹ Ū`, built one column
//! at a time through inner solves.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{flatten, unflatten, Blocks, Matrix};
use crate::system::{BlockChainSystem, NestedBlockSystem, Orientation, TimeCoupling};
use crate::work::WorkCounters;

use super::cyclic::{cyclic_solve, CyclicOptions};
use super::substitution::substitute;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InnerSolver {
    #[default]
    Substitution,
    CyclicReduction {
        leaf_threshold: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NestedOptions {
    pub inner: InnerSolver,
    /// Time chains with at most this many steps are solved by substitution
    /// over time. Use `usize::MAX` for plain sequential time stepping.
    pub time_leaf_threshold: usize,
    pub exec: Exec,
}

impl Default for NestedOptions {
    fn default() -> Self {
        Self {
            inner: InnerSolver::default(),
            time_leaf_threshold: 2,
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NestedSolveReport {
    /// `solution[s][k]` is layer block `k` at time step `s`.
    pub solution: Vec<Blocks>,
    pub residual_norm: f64,
    /// Reduction depth over time.
    pub recursion_depth: usize,
    pub work: WorkCounters,
}

/// Solves one layer chain with a new right-hand side.
pub(crate) fn inner_solve(
    block: &BlockChainSystem,
    rhs: Blocks,
    inner: InnerSolver,
    exec: Exec,
) -> Result<(Blocks, WorkCounters)> {
    let sys = block.with_rhs(rhs)?;
    match inner {
        InnerSolver::Substitution => Ok(substitute(&sys)),
        InnerSolver::CyclicReduction { leaf_threshold } => {
            let (x, work, _) = cyclic_solve(&sys, &CyclicOptions {
                leaf_threshold,
                exec,
            })?;
            Ok((x, work))
        }
    }
}

pub fn solve_nested_rnn(system: &NestedBlockSystem, inner: InnerSolver) -> Result<NestedSolveReport> {
    solve_nested_rnn_with(
        system,
        &NestedOptions {
            inner,
            ..NestedOptions::default()
        },
    )
}

pub fn solve_nested_rnn_with(
    system: &NestedBlockSystem,
    opts: &NestedOptions,
) -> Result<NestedSolveReport> {
    if opts.time_leaf_threshold < 2 {
        return Err(Error::Invalid(format!(
            "time leaf threshold must be at least 2, got {}",
            opts.time_leaf_threshold
        )));
    }
    let widths = system.layer_widths();
    let chain = TimeChain {
        orientation: system.orientation(),
        blocks: system.time_blocks().iter().collect(),
        couplings: (1..system.horizon())
            .map(|_| TimeOp::Structured(system.time_coupling()))
            .collect(),
        rhs: system.time_blocks().iter().map(|b| flatten(b.rhs())).collect(),
    };
    let ctx = Ctx {
        widths: &widths,
        opts,
    };
    let (flat, work, depth) = ctx.recurse(chain, 0)?;
    let solution: Vec<Blocks> = flat.iter().map(|x| unflatten(x, &widths)).collect();
    let residual_norm = system.scaled_residual(&solution)?;
    Ok(NestedSolveReport {
        solution,
        residual_norm,
        recursion_depth: depth,
        work,
    })
}

#[derive(Clone, Debug)]
enum TimeOp<'a> {
    Structured(&'a TimeCoupling),
    Dense(Arc<Matrix>),
}

impl TimeOp<'_> {
    fn apply(&self, x: &[f64], widths: &[usize]) -> (Vec<f64>, WorkCounters) {
        match self {
            TimeOp::Structured(tc) => {
                let y = flatten(&tc.apply(&unflatten(x, widths)));
                let work = WorkCounters {
                    fma: tc.cost(),
                    parallel_steps: tc.max_block_cost(),
                    ..WorkCounters::default()
                };
                (y, work)
            }
            TimeOp::Dense(m) => (m.matvec(x), WorkCounters::serial(m.len() as u64, 0)),
        }
    }

    fn storage(&self) -> u64 {
        match self {
            TimeOp::Structured(_) => 0,
            TimeOp::Dense(m) => m.len() as u64,
        }
    }
}

/// A chain over time; `couplings[j]` joins positions `j` and `j + 1`.
struct TimeChain<'a> {
    orientation: Orientation,
    blocks: Vec<&'a BlockChainSystem>,
    couplings: Vec<TimeOp<'a>>,
    rhs: Vec<Vec<f64>>,
}

impl<'a> TimeChain<'a> {
    fn len(&self) -> usize {
        self.blocks.len()
    }

    fn coupling_into(&self, j: usize) -> Option<(usize, &TimeOp<'a>)> {
        match self.orientation {
            Orientation::LowerForward if j > 0 => Some((j - 1, &self.couplings[j - 1])),
            Orientation::UpperBackward if j + 1 < self.len() => Some((j + 1, &self.couplings[j])),
            _ => None,
        }
    }

    fn order(&self) -> Vec<usize> {
        match self.orientation {
            Orientation::LowerForward => (0..self.len()).collect(),
            Orientation::UpperBackward => (0..self.len()).rev().collect(),
        }
    }

    fn storage(&self) -> u64 {
        self.couplings.iter().map(TimeOp::storage).sum()
    }
}

struct Ctx<'w> {
    widths: &'w [usize],
    opts: &'w NestedOptions,
}

struct ReducedStep<'a> {
    rhs: Vec<f64>,
    coupling: Option<TimeOp<'a>>,
    work: WorkCounters,
}

impl Ctx<'_> {
    fn solve_block(&self, block: &BlockChainSystem, rhs: &[f64]) -> Result<(Vec<f64>, WorkCounters)> {
        let (x, work) = inner_solve(block, unflatten(rhs, self.widths), self.opts.inner, self.opts.exec)?;
        Ok((flatten(&x), work))
    }

    fn recurse<'a>(&self, chain: TimeChain<'a>, own_storage: u64) -> Result<(Vec<Vec<f64>>, WorkCounters, usize)> {
        if chain.len() < 3 || chain.len() <= self.opts.time_leaf_threshold {
            let (x, mut work) = self.substitute(&chain)?;
            work.peak_blocks_live = work.peak_blocks_live.max(own_storage);
            return Ok((x, work, 0));
        }
        let n = chain.len();
        let steps = self
            .opts
            .exec
            .map_range(n, |j| self.reduce_step(&chain, j))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;

        let mut level = WorkCounters::default();
        for s in &steps {
            level = level.fork(s.work);
        }

        let odd: Vec<usize> = (1..n).step_by(2).collect();
        let even: Vec<usize> = (0..n).step_by(2).collect();
        let orientation = chain.orientation;
        let blocks = chain.blocks;
        drop(chain.couplings);
        let mut slots: Vec<Option<ReducedStep<'a>>> = steps.into_iter().map(Some).collect();
        let mut take = |idx: &[usize]| -> TimeChain<'a> {
            let mut rhs = Vec::with_capacity(idx.len());
            let mut owned = Vec::with_capacity(idx.len());
            for &k in idx {
                let step = slots[k].take().expect("each step belongs to one chain");
                rhs.push(step.rhs);
                owned.push(step.coupling);
            }
            let couplings = (0..idx.len().saturating_sub(1))
                .map(|j| {
                    let owner = match orientation {
                        Orientation::LowerForward => j + 1,
                        Orientation::UpperBackward => j,
                    };
                    owned[owner]
                        .take()
                        .expect("interior time steps carry a reduced coupling")
                })
                .collect();
            TimeChain {
                orientation,
                blocks: idx.iter().map(|&k| blocks[k]).collect(),
                couplings,
                rhs,
            }
        };
        let odd_chain = take(&odd);
        let even_chain = take(&even);
        let (so, se) = (odd_chain.storage(), even_chain.storage());
        level.peak_blocks_live = level.peak_blocks_live.max(own_storage + so + se);

        let (a, b) = self.opts.exec.join(
            || self.recurse(odd_chain, so),
            || self.recurse(even_chain, se),
        );
        let (odd_x, odd_w, odd_d) = a?;
        let (even_x, even_w, even_d) = b?;
        let mut x = vec![Vec::new(); n];
        for (k, v) in odd.iter().zip(odd_x) {
            x[*k] = v;
        }
        for (k, v) in even.iter().zip(even_x) {
            x[*k] = v;
        }
        Ok((x, level.then(odd_w.fork(even_w)), 1 + odd_d.max(even_d)))
    }

    fn reduce_step<'a>(&self, chain: &TimeChain<'a>, j: usize) -> Result<ReducedStep<'a>> {
        let Some((mid, outer)) = chain.coupling_into(j) else {
            return Ok(ReducedStep {
                rhs: chain.rhs[j].clone(),
                coupling: None,
                work: WorkCounters::default(),
            });
        };
        let block = chain.blocks[mid];
        let (y, w_solve) = self.solve_block(block, &chain.rhs[mid])?;
        let (mut g, w_apply) = outer.apply(&y, self.widths);
        for (gi, ri) in g.iter_mut().zip(&chain.rhs[j]) {
            *gi += ri;
        }
        let mut work = w_solve.then(w_apply);

        let coupling = match chain.coupling_into(mid) {
            None => None,
            Some((_, inner_op)) => {
                let dim = y.len();
                let columns = self.opts.exec.map_range(dim, |c| -> Result<Option<(Vec<f64>, WorkCounters)>> {
                    let mut e = vec![0.0; dim];
                    e[c] = 1.0;
                    let (u, w1) = inner_op.apply(&e, self.widths);
                    if u.iter().all(|v| *v == 0.0) {
                        return Ok(None);
                    }
                    let (t, w2) = self.solve_block(block, &u)?;
                    let (col, w3) = outer.apply(&t, self.widths);
                    Ok(Some((col, w1.then(w2).then(w3))))
                });
                let mut m = Matrix::zeros(dim, dim);
                let mut build = WorkCounters::default();
                for (c, col) in columns.into_iter().enumerate() {
                    if let Some((col, w)) = col? {
                        for (r, v) in col.into_iter().enumerate() {
                            m.set(r, c, v);
                        }
                        build = build.fork(w);
                    }
                }
                work = work.fork(build);
                Some(TimeOp::Dense(Arc::new(m)))
            }
        };
        Ok(ReducedStep {
            rhs: g,
            coupling,
            work,
        })
    }

    fn substitute(&self, chain: &TimeChain<'_>) -> Result<(Vec<Vec<f64>>, WorkCounters)> {
        let mut x: Vec<Vec<f64>> = vec![Vec::new(); chain.len()];
        let mut work = WorkCounters::default();
        for j in chain.order() {
            let rhs = match chain.coupling_into(j) {
                Some((nbr, op)) => {
                    let (mut u, w) = op.apply(&x[nbr], self.widths);
                    work = work.then(w);
                    for (ui, ri) in u.iter_mut().zip(&chain.rhs[j]) {
                        *ui += ri;
                    }
                    u
                }
                None => chain.rhs[j].clone(),
            };
            let (xj, w) = self.solve_block(chain.blocks[j], &rhs)?;
            work = work.then(w);
            x[j] = xj;
        }
        Ok((x, work))
    }
}
