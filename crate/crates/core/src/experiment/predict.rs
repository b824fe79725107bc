//! Closed-form operation counts.
//!
//! Everything here is computed from layer widths alone. With `n_0 … n_l` and
//! `r` samples:
//!
//! * substitution: `r Σ_k n_{k+1} n_k` multiply-adds and `r Σ_k n_{k+1}`
//!   activation-derived scalings;
//! * one reduction level: `Σ_k (n_{k+1} n_k n_{k−1} + n_{k+1} n_k)` over the
//!   blocks that get a reduced coupling, plus `n_1 n_0` for the block next to
//!   the free end (its new right-hand side needs no coupling product);
//! * iterative methods: per-application cost times the number of applications,
//!   `η` for Jacobi/Richardson and `2η + restarts` for BiCGStab.
//!
//! Cyclic reduction on non-uniform widths is counted by walking the same
//! recursion tree the solver builds, level by level.

use serde::Serialize;

use crate::system::Mode;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictMethod {
    Substitution,
    CyclicReduction { leaf_threshold: usize },
    Jacobi,
    Richardson,
    BiCgStab,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PredictedWork {
    pub fma: u64,
    pub activation: u64,
    pub parallel_steps: u64,
    pub peak_blocks_live: u64,
    /// `fma + γ · activation`.
    pub total: u64,
}

/// Iteration counts realised by an iterative run, summed over samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Realised {
    pub iterations: u64,
    pub restarts: u64,
}

/// One block of a chain in solve order: width and whether its inverse
/// diagonal is the identity (no scaling multiplies).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Slot {
    width: u64,
    identity: bool,
}

/// Blocks in solve order. Block 0 of both the forward and the backward system
/// has an identity diagonal; it is solved first going forward, last going back.
fn chain(widths: &[usize], mode: Mode) -> Vec<Slot> {
    let mut slots: Vec<Slot> = widths
        .iter()
        .enumerate()
        .map(|(k, &w)| Slot {
            width: w as u64,
            identity: k == 0,
        })
        .collect();
    if mode == Mode::Backward {
        slots.reverse();
    }
    slots
}

#[derive(Clone, Copy, Default)]
struct Tally {
    fma: u64,
    activation: u64,
    steps: u64,
    peak: u64,
}

impl Tally {
    fn then(self, o: Tally) -> Tally {
        Tally {
            fma: self.fma + o.fma,
            activation: self.activation + o.activation,
            steps: self.steps + o.steps,
            peak: self.peak.max(o.peak),
        }
    }

    fn fork(self, o: Tally) -> Tally {
        Tally {
            fma: self.fma + o.fma,
            activation: self.activation + o.activation,
            steps: self.steps.max(o.steps),
            peak: self.peak + o.peak,
        }
    }
}

fn substitution(slots: &[Slot]) -> Tally {
    let fma: u64 = slots.windows(2).map(|p| p[1].width * p[0].width).sum();
    let activation = slots.iter().filter(|s| !s.identity).map(|s| s.width).sum();
    Tally {
        fma,
        activation,
        steps: fma,
        peak: 0,
    }
}

/// Cost of one matrix application `N p`.
fn offdiag(slots: &[Slot]) -> Tally {
    let mut t = Tally::default();
    for j in 1..slots.len() {
        let c = slots[j].width * slots[j - 1].width;
        t.fma += c;
        if !slots[j].identity {
            t.activation += slots[j].width;
        }
        t.steps = t.steps.max(c);
    }
    t
}

/// Multiply-adds of one reduction level over the blocks that get a reduced
/// coupling, in solve order.
pub fn reduction_level_coupled_fma(widths: &[usize], mode: Mode) -> u64 {
    let s = chain(widths, mode);
    (2..s.len())
        .map(|j| s[j].width * s[j - 1].width * s[j - 2].width + s[j].width * s[j - 1].width)
        .sum()
}

fn level(slots: &[Slot]) -> Tally {
    let mut t = Tally::default();
    for j in 1..slots.len() {
        let (w, mid) = (slots[j].width, slots[j - 1]);
        let mut fma = w * mid.width;
        let mut act = 0;
        if j >= 2 {
            fma += w * mid.width * slots[j - 2].width;
            if !mid.identity {
                act += w * mid.width;
            }
        } else if !mid.identity {
            act += mid.width;
        }
        t.fma += fma;
        t.activation += act;
        t.steps = t.steps.max(fma);
    }
    t
}

fn storage(slots: &[Slot]) -> u64 {
    slots.windows(2).map(|p| p[1].width * p[0].width).sum()
}

fn cyclic(slots: &[Slot], own_storage: u64, leaf: usize) -> (Tally, usize) {
    if slots.len() <= leaf {
        let mut t = substitution(slots);
        t.peak = own_storage;
        return (t, 0);
    }
    let odd: Vec<Slot> = slots.iter().skip(1).step_by(2).copied().collect();
    let even: Vec<Slot> = slots.iter().step_by(2).copied().collect();
    let (so, se) = (storage(&odd), storage(&even));
    let mut lv = level(slots);
    lv.peak = own_storage + so + se;
    let (to, d_o) = cyclic(&odd, so, leaf);
    let (te, d_e) = cyclic(&even, se, leaf);
    (lv.then(to.fork(te)), 1 + d_o.max(d_e))
}

/// Predicted counters for `batch` samples of a feed-forward system.
pub fn predict_work(
    widths: &[usize],
    mode: Mode,
    method: PredictMethod,
    batch: usize,
    realised: Realised,
    gamma: u64,
) -> PredictedWork {
    let slots = chain(widths, mode);
    let r = batch as u64;
    let tally = match method {
        PredictMethod::Substitution => repeat(substitution(&slots), r),
        PredictMethod::CyclicReduction { leaf_threshold } => {
            repeat(cyclic(&slots, 0, leaf_threshold.max(2)).0, r)
        }
        PredictMethod::Jacobi | PredictMethod::Richardson => {
            repeat(offdiag(&slots), realised.iterations)
        }
        PredictMethod::BiCgStab => {
            repeat(offdiag(&slots), 2 * realised.iterations + realised.restarts)
        }
    };
    PredictedWork {
        fma: tally.fma,
        activation: tally.activation,
        parallel_steps: tally.steps,
        peak_blocks_live: tally.peak,
        total: tally.fma + gamma * tally.activation,
    }
}

/// Recursion depth cyclic reduction reaches on `blocks` blocks.
pub fn predict_depth(blocks: usize, leaf_threshold: usize) -> usize {
    if blocks <= leaf_threshold.max(2) {
        0
    } else {
        1 + predict_depth(blocks / 2, leaf_threshold).max(predict_depth(blocks - blocks / 2, leaf_threshold))
    }
}

fn repeat(t: Tally, times: u64) -> Tally {
    Tally {
        fma: t.fma * times,
        activation: t.activation * times,
        steps: t.steps * times,
        peak: if times == 0 { 0 } else { t.peak },
    }
}
