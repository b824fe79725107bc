//! Operation tallies under the CREW PRAM cost model.
//!
//! `fma` counts scalar multiply-adds of coupling products, `activation` counts
//! diagonal scaling multiplies (the activation-derived terms), and
//! `parallel_steps` is the critical path in multiply-add units when every block
//! row of a level runs on its own processor. `peak_blocks_live` tracks the
//! largest number of intermediate coupling entries (f64 scalars) alive at once.

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkCounters {
    pub fma: u64,
    pub activation: u64,
    pub parallel_steps: u64,
    pub peak_blocks_live: u64,
}

impl WorkCounters {
    /// Work done by a single processor: every multiply-add is on the critical path.
    pub fn serial(fma: u64, activation: u64) -> Self {
        Self {
            fma,
            activation,
            parallel_steps: fma,
            peak_blocks_live: 0,
        }
    }

    /// `self` followed by `next` on the same critical path.
    pub fn then(self, next: WorkCounters) -> Self {
        Self {
            fma: self.fma + next.fma,
            activation: self.activation + next.activation,
            parallel_steps: self.parallel_steps + next.parallel_steps,
            peak_blocks_live: self.peak_blocks_live.max(next.peak_blocks_live),
        }
    }

    /// `self` and `other` running concurrently.
    pub fn fork(self, other: WorkCounters) -> Self {
        Self {
            fma: self.fma + other.fma,
            activation: self.activation + other.activation,
            parallel_steps: self.parallel_steps.max(other.parallel_steps),
            peak_blocks_live: self.peak_blocks_live + other.peak_blocks_live,
        }
    }

    /// Weighted total `fma + γ · activation`.
    pub fn total(&self, gamma: u64) -> u64 {
        self.fma + gamma * self.activation
    }
}

impl AddAssign for WorkCounters {
    fn add_assign(&mut self, rhs: Self) {
        *self = self.then(rhs);
    }
}
