use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::Blocks;
use crate::net::{FeedForwardNet, ForwardTrace};
use crate::system::build::{
    backward_couplings, backward_inv_diagonals, backward_rhs, forward_couplings,
    forward_inv_diagonals, forward_rhs, BuildOptions,
};
use crate::system::chain::{BlockChainSystem, Orientation};
use crate::system::operator::{InverseDiagonal, LinearOperator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Forward,
    Backward,
}

impl Mode {
    pub fn orientation(self) -> Orientation {
        match self {
            Mode::Forward => Orientation::LowerForward,
            Mode::Backward => Orientation::UpperBackward,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Forward => "forward",
            Mode::Backward => "backward",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Mode::Forward),
            "backward" => Ok(Mode::Backward),
            other => Err(Error::Invalid(format!("unknown mode `{other}`"))),
        }
    }
}

/// One mini-batch member: its input, recorded trace, and output error.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchSample {
    pub input: Vec<f64>,
    pub trace: ForwardTrace,
    pub epsilon: Vec<f64>,
}

/// A family of systems that differ only in their diagonals and right-hand sides.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedBatch {
    orientation: Orientation,
    couplings: Arc<Vec<LinearOperator>>,
    inv_diagonals: Vec<Vec<InverseDiagonal>>,
    rhs: Vec<Blocks>,
}

impl ShiftedBatch {
    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn couplings(&self) -> &Arc<Vec<LinearOperator>> {
        &self.couplings
    }

    pub fn inv_diagonals(&self, i: usize) -> &[InverseDiagonal] {
        &self.inv_diagonals[i]
    }

    pub fn rhs(&self, i: usize) -> &Blocks {
        &self.rhs[i]
    }

    /// Member `i` as a standalone system sharing the batch couplings.
    pub fn member(&self, i: usize) -> BlockChainSystem {
        BlockChainSystem::new(
            self.orientation,
            self.inv_diagonals[i].clone(),
            Arc::clone(&self.couplings),
            self.rhs[i].clone(),
        )
        .expect("validated on construction")
    }

    pub fn members(&self) -> Vec<BlockChainSystem> {
        (0..self.len()).map(|i| self.member(i)).collect()
    }
}

pub fn build_shifted_batch(
    net: &FeedForwardNet,
    samples: &[BatchSample],
    mode: Mode,
) -> Result<ShiftedBatch> {
    build_shifted_batch_with(net, samples, mode, &BuildOptions::default())
}

pub fn build_shifted_batch_with(
    net: &FeedForwardNet,
    samples: &[BatchSample],
    mode: Mode,
    opts: &BuildOptions,
) -> Result<ShiftedBatch> {
    if samples.is_empty() {
        return Err(Error::Invalid("a batch needs at least one sample".into()));
    }
    let widths = net.widths();
    let couplings = match mode {
        Mode::Forward => forward_couplings(net),
        Mode::Backward => backward_couplings(net),
    };
    let mut inv_diagonals = Vec::with_capacity(samples.len());
    let mut rhs = Vec::with_capacity(samples.len());
    for (i, sample) in samples.iter().enumerate() {
        let member = || -> Result<(Vec<InverseDiagonal>, Blocks)> {
            match mode {
                Mode::Forward => Ok((
                    forward_inv_diagonals(&widths, &sample.trace, opts)?,
                    forward_rhs(net, &sample.input)?,
                )),
                Mode::Backward => Ok((
                    backward_inv_diagonals(net, &sample.trace)?,
                    backward_rhs(net, &sample.epsilon)?,
                )),
            }
        };
        let (d, r) = member().map_err(|e| e.in_sample(i))?;
        check_len("batch member blocks", widths.len(), d.len())?;
        inv_diagonals.push(d);
        rhs.push(r);
    }
    let batch = ShiftedBatch {
        orientation: mode.orientation(),
        couplings,
        inv_diagonals,
        rhs,
    };
    // Validates shapes once through the regular constructor.
    let _ = BlockChainSystem::new(
        batch.orientation,
        batch.inv_diagonals[0].clone(),
        Arc::clone(&batch.couplings),
        batch.rhs[0].clone(),
    )?;
    Ok(batch)
}
