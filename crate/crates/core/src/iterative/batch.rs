use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::system::ShiftedBatch;

use super::bicgstab::bicgstab_solve_with;
use super::stationary::lockstep;
use super::{IterReport, IterationConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Jacobi,
    Richardson,
    #[serde(rename = "bicgstab")]
    BiCgStab,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Jacobi => "jacobi",
            Method::Richardson => "richardson",
            Method::BiCgStab => "bicgstab",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jacobi" => Ok(Method::Jacobi),
            "richardson" => Ok(Method::Richardson),
            "bicgstab" => Ok(Method::BiCgStab),
            other => Err(Error::Invalid(format!("unknown iterative method `{other}`"))),
        }
    }
}

pub fn solve_shifted_batch(
    batch: &ShiftedBatch,
    method: Method,
    config: &IterationConfig,
) -> Result<Vec<IterReport>> {
    solve_shifted_batch_with(batch, method, config, Exec::default())
}

/// Solves every member of `batch`.
///
/// Jacobi and Richardson advance all members in lockstep so each coupling is
/// read once per iteration for the whole batch; BiCGStab's inner products
/// differ per member, so members run independently (in parallel under
/// [`Exec::Parallel`]). Either way each report equals the standalone solve of
/// that member.
pub fn solve_shifted_batch_with(
    batch: &ShiftedBatch,
    method: Method,
    config: &IterationConfig,
    exec: Exec,
) -> Result<Vec<IterReport>> {
    let members = batch.members();
    match method {
        Method::Jacobi | Method::Richardson => {
            let cfg = match method {
                Method::Jacobi => IterationConfig {
                    omega: 1.0,
                    ..*config
                },
                _ => *config,
            };
            lockstep(&members, &cfg, exec)
        }
        Method::BiCgStab => exec
            .map(&members, |i, m| {
                bicgstab_solve_with(m, config, Exec::Sequential).map_err(|e| e.in_sample(i))
            })
            .into_iter()
            .collect(),
    }
}
