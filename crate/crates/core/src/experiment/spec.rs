use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::activation::ActivationKind;
use crate::direct::InnerSolver;
use crate::error::{Error, Result};
use crate::iterative::{IterationConfig, OuterMethod, DEFAULT_BREAKDOWN_EPS, DEFAULT_TOL};
use crate::system::Mode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Fnn,
    Rnn,
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetworkKind::Fnn => "fnn",
            NetworkKind::Rnn => "rnn",
        })
    }
}

impl FromStr for NetworkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fnn" => Ok(NetworkKind::Fnn),
            "rnn" => Ok(NetworkKind::Rnn),
            other => Err(Error::Invalid(format!("unknown network kind `{other}`"))),
        }
    }
}

/// Solver selection as written on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverChoice {
    Substitution,
    Cyclic,
    Jacobi,
    Richardson,
    BiCgStab,
    /// Recurrent systems only: outer iteration over time, inner direct solve.
    Hybrid { outer: OuterMethod, inner: InnerKind },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerKind {
    Substitution,
    Cyclic,
}

impl InnerKind {
    pub fn solver(self, leaf_threshold: usize) -> InnerSolver {
        match self {
            InnerKind::Substitution => InnerSolver::Substitution,
            InnerKind::Cyclic => InnerSolver::CyclicReduction { leaf_threshold },
        }
    }
}

impl fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverChoice::Substitution => f.write_str("substitution"),
            SolverChoice::Cyclic => f.write_str("cyclic"),
            SolverChoice::Jacobi => f.write_str("jacobi"),
            SolverChoice::Richardson => f.write_str("richardson"),
            SolverChoice::BiCgStab => f.write_str("bicgstab"),
            SolverChoice::Hybrid { outer, inner } => {
                let o = match outer {
                    OuterMethod::Jacobi => "jacobi",
                    OuterMethod::BiCgStab => "bicgstab",
                };
                let i = match inner {
                    InnerKind::Substitution => "substitution",
                    InnerKind::Cyclic => "cyclic",
                };
                write!(f, "hybrid:{o}+{i}")
            }
        }
    }
}

impl FromStr for SolverChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("unknown solver `{s}`"));
        match s {
            "substitution" => Ok(SolverChoice::Substitution),
            "cyclic" => Ok(SolverChoice::Cyclic),
            "jacobi" => Ok(SolverChoice::Jacobi),
            "richardson" => Ok(SolverChoice::Richardson),
            "bicgstab" => Ok(SolverChoice::BiCgStab),
            _ => {
                let rest = s.strip_prefix("hybrid:").ok_or_else(bad)?;
                let (o, i) = rest.split_once('+').ok_or_else(bad)?;
                let outer = match o {
                    "jacobi" => OuterMethod::Jacobi,
                    "bicgstab" => OuterMethod::BiCgStab,
                    _ => return Err(bad()),
                };
                let inner = match i {
                    "substitution" => InnerKind::Substitution,
                    "cyclic" => InnerKind::Cyclic,
                    _ => return Err(bad()),
                };
                Ok(SolverChoice::Hybrid { outer, inner })
            }
        }
    }
}

impl Serialize for SolverChoice {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SolverChoice {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Everything needed to regenerate and rerun one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: NetworkKind,
    /// `n_0 … n_l`.
    pub widths: Vec<usize>,
    pub tau: usize,
    pub batch: usize,
    pub activation: ActivationKind,
    pub mode: Mode,
    pub solver: SolverChoice,
    pub seed: u64,
    pub tol: f64,
    pub max_iters: Option<usize>,
    pub omega: f64,
    pub leaf_threshold: usize,
    /// Overrides the activation's default operation-count constant.
    pub gamma: Option<u64>,
}

impl ExperimentSpec {
    /// A feed-forward spec with uniform width and the default solver settings.
    pub fn fnn(layers: usize, width: usize, activation: ActivationKind, seed: u64) -> Self {
        Self {
            kind: NetworkKind::Fnn,
            widths: vec![width; layers + 1],
            tau: 1,
            batch: 1,
            activation,
            mode: Mode::Forward,
            solver: SolverChoice::Substitution,
            seed,
            tol: DEFAULT_TOL,
            max_iters: None,
            omega: 1.0,
            leaf_threshold: 2,
            gamma: None,
        }
    }

    pub fn rnn(layers: usize, width: usize, tau: usize, activation: ActivationKind, seed: u64) -> Self {
        Self {
            kind: NetworkKind::Rnn,
            tau,
            ..Self::fnn(layers, width, activation, seed)
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_solver(mut self, solver: SolverChoice) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_batch(mut self, batch: usize) -> Self {
        self.batch = batch;
        self
    }

    pub fn layers(&self) -> usize {
        self.widths.len().saturating_sub(1)
    }

    /// The common width, if every layer has the same one.
    pub fn uniform_width(&self) -> Option<usize> {
        let first = *self.widths.first()?;
        self.widths.iter().all(|&w| w == first).then_some(first)
    }

    pub fn gamma(&self) -> u64 {
        self.gamma.unwrap_or_else(|| self.activation.default_gamma())
    }

    pub fn iteration_config(&self) -> IterationConfig {
        IterationConfig {
            tol: self.tol,
            max_iters: self.max_iters,
            omega: self.omega,
            breakdown_eps: DEFAULT_BREAKDOWN_EPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::Invalid("need at least one layer".into()));
        }
        if self.widths.contains(&0) {
            return Err(Error::Invalid("layer widths must be at least 1".into()));
        }
        if self.tau == 0 {
            return Err(Error::Invalid("horizon must be at least 1".into()));
        }
        if self.batch == 0 {
            return Err(Error::Invalid("batch must be at least 1".into()));
        }
        if self.leaf_threshold < 2 {
            return Err(Error::Invalid("leaf threshold must be at least 2".into()));
        }
        if self.kind == NetworkKind::Fnn && self.tau != 1 {
            return Err(Error::Invalid("feed-forward networks have horizon 1".into()));
        }
        match (self.kind, self.solver) {
            (NetworkKind::Fnn, SolverChoice::Hybrid { .. }) => Err(Error::Invalid(
                "hybrid solvers apply to recurrent networks only".into(),
            )),
            (NetworkKind::Rnn, SolverChoice::Richardson) => Err(Error::Invalid(
                "richardson is not available for recurrent networks".into(),
            )),
            _ => self.iteration_config().resolve(1).map(|_| ()),
        }
    }
}
