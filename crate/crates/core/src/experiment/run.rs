use std::time::Instant;

use serde::Serialize;

use crate::direct::{
    solve_cyclic_reduction_with, solve_nested_rnn_with, solve_substitution, CyclicOptions,
    InnerSolver, NestedOptions,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::iterative::{
    hybrid_solve_rnn_with, solve_shifted_batch_with, IterReport, Method, OuterMethod,
};
use crate::linalg::{blocks_max_abs_diff, Blocks};
use crate::net::FeedForwardNet;
use crate::rnn::RecurrentNet;
use crate::system::{
    build_backward_system, build_forward_system, build_rnn_backward_system,
    build_rnn_forward_system, build_shifted_batch, BatchSample, BlockChainSystem, Mode,
    NestedBlockSystem,
};
use crate::work::WorkCounters;

use super::generate::{generate_data, generate_network, output_error, Network, SampleData};
use super::predict::{predict_work, PredictMethod, PredictedWork, Realised};
use super::spec::{ExperimentSpec, InnerKind, SolverChoice};

/// Reports pass verification below this oracle error.
pub const VERIFY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub spec: ExperimentSpec,
    pub oracle_max_abs_err: f64,
    /// Largest `‖D⁻¹(r − L x)‖∞` over samples.
    pub residual_norm: f64,
    /// Largest η over samples; 0 for direct solvers.
    pub iterations: usize,
    pub recursion_depth: usize,
    pub restarts: usize,
    pub converged: bool,
    pub work: WorkCounters,
    pub predicted_work: Option<PredictedWork>,
    /// Solver failure, such as a forward breakdown, if the run did not finish.
    pub error: Option<String>,
    pub wall_ms: f64,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.converged && self.oracle_max_abs_err < VERIFY_TOLERANCE
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn csv_row(&self) -> String {
        let s = &self.spec;
        let width = match s.uniform_width() {
            Some(n) => n.to_string(),
            None => s.widths.iter().map(usize::to_string).collect::<Vec<_>>().join(";"),
        };
        let (pf, pt) = match &self.predicted_work {
            Some(p) => (p.fma.to_string(), p.total.to_string()),
            None => (String::new(), String::new()),
        };
        [
            s.kind.to_string(),
            s.layers().to_string(),
            width,
            s.tau.to_string(),
            s.batch.to_string(),
            s.activation.to_string(),
            s.mode.to_string(),
            s.solver.to_string(),
            s.seed.to_string(),
            format!("{:e}", self.oracle_max_abs_err),
            format!("{:e}", self.residual_norm),
            self.iterations.to_string(),
            self.recursion_depth.to_string(),
            self.restarts.to_string(),
            self.converged.to_string(),
            self.work.fma.to_string(),
            self.work.activation.to_string(),
            self.work.parallel_steps.to_string(),
            self.work.peak_blocks_live.to_string(),
            pf,
            pt,
            format!("{:.3}", self.wall_ms),
        ]
        .join(",")
    }
}

pub const CSV_HEADER: &str = "kind,layers,width,tau,batch,activation,mode,solver,seed,\
oracle_max_abs_err,residual_norm,iterations,recursion_depth,restarts,converged,\
fma,activation_count,parallel_steps,peak_blocks_live,predicted_fma,predicted_total,wall_ms";

#[derive(Default)]
struct Outcome {
    max_err: f64,
    residual: f64,
    iterations: usize,
    total_iterations: u64,
    depth: usize,
    restarts: usize,
    converged: bool,
    work: WorkCounters,
}

impl Outcome {
    fn absorb<S>(&mut self, r: &IterReport<S>, err: f64, residual: f64) {
        self.max_err = self.max_err.max(err);
        self.residual = self.residual.max(residual);
        self.iterations = self.iterations.max(r.iterations);
        self.total_iterations += r.iterations as u64;
        self.restarts += r.restarts;
        self.converged &= r.converged;
        self.work = self.work.then(r.work);
    }
}

/// Generates the network and data, runs the solver, and checks it against the
/// sequential reference. Solver failures are recorded in the report; only an
/// invalid spec is an error.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Report> {
    run_experiment_with(spec, Exec::default())
}

pub fn run_experiment_with(spec: &ExperimentSpec, exec: Exec) -> Result<Report> {
    spec.validate()?;
    let start = Instant::now();
    let net = generate_network(spec)?;
    let data = generate_data(spec);
    let outcome = match &net {
        Network::Fnn(n) => run_fnn(spec, n, &data, exec),
        Network::Rnn(n) => run_rnn(spec, n, &data, exec),
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let (o, error) = match outcome {
        Ok(o) => (o, None),
        Err(e @ Error::Invalid(_)) => return Err(e),
        Err(e) => (
            Outcome {
                max_err: f64::INFINITY,
                residual: f64::INFINITY,
                ..Outcome::default()
            },
            Some(e.to_string()),
        ),
    };
    let predicted_work = predicted(spec, &o);
    Ok(Report {
        spec: spec.clone(),
        oracle_max_abs_err: o.max_err,
        residual_norm: o.residual,
        iterations: o.iterations,
        recursion_depth: o.depth,
        restarts: o.restarts,
        converged: error.is_none() && o.converged,
        work: o.work,
        predicted_work,
        error,
        wall_ms,
    })
}

fn predicted(spec: &ExperimentSpec, o: &Outcome) -> Option<PredictedWork> {
    if spec.kind != super::spec::NetworkKind::Fnn {
        return None;
    }
    let method = match spec.solver {
        SolverChoice::Substitution => PredictMethod::Substitution,
        SolverChoice::Cyclic => PredictMethod::CyclicReduction {
            leaf_threshold: spec.leaf_threshold,
        },
        SolverChoice::Jacobi => PredictMethod::Jacobi,
        SolverChoice::Richardson => PredictMethod::Richardson,
        SolverChoice::BiCgStab => PredictMethod::BiCgStab,
        SolverChoice::Hybrid { .. } => return None,
    };
    let realised = Realised {
        iterations: o.total_iterations,
        restarts: o.restarts as u64,
    };
    Some(predict_work(&spec.widths, spec.mode, method, spec.batch, realised, spec.gamma()))
}

fn run_fnn(spec: &ExperimentSpec, net: &FeedForwardNet, data: &[SampleData], exec: Exec) -> Result<Outcome> {
    let mut samples = Vec::with_capacity(data.len());
    let mut oracles: Vec<Blocks> = Vec::with_capacity(data.len());
    for d in data {
        let input = d.inputs[0].clone();
        let trace = net.forward(&input)?;
        let epsilon = output_error(trace.output(), &d.targets[0])?;
        oracles.push(match spec.mode {
            Mode::Forward => trace.activations.clone(),
            Mode::Backward => net.backward(&trace, &epsilon)?.layer_errors,
        });
        samples.push(BatchSample {
            input,
            trace,
            epsilon,
        });
    }
    let mut out = Outcome {
        converged: true,
        ..Outcome::default()
    };

    let method = match spec.solver {
        SolverChoice::Jacobi => Some(Method::Jacobi),
        SolverChoice::Richardson => Some(Method::Richardson),
        SolverChoice::BiCgStab => Some(Method::BiCgStab),
        _ => None,
    };
    if let Some(method) = method {
        let batch = build_shifted_batch(net, &samples, spec.mode)?;
        let reports = solve_shifted_batch_with(&batch, method, &spec.iteration_config(), exec)?;
        for (i, r) in reports.iter().enumerate() {
            let residual = batch.member(i).scaled_residual(&r.solution)?;
            out.absorb(r, blocks_max_abs_diff(&r.solution, &oracles[i]), residual);
        }
        return Ok(out);
    }

    let systems = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            match spec.mode {
                Mode::Forward => build_forward_system(net, &s.input, &s.trace),
                Mode::Backward => build_backward_system(net, &s.trace, &s.epsilon),
            }
            .map_err(|e| e.in_sample(i))
        })
        .collect::<Result<Vec<BlockChainSystem>>>()?;
    let opts = CyclicOptions {
        leaf_threshold: spec.leaf_threshold,
        exec,
    };
    for (sys, oracle) in systems.iter().zip(&oracles) {
        let report = match spec.solver {
            SolverChoice::Substitution => solve_substitution(sys)?,
            SolverChoice::Cyclic => solve_cyclic_reduction_with(sys, &opts)?,
            other => return Err(Error::Invalid(format!("{other} does not apply to feed-forward networks"))),
        };
        out.max_err = out.max_err.max(blocks_max_abs_diff(&report.solution, oracle));
        out.residual = out.residual.max(report.residual_norm);
        out.depth = out.depth.max(report.recursion_depth);
        out.work = out.work.then(report.work);
    }
    Ok(out)
}

fn nested_max_diff(a: &[Blocks], b: &[Blocks]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| blocks_max_abs_diff(x, y))
        .fold(0.0, f64::max)
}

fn run_rnn(spec: &ExperimentSpec, net: &RecurrentNet, data: &[SampleData], exec: Exec) -> Result<Outcome> {
    let mut out = Outcome {
        converged: true,
        ..Outcome::default()
    };
    for (i, d) in data.iter().enumerate() {
        let mut one = || -> Result<()> {
            let trace = net.forward(&d.inputs)?;
            let errors = trace
                .steps
                .iter()
                .zip(&d.targets)
                .map(|(s, t)| output_error(s.output(), t))
                .collect::<Result<Vec<_>>>()?;
            let (system, oracle): (NestedBlockSystem, Vec<Blocks>) = match spec.mode {
                Mode::Forward => (
                    build_rnn_forward_system(net, &d.inputs, &trace)?,
                    trace.steps.iter().map(|s| s.activations.clone()).collect(),
                ),
                Mode::Backward => (
                    build_rnn_backward_system(net, &trace, &errors)?,
                    net.backward(&trace, &errors)?.layer_errors,
                ),
            };
            let cfg = spec.iteration_config();
            let leaf = spec.leaf_threshold;
            let hybrid = |outer: OuterMethod, inner: InnerSolver| {
                hybrid_solve_rnn_with(&system, outer, inner, &cfg, exec)
            };
            let direct = |opts: NestedOptions| solve_nested_rnn_with(&system, &opts);
            match spec.solver {
                SolverChoice::Substitution | SolverChoice::Cyclic => {
                    let opts = if spec.solver == SolverChoice::Substitution {
                        NestedOptions {
                            inner: InnerSolver::Substitution,
                            time_leaf_threshold: usize::MAX,
                            exec,
                        }
                    } else {
                        NestedOptions {
                            inner: InnerSolver::CyclicReduction { leaf_threshold: leaf },
                            time_leaf_threshold: leaf,
                            exec,
                        }
                    };
                    let r = direct(opts)?;
                    out.max_err = out.max_err.max(nested_max_diff(&r.solution, &oracle));
                    out.residual = out.residual.max(r.residual_norm);
                    out.depth = out.depth.max(r.recursion_depth);
                    out.work = out.work.then(r.work);
                }
                SolverChoice::Jacobi | SolverChoice::BiCgStab | SolverChoice::Hybrid { .. } => {
                    let (outer, inner) = match spec.solver {
                        SolverChoice::Jacobi => (OuterMethod::Jacobi, InnerSolver::Substitution),
                        SolverChoice::BiCgStab => (OuterMethod::BiCgStab, InnerSolver::Substitution),
                        SolverChoice::Hybrid { outer, inner } => (
                            outer,
                            match inner {
                                InnerKind::Substitution => InnerSolver::Substitution,
                                InnerKind::Cyclic => InnerSolver::CyclicReduction { leaf_threshold: leaf },
                            },
                        ),
                        _ => unreachable!(),
                    };
                    let r = hybrid(outer, inner)?;
                    let residual = system.scaled_residual(&r.solution)?;
                    out.absorb(&r, nested_max_diff(&r.solution, &oracle), residual);
                }
                SolverChoice::Richardson => {
                    return Err(Error::Invalid("richardson is not available for recurrent networks".into()))
                }
            }
            Ok(())
        };
        one().map_err(|e| match e {
            Error::Invalid(_) => e,
            other => other.in_sample(i),
        })?;
    }
    Ok(out)
}
