use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use trilayer::direct::appendix_scaling_check;
use trilayer::experiment::{
    generate_data, generate_network, run_experiment_with, stale_diagonal_experiment, write_network,
    ExperimentSpec, Network, NetworkKind, Report, SolverChoice, CSV_HEADER,
};
use trilayer::system::{build_backward_system, build_forward_system, Mode};
use trilayer::{ActivationKind, Exec};

#[derive(Parser)]
#[command(name = "trilayer", version, about = "Propagation as block bi-diagonal solves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated network file.
    Gen {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment and write its report. Exits 1 if verification fails.
    Solve {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Check one experiment against the reference pass. Exits 0 or 1.
    Verify {
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Sweep a grid of experiments and emit one CSV row each.
    Bench(BenchArgs),
    /// Compare the odd-even reordering of a feed-forward system with its
    /// dense counterpart.
    AppendixCheck {
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Forward solves with diagonals recorded before a weight perturbation.
    Stale {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,1e-3,1e-2,1e-1")]
        sigmas: Vec<f64>,
        /// Seeds `seed .. seed + count` per perturbation scale.
        #[arg(long, default_value_t = 20)]
        count: u64,
    },
}

#[derive(Args, Clone)]
struct SpecArgs {
    #[arg(long, default_value = "fnn")]
    kind: NetworkKind,
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 4)]
    width: usize,
    /// Explicit `n_0,…,n_l`; overrides --layers and --width.
    #[arg(long, value_delimiter = ',')]
    widths: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1)]
    tau: usize,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    /// identity, relu, leaky:SLOPE, tanh or sigmoid.
    #[arg(long, default_value = "tanh")]
    activation: ActivationKind,
    #[arg(long, default_value = "backward")]
    mode: Mode,
    /// substitution, cyclic, jacobi, richardson, bicgstab or hybrid:OUTER+INNER.
    #[arg(long, default_value = "cyclic")]
    solver: SolverChoice,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    leaf_threshold: Option<usize>,
    /// Operation count charged per activation evaluation.
    #[arg(long)]
    gamma: Option<u64>,
    #[arg(long, value_enum, default_value_t = ExecArg::Parallel)]
    exec: ExecArg,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "fnn")]
    kind: NetworkKind,
    #[arg(long, value_delimiter = ',', default_value = "3,7,15")]
    layers: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2,8")]
    width: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    tau: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    #[arg(long, value_delimiter = ',', default_value = "relu,tanh,sigmoid")]
    activation: Vec<ActivationKind>,
    #[arg(long, value_delimiter = ',', default_value = "backward")]
    mode: Vec<Mode>,
    #[arg(long, value_delimiter = ',', default_value = "substitution,cyclic,jacobi,bicgstab")]
    solver: Vec<SolverChoice>,
    /// First seed; each grid point runs `seeds` consecutive seeds.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    leaf_threshold: Option<usize>,
    /// Run experiments concurrently. Each one is sequential inside, so the
    /// rows are identical to a serial sweep apart from wall time.
    #[arg(long, value_enum, default_value_t = ExecArg::Parallel)]
    exec: ExecArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExecArg {
    Sequential,
    Parallel,
}

impl From<ExecArg> for Exec {
    fn from(e: ExecArg) -> Self {
        match e {
            ExecArg::Sequential => Exec::Sequential,
            ExecArg::Parallel => Exec::Parallel,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl SpecArgs {
    fn spec(&self) -> ExperimentSpec {
        let mut s = ExperimentSpec::fnn(self.layers, self.width, self.activation, self.seed);
        if let Some(w) = &self.widths {
            s.widths = w.clone();
        }
        s.kind = self.kind;
        s.tau = self.tau;
        s.batch = self.batch;
        s.mode = self.mode;
        s.solver = self.solver;
        s.tol = self.tol.unwrap_or(s.tol);
        s.max_iters = self.max_iters;
        s.omega = self.omega.unwrap_or(s.omega);
        s.leaf_threshold = self.leaf_threshold.unwrap_or(s.leaf_threshold);
        s.gamma = self.gamma;
        s
    }
}

impl BenchArgs {
    fn specs(&self) -> Vec<ExperimentSpec> {
        let mut out = Vec::new();
        for &l in &self.layers {
            for &n in &self.width {
                for &tau in &self.tau {
                    for &act in &self.activation {
                        for &mode in &self.mode {
                            for &solver in &self.solver {
                                for seed in self.seed..self.seed + self.seeds {
                                    let mut s = ExperimentSpec::fnn(l, n, act, seed)
                                        .with_mode(mode)
                                        .with_solver(solver)
                                        .with_batch(self.batch);
                                    s.kind = self.kind;
                                    s.tau = tau;
                                    s.tol = self.tol.unwrap_or(s.tol);
                                    s.max_iters = self.max_iters;
                                    s.leaf_threshold = self.leaf_threshold.unwrap_or(s.leaf_threshold);
                                    out.push(s);
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn summary(r: &Report) -> String {
    let status = if r.passed() { "ok" } else { "FAILED" };
    let mut line = format!(
        "{status}: {} {} {} l={} seed={} err={:.3e} residual={:.3e}",
        r.spec.kind,
        r.spec.mode,
        r.spec.solver,
        r.spec.layers(),
        r.spec.seed,
        r.oracle_max_abs_err,
        r.residual_norm
    );
    if let Some(e) = &r.error {
        line.push_str(&format!(" error: {e}"));
    }
    line
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen { spec, out } => {
            let spec = spec.spec();
            spec.validate()?;
            write_network(&out, &generate_network(&spec)?)?;
        }
        Command::Solve { spec, output } => {
            let report = run_experiment_with(&spec.spec(), spec.exec.into())?;
            let text = match output.format {
                Format::Json => report.to_json() + "\n",
                Format::Csv => format!("{CSV_HEADER}\n{}\n", report.csv_row()),
            };
            emit(output.out.as_ref(), &text)?;
            if !report.passed() {
                eprintln!("{}", summary(&report));
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Verify { spec } => {
            let report = run_experiment_with(&spec.spec(), spec.exec.into())?;
            println!("{}", summary(&report));
            if !report.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Bench(args) => {
            let specs = args.specs();
            for s in &specs {
                s.validate()?;
            }
            let reports = Exec::from(args.exec).map(&specs, |_, s| run_experiment_with(s, Exec::Sequential));
            let mut text = format!("{CSV_HEADER}\n");
            for r in reports {
                text.push_str(&r?.csv_row());
                text.push('\n');
            }
            emit(args.out.as_ref(), &text)?;
        }
        Command::AppendixCheck { spec } => {
            let spec = spec.spec();
            spec.validate()?;
            let Network::Fnn(net) = generate_network(&spec)? else {
                bail!("appendix-check takes feed-forward networks");
            };
            let d = &generate_data(&spec)[0];
            let input = &d.inputs[0];
            let trace = net.forward(input)?;
            let system = match spec.mode {
                Mode::Forward => build_forward_system(&net, input, &trace)?,
                Mode::Backward => {
                    let eps = trilayer::experiment::output_error(trace.output(), &d.targets[0])?;
                    build_backward_system(&net, &trace, &eps)?
                }
            };
            let check = appendix_scaling_check(&system)?;
            println!("{}", serde_json::to_string_pretty(&check)?);
            if !check.passed {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Stale { spec, sigmas, count } => {
            let spec = spec.spec();
            spec.validate()?;
            let seeds: Vec<u64> = (spec.seed..spec.seed + count).collect();
            let points = stale_diagonal_experiment(&spec, &sigmas, &seeds)?;
            println!("{}", serde_json::to_string_pretty(&points)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
