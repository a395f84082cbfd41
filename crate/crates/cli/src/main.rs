//! `bdr`: estimate diagnostics, reduce, select dimensions, run baselines,
//! CMI estimators, reduced-posterior sampling and the desk-scale experiments.

mod commands;
mod config;
mod experiment;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "bdr", version, about = "Joint parameter and data dimension reduction for Bayesian inverse problems")]
pub struct Cli {
    /// Base seed; every random stream derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (falls back to BDR_THREADS, then all cores).
    #[arg(long, global = true, env = "BDR_THREADS")]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "bdr-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Monte Carlo estimate of the diagnostic matrices h_x and h_y.
    EstimateDiagnostics {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Overrides run.n.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Informed/informative bases and scores from a diagnostics directory.
    Reduce {
        #[arg(long)]
        diag: PathBuf,
        #[arg(long, default_value = "rotation")]
        kind: KindArg,
    },
    /// Cheapest (r, s) under the error budget, with the Pareto front.
    SelectDims {
        /// Directory written by `reduce`.
        #[arg(long)]
        reduction: PathBuf,
        #[arg(long, default_value = "linear")]
        cost: CostArg,
        #[arg(long, default_value_t = 1.0)]
        ax: f64,
        #[arg(long, default_value_t = 1.0)]
        ay: f64,
        #[arg(long)]
        eps: f64,
    },
    /// PCA or CCA subspaces from joint prior samples.
    Baseline {
        #[arg(long)]
        method: MethodArg,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        r: usize,
    },
    /// Conditional mutual information estimates over a list of dimensions.
    Cmi {
        #[arg(long)]
        which: WhichArg,
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Directory written by `reduce`; fitted in-process when absent.
        #[arg(long)]
        reduction: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        l: Option<usize>,
    },
    /// Approximate posterior samples from the reduced model.
    Sample {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        reduction: PathBuf,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        s: usize,
        /// Observed data, one value per row or a single row.
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// One of the report drivers.
    Experiment {
        name: ExperimentName,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Checks a config file and prints its normalized form.
    Validate { path: PathBuf },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KindArg {
    Rotation,
    Permutation,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CostArg {
    Linear,
    Quadratic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Pca,
    Cca,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum WhichArg {
    Param,
    Data,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ExperimentName {
    GapMap,
    EigDecay,
    CmiCurves,
    GoalOriented,
    McmcStudy,
}

/// Process outcome mapped onto the documented exit codes.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
    Partial(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Partial(_) => 4,
        }
    }
}

impl From<bdr_core::Error> for Failure {
    fn from(e: bdr_core::Error) -> Self {
        use bdr_core::Error as E;
        match e {
            E::InvalidArgument(_)
            | E::DimensionOutOfRange { .. }
            | E::NegativeInput { .. }
            | E::ShapeMismatch { .. }
            | E::UnsupportedCapability(_)
            | E::Io(_)
            | E::Format(_) => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("i/o error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("config error: {m}"),
                Failure::Numerical(m) => eprintln!("numerical failure: {m}"),
                Failure::Partial(m) => eprintln!("partial results: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
