use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "shype", version, about = "Analyse and simulate stochastic HYPE models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that a model is well defined
    Validate {
        /// Model file
        model: PathBuf,
    },
    /// Build the labelled transition system of a model
    Lts {
        /// Model file
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[command(flatten)]
        out: Output,
    },
    /// Map a model to a transition-driven stochastic hybrid automaton
    Tdsha {
        /// Model file
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Sos)]
        method: Method,
        /// Keep modes unreachable from the initial mode (compositional method)
        #[arg(long)]
        no_prune: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[command(flatten)]
        out: Output,
    },
    /// Simulate trajectories and write CSV traces or a summary
    Simulate {
        /// Model file
        model: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        /// Number of replications
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Write per-time means and standard deviations instead of traces
        #[arg(long)]
        summary: bool,
        /// Spacing of the summary grid
        #[arg(long, default_value_t = 1.0)]
        grid: f64,
        /// Output file; with several replications and no summary, one file per replication is written next to it
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check stochastic (or system) bisimilarity of two models
    Bisim {
        /// First model file
        left: PathBuf,
        /// Second model file
        right: PathBuf,
        #[arg(long, value_enum, default_value_t = Equiv::Eq)]
        equiv: Equiv,
        #[arg(long, value_enum, default_value_t = BisimKind::Stochastic)]
        kind: BisimKind,
        #[command(flatten)]
        out: Output,
    },
    /// Check that instantaneous events cannot fire forever at one instant
    Wellbehaved {
        /// Model file
        model: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Mean terminal cost for each value of a parameter
    Sweep {
        /// Model file
        model: PathBuf,
        /// Parameter to vary
        #[arg(long)]
        param: String,
        /// Comma-separated parameter values
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<f64>,
        /// Cost expression evaluated on the terminal state
        #[arg(long)]
        cost: String,
        #[command(flatten)]
        sim: SimArgs,
        /// Replications per value
        #[arg(long, default_value_t = 500)]
        reps: usize,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file [default: standard output]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Master seed of all random streams
    #[arg(long)]
    pub seed: u64,
    /// Simulated time horizon
    #[arg(long, default_value_t = 100.0)]
    pub t_end: f64,
    /// Integration step
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Maximal number of instantaneous jumps at one instant
    #[arg(long, default_value_t = 1000)]
    pub chain_cap: usize,
    /// Record a sample every this many steps
    #[arg(long, default_value_t = 10)]
    pub stride: usize,
    /// End each trajectory right after this event
    #[arg(long)]
    pub stop_event: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Dot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Sos,
    Compositional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Equiv {
    /// Equal operational states
    Eq,
    /// Equal summed influences per variable and influence type
    Doteq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BisimKind {
    Stochastic,
    System,
}
