//! Reproducible experiments on top of the `insulab` library.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{run, Check, Outcome};
pub use config::{parse_grid, RunConfig};

pub const EXIT_SOLVER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CHECKS: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Solver(#[from] insulab::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Solver(insulab::Error::InvalidDomain(_)) => EXIT_USAGE,
            _ => EXIT_SOLVER,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "insulab", version, about = "Concentration breaking thresholds for optimal thermal insulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct DomainArgs {
    /// Domain as kind:params, e.g. disk:1, annulus:1,2, square:1, rect:2,1, ellipse:2,1, polygon:x0,y0,...
    #[arg(long)]
    pub domain: String,
    /// Target edge length of the initial mesh.
    #[arg(long, default_value_t = 0.25)]
    pub h: f64,
    /// Uniform refinements applied to the initial mesh.
    #[arg(long, default_value_t = 3)]
    pub refine: usize,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Problem {
    /// Minimal temperature decay.
    Decay,
    /// Maximal heat content.
    Heat,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Heat-content threshold m1 with the torsion-type reference solution.
    ThresholdM1 {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Temperature-decay threshold m0 by bisection on λ_m = κ1.
    ThresholdM0 {
        #[command(flatten)]
        domain: DomainArgs,
        /// Relative width of the final bisection bracket.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Repeat the computation on the once-refined mesh.
        #[arg(long)]
        pair: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Minimizers over a grid of insulation amounts.
    Sweep {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, value_enum, default_value_t = Problem::Decay)]
        problem: Problem,
        /// Grid a:b:n of n equally spaced values.
        #[arg(long, conflicts_with = "m")]
        m_grid: Option<String>,
        /// Single insulation amount.
        #[arg(long)]
        m: Option<f64>,
        /// Bisection tolerance for the threshold marked on the plot.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Closed-form ball thresholds and identity checks.
    Oracle {
        /// Space dimension.
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Single heat-content minimizer with its optimality certificate.
    Heat {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long)]
        m: f64,
        /// Random competitors tried by the certificate.
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Single temperature-decay minimizer.
    Decay {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long)]
        m: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Mesh file and drawing.
    Mesh {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        common: Common,
    },
}
