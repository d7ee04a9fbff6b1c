//! `innermatch`: mesh and fixture generation, registration, shooting,
//! geodesic triangles, Karcher means and gradient checks.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", describe(.0))]
    Core(#[from] innermatch::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("non-convergence: {0}")]
    NotConverged(String),
    #[error("gradient check failed: {0}")]
    GradcheckFailed(String),
}

/// One-line diagnostic naming the failure class.
fn describe(e: &innermatch::Error) -> String {
    use innermatch::Error as E;
    let class = match e {
        E::MeshMismatch(_) | E::DimensionMismatch { .. } => "mesh mismatch",
        E::SolverNotConverged { .. } => "solver failure",
        E::StepFailure { .. } => "step failure",
        E::DegenerateElement { .. } => "degenerate surface",
        E::ZeroVelocity => "zero velocity",
        E::Io { .. } => return e.to_string(),
        E::Parse { .. } => "parse error",
        _ => "invalid input",
    };
    format!("{class}: {e}")
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 1,
            CliError::Core(innermatch::Error::Io { .. }) | CliError::Io { .. } => 3,
            CliError::Core(_) | CliError::Config(_) => 2,
            CliError::NotConverged(_) | CliError::GradcheckFailed(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixtureKind {
    /// Straight cylinder from `[cylinder]`.
    Cylinder,
    /// Bent, rippled cylinder from `[bent_cylinder]`.
    BentCylinder,
    /// Asymmetric torus from `[torus]`.
    Torus,
    /// The three tori of the triangle experiment.
    TorusTriangle,
    /// The vase family from `[[vases]]`.
    Vases,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the configured mesh with its default embedding.
    Meshgen,
    /// Write a parametric test shape.
    Fixture {
        #[arg(value_enum)]
        kind: FixtureKind,
        #[arg(long)]
        bend_deg: Option<f64>,
        #[arg(long)]
        ripples: Option<u32>,
        #[arg(long)]
        ripple_amplitude: Option<f64>,
        #[arg(long)]
        angle_deg: Option<f64>,
    },
    /// Register a template surface to a target.
    Register {
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        target: PathBuf,
    },
    /// Shoot a geodesic from a surface with an initial velocity.
    Shoot {
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        velocity: PathBuf,
    },
    /// Angles and side lengths of a geodesic triangle (the torus fixture if no files are given).
    Triangle {
        #[arg(long, requires_all = ["b", "c"])]
        a: Option<PathBuf>,
        #[arg(long)]
        b: Option<PathBuf>,
        #[arg(long)]
        c: Option<PathBuf>,
    },
    /// Karcher mean of shapes (the vase fixtures if none are given).
    Mean {
        /// Initial mean; the configured straight cylinder by default.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        shapes: Vec<PathBuf>,
        #[arg(long)]
        mean_tol: Option<f64>,
        #[arg(long)]
        max_outer: Option<usize>,
    },
    /// Compare the adjoint gradient with central finite differences.
    Gradcheck {
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        directions: Option<usize>,
    },
}

#[derive(Debug, Parser)]
#[command(name = "innermatch", version, about = "Surface registration by geodesic shooting under an H¹ inner metric")]
pub struct Cli {
    #[command(flatten)]
    pub overrides: config::Overrides,
    #[command(subcommand)]
    pub command: Command,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = cli
        .overrides
        .resolve()
        .and_then(|cfg| commands::run(&cli.command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
