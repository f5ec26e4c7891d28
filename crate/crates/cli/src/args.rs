use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use satindex_core::basin::DEFAULT_RAY_TOL;
use satindex_core::dynamics::{DEFAULT_ABS_TOL, DEFAULT_REL_TOL, DEFAULT_T_MAX};

#[derive(Debug, Parser)]
#[command(
    name = "satindex",
    version,
    about = "Equilibria, indices and basin geometry of saturated feedback systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check anti-stability of A, controllability and a Hurwitz closed loop.
    Validate(SystemArgs),
    /// Enumerate equilibria with indices, stability and the parity law.
    Equilibria(SystemArgs),
    /// Degree of the closed-loop field over a ball and the index-sum identity.
    Degree(DegreeArgs),
    /// Certified fate of one initial state.
    Fate(FateArgs),
    /// Basin boundary brackets along one ray or a cloud of rays.
    Scan(ScanArgs),
    /// Search for midpoint violations of basin convexity.
    Convexity(ConvexityArgs),
    /// Run the built-in counterexample end to end and write a bundle.
    ReproducePaper(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct SystemArgs {
    /// System description in JSON (keys n, m, A, B, K, M).
    #[arg(long)]
    pub system: PathBuf,
    /// Write JSON here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IntegrationArgs {
    #[arg(long, default_value_t = DEFAULT_T_MAX)]
    pub t_max: f64,
    #[arg(long, default_value_t = DEFAULT_REL_TOL)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = DEFAULT_ABS_TOL)]
    pub abs_tol: f64,
}

#[derive(Debug, Args)]
pub struct DegreeArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Ball radius; defaults to a radius enclosing every equilibrium and the safe radius.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FateArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Initial state as comma-separated numbers.
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
    #[command(flatten)]
    pub integration: IntegrationArgs,
    /// Also write the trajectory up to the decision time as CSV.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Scan this single direction instead of a cloud of rays.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    #[arg(long, default_value_t = 500)]
    pub rays: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_RAY_TOL)]
    pub tol: f64,
    #[command(flatten)]
    pub integration: IntegrationArgs,
    /// Write the point cloud as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvexityArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Number of random pairs drawn.
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub integration: IntegrationArgs,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Bundle directory, created if missing.
    #[arg(long, default_value = "reproduction")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub rays: usize,
    #[arg(long, default_value_t = DEFAULT_RAY_TOL)]
    pub tol: f64,
    #[command(flatten)]
    pub integration: IntegrationArgs,
}
