//! Command-line definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "twosite",
    version,
    about = "Two-site coagulation with migration: particle simulation, limit equations and plots",
    after_help = "Every run subcommand accepts --config FILE with flat `key = value` lines; keys are \
                  flag names without the leading dashes and explicit flags override them."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stochastic particle simulation (timeseries.csv, spectrum.csv, gel.csv).
    #[command(args_override_self = true)]
    Mc(McArgs),
    /// Truncated deterministic system (ode_summary.csv, ode_spectrum.csv).
    #[command(args_override_self = true)]
    Ode(OdeArgs),
    /// Second-moment equations and the gelation time estimate (moments.csv).
    #[command(args_override_self = true)]
    Moments(MomentsArgs),
    /// One-site closed forms (meanfield.csv, borel.csv, u_grid.csv).
    #[command(args_override_self = true)]
    Meanfield(MeanfieldArgs),
    /// Post-gelation limit model with gel jumps (postgel.csv, jumps.csv).
    #[command(args_override_self = true)]
    Postgel(PostgelArgs),
    /// Particle simulation against the truncated system before gelation (compare.csv).
    #[command(args_override_self = true)]
    Compare(CompareArgs),
    /// Line chart of CSV columns as SVG.
    #[command(args_override_self = true)]
    Plot(PlotArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Mc(_) => "mc",
            Command::Ode(_) => "ode",
            Command::Moments(_) => "moments",
            Command::Meanfield(_) => "meanfield",
            Command::Postgel(_) => "postgel",
            Command::Compare(_) => "compare",
            Command::Plot(_) => "plot",
        }
    }
}

/// Options shared by the run subcommands.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat key = value file with defaults for the other flags.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, short = 'o', default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub common: Common,
    /// Initial monomers at site 0.
    #[arg(long, default_value_t = 1000)]
    pub n0: u64,
    /// Initial monomers at site 1.
    #[arg(long, default_value_t = 0)]
    pub n1: u64,
    /// Migration rate per particle.
    #[arg(long, default_value_t = 0.0)]
    pub kappa: f64,
    /// Final rescaled time.
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of evenly spaced snapshots on (0, t_end]; ignored with --times.
    #[arg(long, default_value_t = 100)]
    pub snapshots: usize,
    /// Explicit comma-separated snapshot times.
    #[arg(long, value_delimiter = ',')]
    pub times: Vec<f64>,
    /// Independent replicas (streams 0..R of the seed).
    #[arg(long, default_value_t = 1)]
    pub replicas: u64,
    /// Gel threshold is this factor times N^(2/3).
    #[arg(long, default_value_t = 2.0)]
    pub threshold_factor: f64,
    /// Hard cap on events [default: 64 N (1 + kappa t_end)].
    #[arg(long)]
    pub event_cap: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct OdeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Initial mass ratio site 1 / site 0 (may be inf).
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub kappa: f64,
    /// Truncation cutoff B.
    #[arg(long, default_value_t = 256)]
    pub cutoff: usize,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    /// Number of evenly spaced output intervals on [0, t_end]; ignored with --times.
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long, value_delimiter = ',')]
    pub times: Vec<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub atol: f64,
    /// Also write the full spectrum at every output time.
    #[arg(long)]
    pub spectrum: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExtrapolationArg {
    Reciprocal,
    TwoPoint,
}

#[derive(Debug, Clone, Args)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub kappa: f64,
    /// Integration stops once max(x, y) reaches this value.
    #[arg(long, default_value_t = 1e8)]
    pub cap: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub rtol: f64,
    #[arg(long, value_enum, default_value_t = ExtrapolationArg::Reciprocal)]
    pub extrapolation: ExtrapolationArg,
}

#[derive(Debug, Clone, Args)]
pub struct MeanfieldArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 3.0)]
    pub t_end: f64,
    /// Number of evenly spaced intervals for the curves.
    #[arg(long, default_value_t = 300)]
    pub points: usize,
    /// Largest mass in borel.csv.
    #[arg(long, default_value_t = 50)]
    pub max_mass: u64,
    /// Times at which the Borel spectrum is tabulated.
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.8,1")]
    pub borel_times: Vec<f64>,
    /// Grid resolution of u(x, t) on [0, 1] x [0, t_end].
    #[arg(long, default_value_t = 20)]
    pub grid: usize,
}

#[derive(Debug, Clone, Args)]
pub struct PostgelArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 512)]
    pub cutoff: usize,
    #[arg(long, default_value_t = 4.0)]
    pub t_end: f64,
    /// Output spacing.
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Seed of the gel-jump clocks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub atol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 100_000)]
    pub n0: u64,
    #[arg(long, default_value_t = 0)]
    pub n1: u64,
    #[arg(long, default_value_t = 0.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 512)]
    pub cutoff: usize,
    /// Comparison times; all must precede the gelation time.
    #[arg(long, value_delimiter = ',')]
    pub times: Vec<f64>,
    /// Comparison times as fractions of the estimated gelation time.
    #[arg(long, value_delimiter = ',', conflicts_with = "times")]
    pub at: Vec<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub atol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// CSV file to read.
    #[arg(long)]
    pub input: PathBuf,
    /// Column for the horizontal axis.
    #[arg(long, default_value = "t")]
    pub x: String,
    /// Comma-separated columns to draw.
    #[arg(long, value_delimiter = ',', required = true)]
    pub y: Vec<String>,
    /// Split each column into one series per value of this column [default: site, if present].
    #[arg(long)]
    pub group: Option<String>,
    /// Logarithmic vertical axis.
    #[arg(long)]
    pub log_y: bool,
    #[arg(long)]
    pub title: Option<String>,
    /// SVG file to write.
    #[arg(long, default_value = "plot.svg")]
    pub output: PathBuf,
}
