use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::power::MuScaling;
use crate::sample::MissingPolicy;
use crate::score_test::FhatSide;

#[derive(Debug, Parser)]
#[command(
    name = "phtest",
    version,
    about = "Score tests of the proportional hazards assumption"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test proportional hazards for each covariate, a global set, or given sets.
    Test(TestArgs),
    /// Draw a sample from a model spec, or summarize the test over replicates.
    Simulate(SimulateArgs),
    /// Analytic and Monte Carlo power against a local alternative.
    Power(PowerArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Missing {
    Drop,
    Fail,
}

impl From<Missing> for MissingPolicy {
    fn from(m: Missing) -> Self {
        match m {
            Missing::Drop => MissingPolicy::DropIncomplete,
            Missing::Fail => MissingPolicy::FailOnIncomplete,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Side {
    Left,
    Right,
}

impl From<Side> for FhatSide {
    fn from(s: Side) -> Self {
        match s {
            Side::Left => FhatSide::Left,
            Side::Right => FhatSide::Right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scaling {
    Printed,
    Standardized,
}

impl From<Scaling> for MuScaling {
    fn from(s: Scaling) -> Self {
        match s {
            Scaling::Printed => MuScaling::Printed,
            Scaling::Standardized => MuScaling::Standardized,
        }
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Side of the jump at which the baseline cdf estimate is read.
    #[arg(long, value_enum, default_value_t = Side::Right)]
    pub fhat_side: Side,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "time")]
    pub time_col: String,
    #[arg(long, default_value = "status")]
    pub status_col: String,
    /// Covariates of the Cox model; defaults to every other column.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Covariates tested jointly; repeat for several sets. Without it every
    /// covariate is tested alone and then all together.
    #[arg(long = "test-set", value_name = "A,B,..")]
    pub test_sets: Vec<String>,
    #[arg(long, value_enum, default_value_t = Missing::Drop)]
    pub missing: Missing,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model spec in TOML.
    #[arg(long)]
    pub spec: PathBuf,
    /// Sample size.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Run the test on this many samples and summarize instead of writing one sample.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// Model spec in TOML, with one tested index and a local alternative.
    #[arg(long)]
    pub spec: PathBuf,
    /// Sample size of each Monte Carlo replicate.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub replicates: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Size of the null sample used for the plug-in noncentrality.
    #[arg(long, default_value_t = 100_000)]
    pub n_plugin: usize,
    #[arg(long, value_enum, default_value_t = Scaling::Printed)]
    pub mu_scaling: Scaling,
    #[command(flatten)]
    pub common: Common,
}
