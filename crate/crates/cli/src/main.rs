//! `csikit` command-line front end.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use config::{impl_merge, load_section, parse_section, Merge};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "csikit",
    version,
    about = "Dataset similarity, effective rank and sampling tools"
)]
struct Cli {
    /// JSON file with defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Summarize a shard's node features into mean and covariance.
    Summarize(SummarizeArgs),
    /// Distance between two summaries.
    Distance(DistanceArgs),
    /// Rank upstream summaries by distance to one or more downstream summaries.
    Rank(RankArgs),
    /// Node- and graph-level effective rank study.
    Erank(ErankArgs),
    /// Subsample graphs from a shard.
    Sample(SampleArgs),
    /// Pretraining budget arithmetic.
    Budget(BudgetArgs),
    /// Write a synthetic Gaussian-mixture shard.
    GenSynthetic(GenSyntheticArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodesArg {
    All,
    OnePerGraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyArg {
    Balanced,
    Uniform,
}

#[derive(Debug, Args, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct SummarizeArgs {
    /// Input shard.
    #[arg(value_name = "SHARD")]
    pub shard: Option<PathBuf>,
    /// Node rows to include.
    #[arg(long, value_enum)]
    pub nodes: Option<NodesArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Summary name; defaults to the shard's dataset name.
    #[arg(long)]
    pub name: Option<String>,
    /// Divide by n instead of n - 1.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub population: Option<bool>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}
impl_merge!(SummarizeArgs {
    shard,
    nodes,
    seed,
    name,
    population,
    output
});

#[derive(Debug, Args, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct DistanceArgs {
    #[arg(value_name = "X")]
    pub x: Option<PathBuf>,
    #[arg(value_name = "Y")]
    pub y: Option<PathBuf>,
    /// Added to both covariance diagonals.
    #[arg(long)]
    pub ridge: Option<f64>,
    /// JSON output with the value and its terms.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}
impl_merge!(DistanceArgs {
    x,
    y,
    ridge,
    output
});

#[derive(Debug, Args, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct RankArgs {
    /// Downstream summary; repeat for a matrix.
    #[arg(long, value_name = "SUMMARY")]
    pub downstream: Vec<PathBuf>,
    /// Upstream summaries.
    #[arg(long, num_args = 1.., value_name = "SUMMARY")]
    pub upstream: Vec<PathBuf>,
    #[arg(long)]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub ridge: Option<f64>,
    /// JSON report.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Distance matrix CSV; defaults to `<output>.csv` with several downstreams.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
}
impl_merge!(RankArgs {
    downstream,
    upstream,
    epochs,
    samples,
    ridge,
    output,
    matrix
});

#[derive(Debug, Args, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct ErankArgs {
    #[arg(value_name = "SHARD")]
    pub shard: Option<PathBuf>,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub ks: Vec<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-repeat CSV.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Mean/std CSV; defaults to `<output stem>.summary.csv`.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}
impl_merge!(ErankArgs {
    shard,
    ks,
    repeats,
    seed,
    output,
    summary
});

#[derive(Debug, Args, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct SampleArgs {
    #[arg(value_name = "SHARD")]
    pub shard: Option<PathBuf>,
    #[arg(long)]
    pub total: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Per-class coverage CSV.
    #[arg(long)]
    pub coverage: Option<PathBuf>,
}
impl_merge!(SampleArgs {
    shard,
    total,
    seed,
    strategy,
    output,
    coverage
});

#[derive(Debug, Args, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct BudgetArgs {
    #[arg(long)]
    pub epochs: Option<u64>,
    /// Unique samples per epoch.
    #[arg(long)]
    pub samples: Option<u64>,
    /// Total budget; with --epochs, solves for samples.
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub reference_epochs: Option<u64>,
    #[arg(long)]
    pub reference_samples: Option<u64>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}
impl_merge!(BudgetArgs {
    epochs,
    samples,
    budget,
    reference_epochs,
    reference_samples,
    output
});

#[derive(Debug, Args, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct GenSyntheticArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub graphs: Option<usize>,
    /// Nodes per graph.
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    /// Zipf exponent for class sizes; even sizes when absent.
    #[arg(long)]
    pub zipf: Option<f64>,
    #[arg(long)]
    pub cluster_scale: Option<f64>,
    #[arg(long)]
    pub graph_scale: Option<f64>,
    #[arg(long)]
    pub node_scale: Option<f64>,
    #[arg(long)]
    pub pooled_subspace: Option<usize>,
    #[arg(long)]
    pub shift: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset name; defaults to the output file stem.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}
impl_merge!(GenSyntheticArgs {
    dim,
    graphs,
    nodes,
    classes,
    zipf,
    cluster_scale,
    graph_scale,
    node_scale,
    pooled_subspace,
    shift,
    seed,
    name,
    output,
});

fn with_config<T>(args: T, config: &Option<PathBuf>, command: &str) -> Result<T, CliError>
where
    T: Merge + serde::de::DeserializeOwned,
{
    match config {
        Some(path) => {
            let fallback: T = parse_section(load_section(path, command)?, path)?;
            Ok(args.merge(fallback))
        }
        None => Ok(args),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = &cli.config;
    match cli.command {
        Command::Summarize(a) => commands::summarize(with_config(a, cfg, "summarize")?),
        Command::Distance(a) => commands::distance(with_config(a, cfg, "distance")?),
        Command::Rank(a) => commands::rank(with_config(a, cfg, "rank")?),
        Command::Erank(a) => commands::erank(with_config(a, cfg, "erank")?),
        Command::Sample(a) => commands::sample(with_config(a, cfg, "sample")?),
        Command::Budget(a) => commands::budget(with_config(a, cfg, "budget")?),
        Command::GenSynthetic(a) => commands::gen_synthetic(with_config(a, cfg, "gen-synthetic")?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(64)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("csikit: {e}");
            e.exit_code()
        }
    }
}
