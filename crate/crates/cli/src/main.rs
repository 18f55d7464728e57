//! `optopnet`: generate topology datasets, train and query the per-robot
//! ensembles, validate topologies and dump training curves.
//!
//! Exit codes: 0 success, 1 failed validation or runtime failure, 2 usage error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Fractions, Range};

/// Bad flags, bad config values or missing inputs; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const SEED_ENV: &str = "OPTOPNET_SEED";

#[derive(Parser, Debug)]
#[command(name = "optopnet", version, about = "Optimal cycle-plus-branch topologies for ad-hoc robot networks")]
pub struct Cli {
    /// key=value file supplying defaults for any flag
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for generation, training and prediction
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a labelled dataset of random configurations
    Gen(GenArgs),
    /// Search, stack and evaluate one ensemble per robot
    Train(TrainArgs),
    /// Predict cluster labels for coordinate rows
    Predict(PredictArgs),
    /// Check a topology listing against a configuration
    Validate(ValidateArgs),
    /// Emit per-epoch and per-round training curves as CSV
    Curves(CurvesArgs),
}

#[derive(Args, Debug, Default)]
pub struct NetArgs {
    #[arg(long)]
    pub zone: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Robots per configuration
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub records: Option<usize>,
    #[command(flatten)]
    pub net: NetArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_resamples: Option<usize>,
    /// Output CSV; the metadata sidecar is written next to it
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write one topology listing per record into this directory
    #[arg(long)]
    pub emit_topology: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// train,val,test fractions
    #[arg(long)]
    pub split: Option<Fractions>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Random-search samples per learner
    #[arg(long)]
    pub search_iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bundle directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub knn_k: Option<Range<usize>>,
    #[arg(long)]
    pub knn_p: Option<Range<f64>>,
    #[arg(long)]
    pub forest_trees: Option<Range<usize>>,
    #[arg(long)]
    pub forest_depth: Option<Range<usize>>,
    #[arg(long)]
    pub mlp_layers: Option<Range<usize>>,
    #[arg(long)]
    pub mlp_neurons: Option<Range<usize>>,
    #[arg(long)]
    pub mlp_eta0: Option<Range<f64>>,
    #[arg(long)]
    pub blender_depth: Option<Range<usize>>,
    #[arg(long)]
    pub blender_lr: Option<Range<f64>>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Bundle directory written by `train`
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// One configuration as comma-separated x0,y0,x1,y1,...
    #[arg(long, allow_hyphen_values = true)]
    pub coords: Option<String>,
    /// File with one configuration per line (dataset CSV rows are accepted)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Print the reconstructed cycle and branches instead of labels
    #[arg(long)]
    pub as_topology: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Dataset CSV holding the configuration
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Row of `--data` to check
    #[arg(long)]
    pub record: Option<usize>,
    /// Configuration given inline instead of through `--data`
    #[arg(long, allow_hyphen_values = true)]
    pub coords: Option<String>,
    #[command(flatten)]
    pub net: NetArgs,
    /// Topology listing to check
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// Check every record of `--data` against the listings in this directory
    #[arg(long)]
    pub topology_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CurvesArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
