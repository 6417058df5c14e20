use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "robust-priors", version, about = "Penalized regression toward heuristic and LSS priors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Paired-comparison sweep: median split, pairwise encoding, train/test iterations.
    Decide(TableArgs),
    /// Binary classification sweep on a ternary median split.
    Classify(TableArgs),
    /// Simulated fMRI trial estimates: LSA, LSS and LSS-prior over a penalty grid.
    Fmri(FmriArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON config; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Comma-separated penalties starting at 0, or a preset: default, decision, fmri.
    #[arg(long)]
    pub theta_grid: Option<String>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Input CSV with a header row.
    pub dataset: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub train_size: Option<usize>,
    /// Criterion (decide) or label (classify) column.
    #[arg(long, alias = "criterion", alias = "label")]
    pub target: Option<String>,
    /// Label value coded +1 (classify only).
    #[arg(long)]
    pub positive_label: Option<String>,
}

#[derive(Debug, Args)]
pub struct FmriArgs {
    #[command(flatten)]
    pub common: Common,
    /// ISI levels in seconds, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub isi: Option<Vec<f64>>,
    /// Trial-variance (sigma2_psi) levels, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub snr: Option<Vec<f64>>,
    /// Also write per-iteration scores.
    #[arg(long)]
    pub raw: bool,
    /// Write design and truth of the first cell's first iteration as flat binaries.
    #[arg(long)]
    pub dump_scene: bool,
}
