use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use scband::{BasisFamily, ScoreDistribution};

use crate::ingest::{parse_domain, IngestOptions};

#[derive(Debug, Parser)]
#[command(name = "scband", version, about = "Simultaneous confidence bands for the mean of functional data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the mean function and build a simultaneous confidence band.
    Band(BandArgs),
    /// Print the BIC table for the candidate basis sizes.
    Select(SelectArgs),
    /// Run a Monte Carlo coverage study on the simulation design.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Bspline,
    Fourier,
    Legendre,
}

pub fn family(kind: BasisKind, order: usize) -> BasisFamily {
    match kind {
        BasisKind::Bspline => BasisFamily::BSpline { order },
        BasisKind::Fourier => BasisFamily::Fourier,
        BasisKind::Legendre => BasisFamily::Legendre,
    }
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{}`: {e}", t.trim()));
    Ok((num(lo)?, num(hi)?))
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Long-format CSV with a header row.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "x")]
    pub x_col: String,
    #[arg(long, default_value = "y")]
    pub y_col: String,
    #[arg(long, default_value = "id")]
    pub id_col: String,
    /// Design domain `lo,hi` on the raw scale [default: observed range].
    #[arg(long, value_parser = parse_domain, allow_hyphen_values = true)]
    pub domain: Option<(f64, f64)>,
}

impl DataArgs {
    pub fn ingest_options(&self) -> IngestOptions {
        IngestOptions {
            x_col: self.x_col.clone(),
            y_col: self.y_col.clone(),
            id_col: self.id_col.clone(),
            domain: self.domain,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BasisArgs {
    #[arg(long, value_enum, default_value_t = BasisKind::Bspline)]
    pub basis: BasisKind,
    /// B-spline order (4 = cubic).
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    /// Candidate sizes `lo,hi` for BIC selection [default: from the sample size].
    #[arg(long, value_parser = parse_range)]
    pub knot_range: Option<(usize, usize)>,
    /// Penalize BIC with the basis dimension instead of the knot count.
    #[arg(long)]
    pub penalize_dimension: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BandArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub basis: BasisArgs,
    /// Fixed size: interior knots for B-splines, dimension for series bases.
    #[arg(long)]
    pub knots: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Multiplier replications.
    #[arg(long, default_value_t = 500)]
    pub boot: usize,
    /// Evaluation grid size.
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write band.svg.
    #[arg(long)]
    pub plot: bool,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
    /// Repeat the run recorded in a manifest or band CSV; other options are ignored.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub basis: BasisArgs,
    /// Also write selection.json here.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Sampling scheme 1 (sparse) to 4 (dense).
    #[arg(long, default_value_t = 1)]
    pub setting: u8,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value = "normal")]
    pub score_dist: ScoreDistribution,
    #[arg(long, default_value = "normal")]
    pub error_dist: ScoreDistribution,
    /// Heteroscedastic measurement error.
    #[arg(long)]
    pub hetero: bool,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_eps: f64,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 500)]
    pub boot: usize,
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
    #[arg(long, value_enum, default_value_t = BasisKind::Bspline)]
    pub basis: BasisKind,
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
    /// Simulation config as JSON; replaces the design flags.
    #[arg(long, conflicts_with = "manifest")]
    pub config: Option<PathBuf>,
    /// Repeat the run recorded in a summary or replication CSV.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}
