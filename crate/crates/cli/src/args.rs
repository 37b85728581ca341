use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ght_core::Solver;

#[derive(Debug, Parser)]
#[command(
    name = "ght",
    version,
    about = "Sparse coding of image patches under a global nonzero budget"
)]
pub struct Cli {
    /// Directory for every output file.
    #[arg(long, global = true, env = "GHT_OUT_DIR", default_value = "ght-out")]
    pub out_dir: PathBuf,
    /// Worker threads for the parallel kernels (default: all cores).
    #[arg(long, global = true, env = "GHT_THREADS")]
    pub threads: Option<usize>,
    /// JSON file with parameter defaults; explicit flags win over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sparse-code an image and write the reconstruction, heatmap and RMSE report.
    Represent(RepresentArgs),
    /// Add Gaussian noise, sparse-code the noisy image and report PSNR.
    Denoise(DenoiseArgs),
    /// Support recovery versus sparsity on synthetic Gaussian instances.
    SynthBench(SynthArgs),
    /// Wall time versus number of patches.
    ScaleBench(ScaleArgs),
    /// Write a dictionary as CSV.
    Dict(DictArgs),
    /// Write only the atoms-per-patch heatmap of an image's codes.
    Heatmap(RepresentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Pgm,
    Png,
}

/// Solver tuning shared by the image and benchmark commands.
#[derive(Debug, Clone, Args)]
pub struct TuningArgs {
    /// Penalty parameter of both global solvers.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Stop when successive RMSE values differ by less than this.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Iteration cap for AIHT and CoSaMP.
    #[arg(long)]
    pub baseline_max_iters: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct DictionaryArgs {
    /// Side of the square patches.
    #[arg(long)]
    pub patch_side: Option<usize>,
    /// DCT atoms per dimension (the dictionary has this squared).
    #[arg(long)]
    pub atoms_per_dim: Option<usize>,
    /// Use this CSV dictionary instead of the overcomplete DCT.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RepresentArgs {
    /// Input image (PGM or PNG).
    pub image: PathBuf,
    #[command(flatten)]
    pub dict: DictionaryArgs,
    /// Nonzeros per patch: global solvers get round(b·P), patch-wise ones round(b).
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long)]
    pub solver: Option<Solver>,
    /// Center-crop to a multiple of the patch side instead of failing.
    #[arg(long)]
    pub crop: bool,
    #[arg(long, value_enum)]
    pub format: Option<ImageFormat>,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DenoiseArgs {
    pub image: PathBuf,
    #[command(flatten)]
    pub dict: DictionaryArgs,
    /// Noise standard deviations, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sigma: Vec<f64>,
    #[arg(long)]
    pub budget: Option<f64>,
    /// Solvers to compare, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub solver: Vec<Solver>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub crop: bool,
    #[arg(long, value_enum)]
    pub format: Option<ImageFormat>,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub s_min: Option<usize>,
    #[arg(long)]
    pub s_max: Option<usize>,
    /// Independent dictionaries per sparsity level.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub solver: Vec<Solver>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ScaleArgs {
    /// Patch counts, comma separated (default 2^10 … 2^16).
    #[arg(long, value_delimiter = ',')]
    pub p_list: Vec<usize>,
    /// Default to 2^10 … 2^20 when no list is given.
    #[arg(long)]
    pub full_range: bool,
    /// Per-patch budget.
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub solver: Vec<Solver>,
    /// Sample patches from the PGM/PNG files in this directory instead of
    /// drawing Gaussian patches.
    #[arg(long)]
    pub image_dir: Option<PathBuf>,
    /// Fixed iteration count for the global solvers.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Timed runs per cell; the fastest is reported.
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub dict: DictionaryArgs,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DictArgs {
    #[arg(long, value_enum, default_value = "dct")]
    pub kind: DictKind,
    #[arg(long, default_value_t = 8)]
    pub patch_side: usize,
    #[arg(long, default_value_t = 10)]
    pub atoms_per_dim: usize,
    /// Rows of a Gaussian dictionary.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Atoms of a Gaussian dictionary.
    #[arg(long, default_value_t = 200)]
    pub l: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "dictionary.csv")]
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DictKind {
    Dct,
    Gaussian,
}
