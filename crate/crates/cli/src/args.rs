use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "pai",
    version,
    about = "Probabilistic abstract interpretation of density flow through small ReLU networks"
)]
pub struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "PAI_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate the input distribution through the per-stage abstract transformers.
    Analyze(RunArgs),
    /// Push the input distribution through the network by enumeration.
    Oracle(RunArgs),
    /// Run both and report their total-variation distance.
    Compare(RunArgs),
    /// Dump A, G, the lifted maps and the transformers of every stage.
    Lift(LiftArgs),
    /// Count or list the lattice points of a planar zonotope.
    Zonotope(ZonotopeArgs),
    /// Block-brightness density analysis of an image classifier.
    Mnist(MnistArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Network file (JSON).
    #[arg(long)]
    pub network: PathBuf,
    /// Analysis plan (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write gnuplot-readable per-stage probability tables.
    #[arg(long)]
    pub emit_plot_data: bool,
}

#[derive(Debug, Args)]
pub struct LiftArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Directory receiving the operator CSVs.
    #[arg(long)]
    pub dump_ops: PathBuf,
}

#[derive(Debug, Args)]
pub struct ZonotopeArgs {
    /// Zonotope file `{"center": [...], "generators": [[...], ...]}`.
    #[arg(long)]
    pub spec: PathBuf,
    /// Lattice spacing; points are multiples of it on both axes.
    #[arg(long)]
    pub lattice: String,
    /// Map the zonotope through the dense layers of this network first.
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Print only the number of points.
    #[arg(long)]
    pub count: bool,
    /// Write the points as CSV `x,y`.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MnistArgs {
    /// Image CSV with header `label,pixel0,...`.
    #[arg(long)]
    pub csv: PathBuf,
    /// Image abstraction config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Classifier network; required unless --fit-centroids is given.
    #[arg(long, required_unless_present = "fit_centroids")]
    pub network: Option<PathBuf>,
    /// Fit a nearest-centroid stand-in classifier on the CSV instead.
    #[arg(long, conflicts_with = "network")]
    pub fit_centroids: bool,
    /// Samples per support cell.
    #[arg(long, default_value_t = pai_core::transformer::DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use only the first N images.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}
