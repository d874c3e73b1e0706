use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};

/// Optimal transport between Gaussian mixtures and multi-source domain adaptation.
///
/// Every command that writes files also writes a JSON manifest with the fully
/// resolved configuration, the seed and the list of outputs.
#[derive(Debug, Parser)]
#[command(name = "gmmot", version)]
pub struct Cli {
    /// Worker threads for the parallel stages; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// Run configuration JSON. Explicit flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a mixture to a CSV dataset by EM (labeled per class with --k-per-class).
    FitGmm(FitGmm),
    /// Optimal component-level transport plan between two mixtures.
    Gmmot(Pair),
    /// Mixture-Wasserstein distance between two mixtures (label-aware when --beta > 0).
    Mw2(Pair),
    /// Fixed-point barycenter of several mixtures.
    Barycenter(Barycenter),
    /// Barycenter transport: source barycenter mapped onto the target mixture.
    Wbt(Adapt),
    /// Dictionary learning over source and target mixtures.
    Dadil(Dadil),
    /// MAP classification with a labeled mixture, or labeled sample export.
    Classify(Classify),
    /// Synthetic shifted-classification domains as CSV files.
    ToyGen(ToyGen),
}

#[derive(Debug, Args)]
pub struct Seed {
    /// Seed for every random stage; overrides the config file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FitGmm {
    /// Input CSV (header f0,..,f{d-1},label).
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Output mixture JSON.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Number of components of an unlabeled fit.
    #[arg(long)]
    pub k: Option<usize>,
    /// Components per class; fits a labeled mixture (needs a labeled file).
    #[arg(long)]
    pub k_per_class: Option<usize>,
    /// EM stopping tolerance on the mean log-likelihood.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Maximum EM iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Lower bound on component standard deviations.
    #[arg(long)]
    pub s_min: Option<f64>,
    #[command(flatten)]
    pub seed: Seed,
}

#[derive(Debug, Args)]
pub struct Pair {
    /// First mixture JSON.
    #[arg(long, value_name = "FILE")]
    pub a: PathBuf,
    /// Second mixture JSON.
    #[arg(long, value_name = "FILE")]
    pub b: PathBuf,
    /// Weight of the soft-label term; both mixtures must be labeled when positive.
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    /// Optional result JSON; a manifest is written next to it.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Barycenter {
    /// Comma-separated mixture JSON files.
    #[arg(long, value_delimiter = ',', required = true, value_name = "FILES")]
    pub sources: Vec<PathBuf>,
    /// Comma-separated barycentric weights (uniform when omitted).
    #[arg(long, value_delimiter = ',', value_name = "WEIGHTS")]
    pub weights: Option<Vec<f64>>,
    /// Number of barycenter components.
    #[arg(long)]
    pub k: Option<usize>,
    /// Weight of the soft-label term.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Stop once the loss changes by less than this.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Maximum fixed-point iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Lower bound on component standard deviations.
    #[arg(long)]
    pub s_min: Option<f64>,
    /// Ignore labels and return an unlabeled barycenter.
    #[arg(long)]
    pub unsupervised: bool,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: Seed,
}

/// Inputs shared by the adaptation commands. CSV inputs are fitted first
/// (labeled per class for sources, unlabeled for the target); JSON inputs are
/// read as mixtures.
#[derive(Debug, Args)]
pub struct Adapt {
    /// Comma-separated source files (labeled CSV or labeled mixture JSON).
    #[arg(long, value_delimiter = ',', required = true, value_name = "FILES")]
    pub sources: Vec<PathBuf>,
    /// Target file (CSV, labels optional, or mixture JSON).
    #[arg(long, value_name = "FILE")]
    pub target: PathBuf,
    /// Target mixture components; also the barycenter size.
    #[arg(long)]
    pub k: Option<usize>,
    /// Components per class of the source fits.
    #[arg(long, default_value_t = 2)]
    pub k_per_class: usize,
    /// Weight of the soft-label term.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Barycenter stopping tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Maximum barycenter iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Lower bound on component standard deviations.
    #[arg(long)]
    pub s_min: Option<f64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: Seed,
}

#[derive(Debug, Args)]
pub struct Dadil {
    /// Comma-separated source files (labeled CSV or labeled mixture JSON).
    #[arg(long, value_delimiter = ',', required = true, value_name = "FILES")]
    pub sources: Vec<PathBuf>,
    /// Target file (CSV, labels optional, or mixture JSON).
    #[arg(long, value_name = "FILE")]
    pub target: PathBuf,
    /// Target mixture components; also the atom size unless the config sets one.
    #[arg(long)]
    pub k: Option<usize>,
    /// Components per class of the source fits.
    #[arg(long, default_value_t = 2)]
    pub k_per_class: usize,
    /// Number of atoms (default: one per domain).
    #[arg(long)]
    pub atoms: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Outer iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Weight of the soft-label term.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Inner barycenter stopping tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Lower bound on component standard deviations.
    #[arg(long)]
    pub s_min: Option<f64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: Seed,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["data", "sample"])))]
pub struct Classify {
    /// Labeled mixture JSON.
    #[arg(long, value_name = "FILE")]
    pub gmm: PathBuf,
    /// CSV to classify; the output repeats its features with predicted labels.
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    /// Draw this many labeled samples instead of classifying.
    #[arg(long, value_name = "N")]
    pub sample: Option<usize>,
    /// Output CSV.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: Seed,
}

#[derive(Debug, Args)]
pub struct ToyGen {
    /// Output directory; receives domain0.csv .. domain{n-1}.csv.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: Seed,
}
