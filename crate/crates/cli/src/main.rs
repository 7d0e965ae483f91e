//! `scatnet`: scattering features and affine-model classification from the
//! command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scatnet::{ErrorKind, Result};

use scatnet_cli::commands::{self, DatasetArgs};
use scatnet_cli::config::{ConfigArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "scatnet", version, about = "Scattering transform features and affine-model classification")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    /// Log progress to standard error.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dump the filter bank and its Littlewood-Paley profile.
    Filters {
        #[arg(long, default_value_t = 32)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute scattering features of a dataset (SCT1 file).
    Scatter {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one affine model per class from a feature file (SCM1 file).
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select J and beta on a held-out split.
    Crossval {
        #[command(flatten)]
        data: DatasetArgs,
        /// Directory caching features per J.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// CSV of every (J, beta) setting tried.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify every vector of a feature file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Error rate, mean model dimension and confusion matrix.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Confusion matrix CSV.
        #[arg(long)]
        confusion: Option<PathBuf>,
        /// JSON-lines summary file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Diagnostic tables.
    #[command(subcommand)]
    Analyze(Analysis),
    /// Write the synthetic texture benchmark as PNG files.
    SynthTextures {
        #[arg(long = "per-class")]
        per_class: usize,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum Analysis {
    /// Relative approximation errors inside and outside each class.
    Inout {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long = "k-max", default_value_t = 20)]
        k_max: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Variance of scattering coefficients of stationary textures versus J.
    Vardecay {
        /// Texture directory; white noise when absent.
        #[arg(long = "texture-dir")]
        texture_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(long = "j-max", default_value_t = 5)]
        j_max: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean scattering energy per path length.
    Layers {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::resolve(&cli.config)?;
    if let Some(jobs) = cfg.jobs {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    log::info!("configuration: {}", cfg.describe());
    match cli.command {
        Command::Filters { size, out } => commands::filters(&cfg, size, &out),
        Command::Scatter { data, out } => commands::scatter(&cfg, &data, &out),
        Command::Train { features, out } => commands::train(&cfg, &features, &out),
        Command::Crossval { data, cache, out } => commands::crossval(&cfg, &data, cache.as_deref(), out.as_deref()),
        Command::Predict { model, features, out } => commands::predict(&model, &features, &out),
        Command::Evaluate {
            model,
            features,
            confusion,
            report,
        } => commands::evaluate(&model, &features, confusion.as_deref(), report.as_deref()),
        Command::Analyze(Analysis::Inout {
            model,
            features,
            k_max,
            out,
        }) => commands::analyze_inout(&model, &features, k_max, &out),
        Command::Analyze(Analysis::Vardecay {
            texture_dir,
            size,
            count,
            j_max,
            out,
        }) => commands::analyze_vardecay(&cfg, texture_dir.as_deref(), size, count, j_max, &out),
        Command::Analyze(Analysis::Layers { features, out }) => commands::analyze_layers(&features, &out),
        Command::SynthTextures { per_class, size, out } => commands::synth_textures(&cfg, per_class, size, &out),
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Io => 3,
        ErrorKind::Data => 4,
        ErrorKind::Numeric => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error ({}): {e}", e.kind());
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
