//! `sst`: command-line front end for Slepian bases, the spatial-Slepian
//! transform, frame checks, benchmarks and localized variation analysis.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Parser, Serialize)]
#[command(
    name = "sst",
    version,
    about = "Spatial-Slepian transform on the sphere"
)]
pub struct Cli {
    /// Cap on worker threads (default: all available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output encoding for every emitted file.
    #[arg(long, global = true, value_enum, default_value_t = Format::Bin)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Bin,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Build and store a Slepian basis.
    Basis(BasisArgs),
    /// Harmonic analysis of an equiangular map.
    IngestMap(IngestArgs),
    /// Forward spatial-Slepian transform.
    Forward(ForwardArgs),
    /// Inverse spatial-Slepian transform.
    Inverse(InverseArgs),
    /// Frame-energy check.
    FrameCheck(FrameCheckArgs),
    /// Timing of the fast transform over a range of bandlimits.
    Bench(BenchArgs),
    /// Localized variation analysis.
    #[command(subcommand)]
    Lva(LvaCommand),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BasisArgs {
    #[arg(long = "L")]
    pub bandlimit: usize,
    /// Polar cap angle in degrees.
    #[arg(long, conflicts_with = "ellipse", required_unless_present = "ellipse")]
    pub cap_deg: Option<f64>,
    /// Spherical ellipse `θc,a` in degrees.
    #[arg(long)]
    pub ellipse: Option<String>,
    /// Ellipse rotation `φ,ϑ,ω` in degrees.
    #[arg(long, requires = "ellipse")]
    pub rot: Option<String>,
    /// Full cap basis over all orders instead of the zonal (m = 0) basis.
    #[arg(long, requires = "cap_deg")]
    pub full: bool,
    /// Number of eigenvectors to store (default: the rounded Shannon number).
    #[arg(long)]
    pub store_first: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IngestArgs {
    /// Equiangular CSV (one θ row per line) or a binary sphere-signal file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long = "L")]
    pub bandlimit: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ForwardArgs {
    /// Harmonic-coefficient file.
    #[arg(long)]
    pub signal: PathBuf,
    /// Slepian basis file.
    #[arg(long)]
    pub basis: PathBuf,
    #[arg(long)]
    pub alpha: usize,
    /// FFT-accelerated evaluation (default).
    #[arg(long, conflicts_with = "direct")]
    pub fast: bool,
    /// Direct triple sum at every rotation node.
    #[arg(long)]
    pub direct: bool,
    /// Zonal transform sampled on the sphere (zonal bases only).
    #[arg(long, conflicts_with = "direct")]
    pub sphere: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InverseArgs {
    /// Rotation-group or (zonal) sphere signal produced by `forward`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub basis: PathBuf,
    /// Slepian scale; taken from the input header when present.
    #[arg(long)]
    pub alpha: Option<usize>,
    /// Absolute singularity threshold on the basis coefficients.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FrameCheckArgs {
    #[arg(long)]
    pub basis: PathBuf,
    /// Harmonic-coefficient file; without it random signals are drawn.
    #[arg(long, conflicts_with = "seed")]
    pub signal: Option<PathBuf>,
    /// Seed for random test signals.
    #[arg(long, required_unless_present = "signal")]
    pub seed: Option<u64>,
    /// Number of random signals.
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    /// Number of scales in the frame sum (default: the rounded Shannon number).
    #[arg(long)]
    pub scales: Option<usize>,
    /// JSON report destination (printed to stdout as well).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 16)]
    pub lmin: usize,
    #[arg(long, default_value_t = 128)]
    pub lmax: usize,
    /// Repetitions per bandlimit; the fastest is reported.
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[arg(long)]
    pub seed: u64,
    /// CSV report destination (printed to stdout as well).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LvaCommand {
    /// Ensemble synthesis, variance maps and detection masks.
    Run(LvaRunArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LvaRunArgs {
    #[arg(long = "L")]
    pub bandlimit: usize,
    /// Number of observations.
    #[arg(long = "N")]
    pub n_instances: usize,
    #[arg(long)]
    pub bvr_db: f64,
    /// Variation region: `cap:Θ` or `ellipse:θc,a[:rot=φ,ϑ,ω]`, degrees.
    #[arg(long)]
    pub region: String,
    /// Cap angle of the zonal detection basis, degrees.
    #[arg(long)]
    pub cap_deg: f64,
    #[arg(long)]
    pub seed: u64,
    /// Comma-separated Slepian scales (default: 1..=rounded Shannon number).
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<usize>,
    #[arg(long, default_value_t = 0.95)]
    pub quantile: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn run(mut cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    commands::resolve_paths(&mut cli.command)?;
    commands::execute(&cli)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("sst: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
