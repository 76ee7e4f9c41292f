//! Command-line front end. [`run_cli`] parses arguments, runs one command
//! and maps failures to exit codes: 0 success, 2 usage, 3 data, 4 internal.

mod commands;
mod config;
mod manifest;

pub use config::{pick, ExperimentConfig};
pub use manifest::{sha256_file, sidecar, InputRecord, Run, RunManifest, RunStatus};

use std::ffi::OsString;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use thiserror::Error;

use crate::audio::{AnchorKind, AudioError, WavFormat};
use crate::embeddings::{ClassLabel, EmbeddingError};
use crate::metrics::MetricsError;
use crate::mushra::MushraError;
use crate::separability::SeparabilityError;
use crate::service::ServiceError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    /// Missing or unreadable inputs are data errors; anything else is internal.
    pub fn from_io(path: &Path, e: std::io::Error) -> Self {
        let msg = format!("{}: {e}", path.display());
        match e.kind() {
            ErrorKind::NotFound | ErrorKind::PermissionDenied | ErrorKind::IsADirectory | ErrorKind::InvalidData => {
                CliError::Data(msg)
            }
            _ => CliError::Internal(msg),
        }
    }

    fn context(self, path: &Path) -> Self {
        let prefix = path.display().to_string();
        let add = |m: String| if m.starts_with(&prefix) { m } else { format!("{prefix}: {m}") };
        match self {
            CliError::Usage(m) => CliError::Usage(add(m)),
            CliError::Data(m) => CliError::Data(add(m)),
            CliError::Internal(m) => CliError::Internal(add(m)),
        }
    }
}

fn io_kind(e: &std::io::Error, msg: String) -> CliError {
    match e.kind() {
        ErrorKind::NotFound | ErrorKind::PermissionDenied | ErrorKind::IsADirectory => CliError::Data(msg),
        _ => CliError::Internal(msg),
    }
}

impl From<AudioError> for CliError {
    fn from(e: AudioError) -> Self {
        match &e {
            AudioError::Io(io) => io_kind(io, e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EmbeddingError> for CliError {
    fn from(e: EmbeddingError) -> Self {
        match e {
            EmbeddingError::Io(io) => io_kind(&io, io.to_string()),
            EmbeddingError::Audio(a) => a.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<SeparabilityError> for CliError {
    fn from(e: SeparabilityError) -> Self {
        match e {
            SeparabilityError::Embedding(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Io(io) => io_kind(&io, io.to_string()),
            MetricsError::Audio(a) => a.into(),
            MetricsError::File { path, source } => CliError::from(source).context(Path::new(&path)),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<MushraError> for CliError {
    fn from(e: MushraError) -> Self {
        match e {
            MushraError::Io(io) => io_kind(&io, io.to_string()),
            MushraError::Audio(a) => a.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Io(io) => io_kind(&io, io.to_string()),
            ServiceError::Mushra(m) => m.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        match e.kind() {
            csv::ErrorKind::Io(io) => io_kind(io, e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "adsr-eval", version, about = "Evaluate audio super-resolution: signal metrics, real/fake separability and MUSHRA campaigns")]
pub struct Cli {
    /// TOML file with defaults; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Downsample wideband clips and restore them with the cubic spline.
    Degrade(DegradeArgs),
    /// Generate MUSHRA anchors from 48 kHz clips.
    Anchor(AnchorArgs),
    /// Extract log-Mel embeddings or import external ones into AEMB.
    Embed(EmbedArgs),
    /// Fit and test a real/fake linear classifier on embeddings.
    Classify(ClassifyArgs),
    /// SNR and LSD over a manifest of reference/estimate pairs.
    Metrics(MetricsArgs),
    /// Build or serve a MUSHRA listening campaign.
    #[command(subcommand)]
    Campaign(CampaignCommand),
    /// Screen listeners and summarize a campaign response log.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct DegradeArgs {
    /// Directory of wideband WAV files (searched recursively).
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Narrowband rate in Hz.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub low: Option<u32>,
    /// Wideband rate in Hz; inputs must already be at this rate.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub high: Option<u32>,
    #[arg(long, value_enum)]
    pub format: Option<WavFormat>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnchorArgs {
    /// A 48 kHz WAV file or a directory of them.
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Anchor to generate; repeat for several. Defaults to both.
    #[arg(long = "kind")]
    pub kinds: Vec<AnchorKind>,
    #[arg(long, value_enum)]
    pub format: Option<WavFormat>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["audio", "import"]))]
pub struct EmbedArgs {
    /// Directory of WAV files to embed with the log-Mel pipeline.
    #[arg(long, value_name = "DIR")]
    pub audio: Option<PathBuf>,
    /// Existing embeddings to ingest (`.csv` with a label column, or AEMB).
    #[arg(long, value_name = "FILE")]
    pub import: Option<PathBuf>,
    /// Class of every row; required with --audio, relabels on import.
    #[arg(long)]
    pub label: Option<ClassLabel>,
    /// Output AEMB file.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long)]
    pub n_mels: Option<usize>,
    #[arg(long)]
    pub fft_size: Option<usize>,
    #[arg(long)]
    pub hop: Option<usize>,
    /// Pooled time steps per embedding.
    #[arg(long)]
    pub t_out: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Real-class embeddings (AEMB or CSV); every row is treated as real.
    #[arg(long, value_name = "FILE", required_unless_present = "table", requires = "fake")]
    pub real: Option<PathBuf>,
    /// Fake-class embeddings (AEMB or CSV); every row is treated as fake.
    #[arg(long, value_name = "FILE", required_unless_present = "table", requires = "real")]
    pub fake: Option<PathBuf>,
    /// CSV with `model,task,real,fake` columns; emits an accuracy table.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["real", "fake", "projections"])]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated seeds; reports mean and spread of accuracy.
    #[arg(long, value_delimiter = ',', conflicts_with = "seed")]
    pub seeds: Option<Vec<u64>>,
    /// Shrinkage weight on the within-class covariance.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Report destination (JSON, or CSV with --table); stdout when absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Write test-set discriminant scores as `label,score` CSV.
    #[arg(long, value_name = "FILE")]
    pub projections: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// CSV with `reference_path,estimate_path[,model,task]` columns.
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Per-pair CSV with a trailing mean row; stdout when absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
    /// Model x task summary in `model,LSD <task>,SNR <task>` layout.
    #[arg(long, value_name = "FILE")]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub fft_size: Option<usize>,
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum CampaignCommand {
    /// Assemble trials (reference, systems, anchors) and write a manifest.
    Build(CampaignBuildArgs),
    /// Run the listening-test HTTP service.
    Serve(CampaignServeArgs),
}

#[derive(Debug, Args)]
pub struct CampaignBuildArgs {
    /// Directory of 48 kHz wideband references; file stems become trial ids.
    #[arg(long, value_name = "DIR")]
    pub items: PathBuf,
    /// `NAME=DIR` with one output per reference under the same relative path.
    #[arg(long = "system", value_name = "NAME=DIR", value_parser = parse_system, required = true)]
    pub systems: Vec<(String, PathBuf)>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<WavFormat>,
}

fn parse_system(s: &str) -> Result<(String, PathBuf), String> {
    let (name, dir) = s.split_once('=').ok_or("expected NAME=DIR")?;
    if name.is_empty() || dir.is_empty() {
        return Err("expected NAME=DIR".into());
    }
    Ok((name.to_string(), PathBuf::from(dir)))
}

#[derive(Debug, Args)]
pub struct ScreeningArgs {
    /// Hidden-reference score below which a trial counts as failed.
    #[arg(long)]
    pub ref_threshold: Option<i64>,
    /// Listeners failing more than this fraction of trials are excluded.
    #[arg(long)]
    pub max_fail_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CampaignServeArgs {
    #[arg(long, value_name = "FILE")]
    pub campaign: PathBuf,
    /// Append-only response log (created if missing).
    #[arg(long, value_name = "FILE")]
    pub log: PathBuf,
    /// Listen address, e.g. 127.0.0.1:8080.
    #[arg(long)]
    pub bind: Option<String>,
    /// Static listening-UI bundle served at `/`.
    #[arg(long, value_name = "DIR")]
    pub ui: Option<PathBuf>,
    #[command(flatten)]
    pub screening: ScreeningArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_name = "FILE")]
    pub log: PathBuf,
    /// Per-condition statistics CSV; stdout when absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Raw per-score CSV including exclusion flags.
    #[arg(long, value_name = "FILE")]
    pub raw: Option<PathBuf>,
    /// Full export (statistics, exclusions, warnings) as JSON.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
    #[command(flatten)]
    pub screening: ScreeningArgs,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Degrade(_) => "degrade",
            Command::Anchor(_) => "anchor",
            Command::Embed(_) => "embed",
            Command::Classify(_) => "classify",
            Command::Metrics(_) => "metrics",
            Command::Campaign(CampaignCommand::Build(_)) => "campaign build",
            Command::Campaign(CampaignCommand::Serve(_)) => "campaign serve",
            Command::Report(_) => "report",
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();

    let config = match cli.config.as_deref().map(ExperimentConfig::load).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let recorded: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let mut run = Run::new(cli.command.name(), recorded);
    let outcome = commands::dispatch(cli.command, &config, &mut run);
    let finished = run.finish(&outcome);
    match outcome.and(finished) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
