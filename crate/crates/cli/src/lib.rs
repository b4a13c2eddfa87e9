//! The `igo-pqa` workflow: synthesize frames, score them, train and
//! evaluate the regressor, and summarize score distributions.
//!
//! Exit codes: 0 ok, 2 usage or config, 3 data, 4 numeric.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{PipelineConfig, CONFIG_ENV};
pub use error::{CliError, Result, EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "igo-pqa", disable_version_flag = true, about = "Image-guided LiDAR point-cloud quality scoring")]
pub struct Cli {
    /// TOML config; sections [saliency] [pooling] [binning] [model] [train] [synth].
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,

    /// Config override `section.key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Worker threads; 1 gives bit-exact single-threaded output.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Print the version (with --config-hash: also the scoring config hash).
    #[arg(short = 'V', long)]
    pub version: bool,

    #[arg(long, requires = "version")]
    pub config_hash: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write seeded synthetic frames.
    Synth(SynthArgs),
    /// Score a frame directory: scores.csv and manifest.json.
    Generate(GenerateArgs),
    /// Quality bins for scores.
    Bin(BinArgs),
    /// Train the regressor on scored frames.
    Train(TrainArgs),
    /// Evaluate a checkpoint: metrics.json and a PLCC/SRCC/Avg. L1 table.
    Eval(EvalArgs),
    /// Per-bin counts, histogram CSV and SVG.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Score against a frozen manifest instead of fitting one.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Per-frame CSV of (camera_id, u, v, s) under `point_saliency/`.
    #[arg(long)]
    pub dump_point_saliency: bool,
    /// Pooled canvases as 16-bit PNG under `canvas/`.
    #[arg(long)]
    pub dump_canvas: bool,
}

#[derive(Debug, Args)]
pub struct BinArgs {
    /// scores.csv to re-bin with the configured thresholds.
    #[arg(long, conflicts_with = "values")]
    pub scores: Option<PathBuf>,
    /// Scores in [0, 100].
    #[arg(allow_negative_numbers = true)]
    pub values: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Targets; defaults to `<data>/scores.csv`, else the data is fitted.
    #[arg(long)]
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Targets; defaults to `<data>/scores.csv`, else the data is fitted.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Directory for metrics.json; defaults to the checkpoint's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "synthetic")]
    pub label: String,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Also write every camera's saliency map of this frame directory as 8-bit PNG.
    #[arg(long)]
    pub saliency_data: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code. Normal output goes to `out`, errors to
/// `err`.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli, out: &mut (dyn Write + Send)) -> Result<()> {
    let cfg = PipelineConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if cli.version {
        writeln!(out, "igo-pqa {}", env!("CARGO_PKG_VERSION"))?;
        if cli.config_hash {
            writeln!(out, "config-hash {}", cfg.config_hash())?;
        }
        return Ok(());
    }
    let command = cli
        .command
        .ok_or_else(|| CliError::Usage("no subcommand given; see --help".into()))?;
    let jobs = match cli.jobs {
        Some(0) => return Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(j) => j,
        None => rayon::current_num_threads(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| match command {
        Command::Synth(a) => commands::synth(&cfg, &a, out),
        Command::Generate(a) => commands::generate(&cfg, &a, out),
        Command::Bin(a) => commands::bin(&cfg, &a, out),
        Command::Train(a) => commands::train(&cfg, &a, cli.jobs, out),
        Command::Eval(a) => commands::eval(&cfg, &a, out),
        Command::Report(a) => commands::report(&cfg, &a, out),
    })
}
