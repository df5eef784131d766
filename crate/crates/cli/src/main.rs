mod commands;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wavegate::dataset::Split;
use wavegate::noise::NoiseModel;
use wavegate::Boundary;

/// Wavelet sub-signal gating denoiser for pulse waveforms.
#[derive(Debug, Parser)]
#[command(name = "wavegate", version)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build train/val/test window-pair tables from records or synthetic pulses.
    Prepare(PrepareArgs),
    /// Train a model and write its checkpoint and per-epoch metrics.
    Train(TrainArgs),
    /// Denoise one signal file with a trained model.
    Denoise(DenoiseArgs),
    /// Evaluate a model on a test table against the all-ones baseline.
    Eval(EvalArgs),
    /// Retrain across decomposition levels or mother wavelets.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory [default: $WAVEGATE_OUT/<command>, or ./runs/<command>].
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Default root for output directories.
    #[arg(long, env = "WAVEGATE_OUT", default_value = "runs", hide_default_value = true)]
    pub out_root: PathBuf,

    /// Replace an existing output directory.
    #[arg(long)]
    pub force: bool,
}

impl OutputArgs {
    pub fn resolve(&self, command: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| self.out_root.join(command))
    }
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["synthetic", "input_dir"]))]
pub struct PrepareArgs {
    /// Generate synthetic pulse windows.
    #[arg(long)]
    pub synthetic: bool,

    /// Directory of record CSV files (one column per channel, header row).
    #[arg(long)]
    pub input_dir: Option<PathBuf>,

    /// Number of synthetic windows.
    #[arg(long, default_value_t = 640)]
    pub windows: usize,

    /// Synthetic heart-rate range in beats per minute.
    #[arg(long, default_value_t = 60.0)]
    pub bpm_min: f64,
    #[arg(long, default_value_t = 100.0)]
    pub bpm_max: f64,

    /// Column to read from each record.
    #[arg(long, default_value = "PLETH")]
    pub channel: String,

    #[arg(long, default_value_t = 125.0)]
    pub sample_rate: f64,

    #[arg(long, default_value_t = 8.0)]
    pub window_seconds: f64,

    /// Hop between windows [default: window length].
    #[arg(long)]
    pub stride_seconds: Option<f64>,

    /// Corruption model, repeatable, applied in rotation, e.g. gaussian:var=0.05,
    /// poisson:lambda=0.02, uniform:lo=-0.1,hi=0.1, salt_pepper:p=0.05
    /// [default: all four of these].
    #[arg(long = "noise")]
    pub noise: Vec<NoiseModel>,

    /// Train,val,test window counts.
    #[arg(long, default_value = "512,64,64")]
    pub split: Split,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Mother wavelet, db1 to db10.
    #[arg(long, default_value = "db10", value_parser = parse_wavelet)]
    pub wavelet: usize,

    /// Decomposition level L.
    #[arg(long, default_value_t = 8)]
    pub level: usize,

    #[arg(long, default_value = "symmetric")]
    pub boundary: Boundary,

    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,

    #[arg(long, default_value_t = 100)]
    pub batch: usize,

    #[arg(long, default_value_t = 100)]
    pub val_batch: usize,

    #[arg(long, default_value_t = 500)]
    pub epochs: usize,

    /// Epochs without validation improvement before stopping.
    #[arg(long, default_value_t = 20)]
    pub patience: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_wavelet(s: &str) -> Result<usize, String> {
    wavegate::wavelet::parse_wavelet_name(s).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory written by `prepare` (train.csv, val.csv).
    #[arg(long)]
    pub data: PathBuf,

    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,

    /// Signal file: one sample per line, optional header.
    #[arg(long)]
    pub input: PathBuf,

    /// Treat the input as already scaled to [0, 1].
    #[arg(long)]
    pub no_normalize: bool,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,

    /// Window-pair table, or a `prepare` directory (its test.csv is used).
    #[arg(long)]
    pub data: PathBuf,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Level,
    Wavelet,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: Axis,

    /// Directory written by `prepare` (train.csv, val.csv, test.csv).
    #[arg(long)]
    pub data: PathBuf,

    /// Values to sweep, comma separated [default: 1..8 for levels, db1..db10 for wavelets].
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<String>,

    /// Parallel training runs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,

    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(wavegate::Error),
}

impl From<wavegate::Error> for CliError {
    fn from(e: wavegate::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(wavegate::Error::Numeric(_)) => 4,
            CliError::Core(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    manifest::init_logging(cli.verbose);
    let result = match &cli.command {
        Command::Prepare(a) => commands::prepare(a),
        Command::Train(a) => commands::train(a),
        Command::Denoise(a) => commands::denoise(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
