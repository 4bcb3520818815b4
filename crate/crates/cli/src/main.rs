mod analysis;
mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fredn_core::FrednError;

#[derive(Parser, Debug)]
#[command(name = "fredn", version, about = "Frequency-decomposition forecaster")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model on a CSV dataset and write checkpoint, history and report.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test (or validation) split.
    Eval(EvalArgs),
    /// Generate a synthetic trend + seasonal + noise series and its spectra.
    Synth(SynthArgs),
    /// Decompose one channel of a dataset and write series and spectra.
    Decompose(DecomposeArgs),
    /// Finite-difference check of every model gradient.
    Gradcheck(GradcheckArgs),
}

/// Training hyperparameters. Unset flags fall back to the config file, then
/// to built-in defaults.
#[derive(Args, Debug, Default, Clone)]
pub struct HyperArgs {
    #[arg(long)]
    pub lookback: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// fredn, movdn, topkdn or complex-linear
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub ma_window: Option<usize>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// time-mse, time-mae, freq-mse or freq-mae
    #[arg(long)]
    pub loss: Option<String>,
    /// Embedding size
    #[arg(long = "d")]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// typ1, cosine or constant
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
}

/// Dataset handling shared by train and eval.
#[derive(Args, Debug, Default, Clone)]
pub struct DataArgs {
    /// 6:2:2 split (ETT family) instead of 7:1:2
    #[arg(long)]
    pub ett: bool,
    /// Use only the first N rows
    #[arg(long)]
    pub max_rows: Option<usize>,
    /// Skip dataset-level z-scoring
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// CSV with a header, a timestamp column and numeric channels
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Flat JSON config; flags take precedence over its keys
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default: runs/<dataset>-<variant>)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[command(flatten)]
    pub data_opts: DataArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Resolved config of the training run (split settings, data path)
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lookback: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// test or val
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Write one row per (window, channel, step) with target and prediction
    #[arg(long)]
    pub dump_predictions: Option<PathBuf>,
    /// Report path (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub data_opts: DataArgs,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 720)]
    pub len: usize,
    #[arg(long, default_value_t = 3)]
    pub trend_degree: usize,
    #[arg(long, default_value_t = 8)]
    pub knots: usize,
    #[arg(long, default_value_t = 1.0)]
    pub trend_amplitude: f64,
    /// Seasonal component as cycles:amplitude:phase (repeatable)
    #[arg(long)]
    pub season: Vec<String>,
    /// Noise standard deviation
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value = "synth_out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    /// ma, topk or fred
    #[arg(long)]
    pub method: String,
    #[arg(long, default_value_t = 25)]
    pub window: usize,
    /// Retained bins for topk (default floor(log2 len))
    #[arg(long)]
    pub k: Option<usize>,
    /// Log-decay order of the frequency gate for fred
    #[arg(long, default_value_t = 1.0)]
    pub order: f64,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub channel: usize,
    #[arg(long, default_value_t = 720)]
    pub len: usize,
    /// First row of the segment
    #[arg(long, default_value_t = 0)]
    pub start: usize,
    #[arg(long, default_value = "decompose_out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Only `tiny` is available
    #[arg(long, default_value = "tiny")]
    pub config: String,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
}

/// 0 success, 1 usage/config, 2 data, 3 numeric divergence.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<FrednError>() {
            return match e {
                FrednError::Divergence { .. } => 3,
                FrednError::Data(_)
                | FrednError::Parse { .. }
                | FrednError::Io(_)
                | FrednError::Csv(_)
                | FrednError::EmptyInput => 2,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Train(a) => run::train(a),
        Command::Eval(a) => run::eval(a),
        Command::Synth(a) => analysis::synth(a),
        Command::Decompose(a) => analysis::decompose(a),
        Command::Gradcheck(a) => analysis::gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
