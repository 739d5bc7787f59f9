//! `lodgednet`: plot extraction, synthetic data, training, evaluation,
//! prediction and latency benchmarks for the lodging classifier.
//!
//! Every option can also come from a `key=value` file given with
//! `--config` (keys are the long flag names with `_` for `-`); flags win.
//! Exit status is 0 on success, 2 for usage or data errors and 3 for
//! numeric failures such as a diverging loss.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lodgednet::datapipe::{Label, Split};

mod commands;
mod settings;

#[derive(Parser)]
#[command(name = "lodgednet", version, about = "Lodged / non-lodged crop plot classifier")]
struct Cli {
    /// key=value file supplying defaults for the command's options.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cut a plot grid out of a multi-channel orthomosaic.
    ExtractPlots(ExtractArgs),
    /// Generate a labelled synthetic dataset.
    Synth(SynthArgs),
    /// Train a model (50 epochs, batch 16, Adam lr 0.001 unless overridden).
    Train(TrainArgs),
    /// Report accuracy and the confusion matrix on one split.
    Eval(EvalArgs),
    /// Classify one sample.
    Predict(PredictArgs),
    /// Time the forward pass and texture extraction on one sample.
    Bench(BenchArgs),
}

#[derive(Args)]
pub struct ExtractArgs {
    /// Directory of channel images (.pgm/.png), in file-name order.
    #[arg(long)]
    mosaic: Option<PathBuf>,
    /// Grid file (origin_row, origin_col, plot_height, plot_width, row_gap,
    /// col_gap, n_rows, n_cols).
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Label given to every plot.
    #[arg(long)]
    label: Option<Label>,
    /// One label per line, row-major plot order.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    /// Samples per class [default: 200].
    #[arg(long)]
    n: Option<usize>,
    /// [default: 3]
    #[arg(long)]
    channels: Option<usize>,
    /// Plot height in pixels [default: 60].
    #[arg(long)]
    height: Option<usize>,
    /// Plot width in pixels [default: 100].
    #[arg(long)]
    width: Option<usize>,
    /// [default: 7]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset manifest CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// History CSV [default: <out>.history.csv].
    #[arg(long)]
    history: Option<PathBuf>,
    /// Expected channel count [default: the manifest's].
    #[arg(long)]
    channels: Option<usize>,
    /// Seeds initialization, shuffling, flips and dropout [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Seed for splitting a manifest with unassigned records [default: --seed].
    #[arg(long)]
    split_seed: Option<u64>,
    /// [default: 50]
    #[arg(long)]
    epochs: Option<usize>,
    /// [default: 16]
    #[arg(long)]
    batch_size: Option<usize>,
    /// [default: 0.001]
    #[arg(long)]
    lr: Option<f64>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// train, val or test [default: test].
    #[arg(long)]
    split: Option<Split>,
    /// Seed for splitting a manifest with unassigned records; use the split
    /// seed given to `train` [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the report as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Channel files are `<sample>_c0.pgm`, `<sample>_c1.pgm`, ...
    #[arg(long)]
    sample: Option<PathBuf>,
}

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Channel files are `<sample>_c0.pgm`, `<sample>_c1.pgm`, ...
    #[arg(long)]
    sample: Option<PathBuf>,
    /// Timed runs, at least 30 [default: 100].
    #[arg(long)]
    trials: Option<usize>,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::ExtractPlots(a) => commands::extract(a, config),
        Command::Synth(a) => commands::synth(a, config),
        Command::Train(a) => commands::train_cmd(a, config),
        Command::Eval(a) => commands::eval(a, config),
        Command::Predict(a) => commands::predict(a, config),
        Command::Bench(a) => commands::bench(a, config),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<lodgednet::Error>() {
        Some(e) if e.is_numeric() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
