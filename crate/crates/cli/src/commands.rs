use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lodgednet::datapipe::{
    extract_plots, generate_synthetic, read_image, split_dataset, Dataset, DatasetManifest, GridSpec, Label,
    ManifestRecord, Split, SplitRatios, SynthConfig,
};
use lodgednet::model::{LodgedNetConfig, LodgedNetModel};
use lodgednet::raster::MultiChannelImage;
use lodgednet::tensor::AdamConfig;
use lodgednet::trainer::{benchmark, evaluate, train, write_history, EvalReport, TrainConfig, MIN_TRIALS};

use crate::settings::Settings;
use crate::{BenchArgs, EvalArgs, ExtractArgs, PredictArgs, SynthArgs, TrainArgs};

const CHANNEL_EXTENSIONS: [&str; 2] = ["pgm", "png"];

/// Channel files of a mosaic directory, ordered by file name.
fn mosaic_channels(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading mosaic directory {}", dir.display()))? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| CHANNEL_EXTENSIONS.contains(&e.as_str())) {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        bail!("no .pgm or .png channel files in {}", dir.display());
    }
    Ok(paths)
}

/// `{prefix}_c{k}.pgm` (or `.png`) for every channel.
fn sample_channels(prefix: &Path, channels: usize) -> Result<Vec<PathBuf>> {
    (0..channels)
        .map(|k| {
            let stem = format!("{}_c{k}", prefix.display());
            CHANNEL_EXTENSIONS
                .iter()
                .map(|ext| PathBuf::from(format!("{stem}.{ext}")))
                .find(|p| p.is_file())
                .with_context(|| format!("missing channel file {stem}.pgm"))
        })
        .collect()
}

fn read_labels(path: &Path) -> Result<Vec<Label>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading labels {}", path.display()))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| Ok(l.parse::<Label>()?))
        .collect()
}

pub fn extract(args: ExtractArgs, config: Option<&Path>) -> Result<()> {
    let mut s = Settings::new("extract-plots", config)?;
    let mosaic_dir = s.path("mosaic", args.mosaic)?;
    let grid_path = s.path("grid", args.grid)?;
    let out = s.path("out", args.out)?;
    let label = s.optional::<Label>("label", args.label)?;
    let labels_path = s.optional_path("labels", args.labels);
    s.echo();

    let mosaic = read_image(&mosaic_channels(&mosaic_dir)?)?;
    let grid_text = fs::read_to_string(&grid_path).with_context(|| format!("reading grid {}", grid_path.display()))?;
    let grid = GridSpec::parse(&grid_text)?;
    let plots = extract_plots(&mosaic, &grid)?;
    let labels = match (label, labels_path) {
        (_, Some(path)) => read_labels(&path)?,
        (Some(label), None) => vec![label; plots.len()],
        (None, None) => bail!("plot labels are required: give --label or --labels"),
    };
    if labels.len() != plots.len() {
        bail!("{} labels for {} plots", labels.len(), plots.len());
    }

    let channels = mosaic.channel_count();
    let records = labels
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let sample_id = format!("plot_r{:03}_c{:03}", i / grid.n_cols, i % grid.n_cols);
            let channel_paths = (0..channels)
                .map(|k| PathBuf::from(format!("{sample_id}_c{k}.pgm")))
                .collect();
            ManifestRecord {
                sample_id,
                label,
                split: Split::Unassigned,
                channel_paths,
            }
        })
        .collect();
    let dataset = Dataset::new(DatasetManifest::new(channels, records)?, plots)?;
    let manifest = dataset.write(&out)?;
    println!("{} plots written; manifest {}", dataset.len(), manifest.display());
    Ok(())
}

pub fn synth(args: SynthArgs, config: Option<&Path>) -> Result<()> {
    let defaults = SynthConfig::default();
    let mut s = Settings::new("synth", config)?;
    let out = s.path("out", args.out)?;
    let cfg = SynthConfig {
        n_per_class: s.value("n", args.n, defaults.n_per_class)?,
        channels: s.value("channels", args.channels, defaults.channels)?,
        plot_height: s.value("height", args.height, defaults.plot_height)?,
        plot_width: s.value("width", args.width, defaults.plot_width)?,
        seed: s.value("seed", args.seed, defaults.seed)?,
    };
    s.echo();
    let dataset = generate_synthetic(&cfg)?;
    let manifest = dataset.write(&out)?;
    println!("{} records written; manifest {}", dataset.len(), manifest.display());
    Ok(())
}

/// Loads a dataset and, when any record lacks a split, assigns the default
/// stratified split with `split_seed`.
fn load_split(data: &Path, split_seed: u64) -> Result<Dataset> {
    let mut dataset = Dataset::load(data)?;
    if dataset.manifest.has_unassigned() {
        log::info!("manifest has unassigned records; splitting with seed {split_seed}");
        dataset.manifest = split_dataset(&dataset.manifest, SplitRatios::default(), split_seed)?;
    }
    Ok(dataset)
}

fn check_channels(expected: usize, dataset: &Dataset) -> Result<()> {
    let found = dataset.manifest.channel_count();
    if found != expected {
        return Err(lodgednet::Error::Input(format!("dataset has {found} channels, expected {expected}")).into());
    }
    Ok(())
}

pub fn train_cmd(args: TrainArgs, config: Option<&Path>) -> Result<()> {
    let defaults = TrainConfig::default();
    let mut s = Settings::new("train", config)?;
    let data = s.path("data", args.data)?;
    let out = s.path("out", args.out)?;
    let history = s.path_or("history", args.history, out.with_extension("history.csv"));
    let channels = s.optional::<usize>("channels", args.channels)?;
    let seed = s.value("seed", args.seed, defaults.seed)?;
    let split_seed = s.value("split_seed", args.split_seed, seed)?;
    let cfg = TrainConfig {
        epochs: s.value("epochs", args.epochs, defaults.epochs)?,
        batch_size: s.value("batch_size", args.batch_size, defaults.batch_size)?,
        adam: AdamConfig {
            lr: s.value("lr", args.lr, defaults.adam.lr)?,
            ..defaults.adam
        },
        seed,
    };
    s.derived("beta1", &cfg.adam.beta1);
    s.derived("beta2", &cfg.adam.beta2);
    s.derived("epsilon", &cfg.adam.epsilon);
    s.echo();
    cfg.validate()?;

    let dataset = load_split(&data, split_seed)?;
    let channels = channels.unwrap_or(dataset.manifest.channel_count());
    check_channels(channels, &dataset)?;
    log::info!(
        "train/val/test = {}/{}/{}",
        dataset.indices(Split::Train).len(),
        dataset.indices(Split::Val).len(),
        dataset.indices(Split::Test).len()
    );

    let model = LodgedNetModel::build(LodgedNetConfig::new(channels), seed)?;
    let outcome = train(model, &dataset, &cfg)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    outcome.model.save(&out)?;
    write_history(&history, &outcome.history)?;
    let best = &outcome.history[outcome.best_epoch - 1];
    println!(
        "best epoch {} (val accuracy {:.2}%); model {}; history {}",
        best.epoch,
        100.0 * best.val_accuracy,
        out.display(),
        history.display()
    );
    Ok(())
}

fn write_report_csv(path: &Path, split: Split, report: &EvalReport) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.6}"));
    let c = report.confusion;
    let text = format!(
        "split,n_samples,accuracy,true_non_lodged_pred_non_lodged,true_non_lodged_pred_lodged,\
         true_lodged_pred_non_lodged,true_lodged_pred_lodged,precision_non_lodged,recall_non_lodged,\
         precision_lodged,recall_lodged\n{split},{},{:.6},{},{},{},{},{},{},{},{}\n",
        report.n_samples,
        report.accuracy,
        c[0][0],
        c[0][1],
        c[1][0],
        c[1][1],
        opt(report.precision[0]),
        opt(report.recall[0]),
        opt(report.precision[1]),
        opt(report.recall[1]),
    );
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn eval(args: EvalArgs, config: Option<&Path>) -> Result<()> {
    let mut s = Settings::new("eval", config)?;
    let model_path = s.path("model", args.model)?;
    let data = s.path("data", args.data)?;
    let split = s.value("split", args.split, Split::Test)?;
    let split_seed = s.value("seed", args.seed, 0u64)?;
    let csv = s.optional_path("csv", args.csv);
    s.echo();

    let model = LodgedNetModel::load(&model_path)?;
    let dataset = load_split(&data, split_seed)?;
    check_channels(model.config().channels, &dataset)?;
    let report = evaluate(&model, &dataset, split)?;
    print!("split: {split}\n{report}");
    if let Some(path) = csv {
        write_report_csv(&path, split, &report)?;
    }
    Ok(())
}

fn load_sample(prefix: &Path, channels: usize) -> Result<MultiChannelImage> {
    Ok(read_image(&sample_channels(prefix, channels)?)?)
}

pub fn predict(args: PredictArgs, config: Option<&Path>) -> Result<()> {
    let mut s = Settings::new("predict", config)?;
    let model_path = s.path("model", args.model)?;
    let sample = s.path("sample", args.sample)?;
    s.echo();

    let model = LodgedNetModel::load(&model_path)?;
    let image = load_sample(&sample, model.config().channels)?;
    let p = model.predict(&image)?;
    println!("{},{:.6}", p.label, p.probability);
    Ok(())
}

pub fn bench(args: BenchArgs, config: Option<&Path>) -> Result<()> {
    let mut s = Settings::new("bench", config)?;
    let model_path = s.path("model", args.model)?;
    let sample = s.path("sample", args.sample)?;
    let trials = s.value("trials", args.trials, 100usize)?;
    s.echo();
    if trials < MIN_TRIALS {
        return Err(
            lodgednet::Error::Parameter(format!("--trials must be at least {MIN_TRIALS}, got {trials}")).into(),
        );
    }

    let model = LodgedNetModel::load(&model_path)?;
    let image = load_sample(&sample, model.config().channels)?;
    let r = benchmark(&model, &image, trials)?;
    println!("forward_ms_mean,forward_ms_std,texture_ms_mean,texture_ms_std");
    println!(
        "{:.4},{:.4},{:.4},{:.4}",
        r.forward.mean_ms, r.forward.std_ms, r.texture.mean_ms, r.texture.std_ms
    );
    println!(
        "# trials={} warmup={} total_ms_mean={:.4} total_ms_std={:.4}",
        r.n_trials, r.warmup, r.total.mean_ms, r.total.std_ms
    );
    println!("# hardware note: {}", r.hardware_note);
    Ok(())
}
