//! Training loop, evaluation metrics and latency benchmarking.

mod bench;
mod eval;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

pub use bench::{benchmark, BenchReport, Timing, BENCH_WARMUP, MIN_TRIALS};
pub use eval::{evaluate, EvalReport};

use crate::datapipe::{
    fit_normalization, resize_center_crop, sample_rng, Dataset, FlipState, Split, TARGET_HEIGHT, TARGET_WIDTH,
};
use crate::error::{Error, Result};
use crate::model::{network, stack, LodgedNetModel, NoRng, PreparedSample};
use crate::raster::MultiChannelImage;
use crate::tensor::{adam_step, AdamConfig, AdamState, Graph, Mode, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 16,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Parameter(format!(
                "epochs and batch size must be at least 1: {self:?}"
            )));
        }
        self.adam.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-sample training loss over the epoch.
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the best validation accuracy.
    pub model: LodgedNetModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let csv_err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    w.write_record(["epoch", "train_loss", "val_accuracy"])
        .map_err(csv_err)?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.val_accuracy.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Mean cross-entropy of a batch, eval mode.
pub fn batch_loss(
    model: &LodgedNetModel,
    images: &Tensor<f32>,
    texture: &Tensor<f32>,
    targets: &[usize],
) -> Result<f64> {
    let mut g = Graph::new();
    let params: Vec<_> = model.parameters().iter().map(|p| g.constant(p.clone())).collect();
    let x = g.constant(images.clone());
    let t = g.constant(texture.clone());
    let logits = network(&mut g, model.config(), &params, x, t, Mode::Eval, &mut NoRng)?;
    let (loss, _) = g.softmax_cross_entropy(logits, targets)?;
    Ok(g.value(loss).data()[0].into())
}

/// One optimizer step on a batch. Returns the loss before the update; if
/// that loss is not finite the parameters are left untouched.
pub fn train_step<R: Rng + ?Sized>(
    model: &mut LodgedNetModel,
    adam: &mut AdamState<f32>,
    images: &Tensor<f32>,
    texture: &Tensor<f32>,
    targets: &[usize],
    mode: Mode,
    rng: &mut R,
) -> Result<f64> {
    let mut g = Graph::new();
    let params = model.param_vars(&mut g);
    let x = g.constant(images.clone());
    let t = g.constant(texture.clone());
    let logits = network(&mut g, model.config(), &params, x, t, mode, rng)?;
    let (loss_var, _) = g.softmax_cross_entropy(logits, targets)?;
    let loss = f64::from(g.value(loss_var).data()[0]);
    if !loss.is_finite() {
        return Ok(loss);
    }
    g.backward(loss_var)?;
    let grads: Vec<Vec<f32>> = params
        .iter()
        .zip(model.parameters())
        .map(|(&v, p)| g.take_grad(v).unwrap_or_else(|| vec![0.0; p.len()]))
        .collect();
    adam_step(model.parameters_mut(), &grads, adam)?;
    Ok(loss)
}

/// A training plot: its 64×128 crop, class index and the texture vector of
/// each flip state (texture is computed after flipping, so it is cached per
/// state rather than recomputed every epoch).
struct TrainItem {
    crop: MultiChannelImage,
    target: usize,
    textures: Vec<Vec<f32>>,
}

fn crops(dataset: &Dataset, indices: &[usize]) -> Vec<MultiChannelImage> {
    indices
        .par_iter()
        .map(|&i| resize_center_crop(&dataset.images[i], TARGET_HEIGHT, TARGET_WIDTH))
        .collect()
}

/// Trains `model` on the `train` split and selects the epoch with the best
/// `val` accuracy (ties keep the earlier epoch).
///
/// Normalization statistics and VAR edges are fitted on the train and val
/// crops before the first epoch and stored in the model. Each epoch draws
/// its shuffle, flips and dropout masks from stream `epoch` of `seed`.
pub fn train(mut model: LodgedNetModel, dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.manifest.channel_count() != model.config().channels {
        return Err(Error::Input(format!(
            "dataset has {} channels, model expects {}",
            dataset.manifest.channel_count(),
            model.config().channels
        )));
    }
    let train_idx = dataset.indices(Split::Train);
    let val_idx = dataset.indices(Split::Val);
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::Data(format!(
            "training needs non-empty train and val splits (got {} and {})",
            train_idx.len(),
            val_idx.len()
        )));
    }

    let train_crops = crops(dataset, &train_idx);
    let val_crops = crops(dataset, &val_idx);
    let fitting: Vec<MultiChannelImage> = train_crops.iter().chain(&val_crops).cloned().collect();
    model.set_stats(fit_normalization(&fitting)?)?;
    drop(fitting);

    let items = train_crops
        .into_par_iter()
        .zip(train_idx.par_iter())
        .map(|(crop, &i)| {
            let textures = FlipState::ALL
                .iter()
                .map(|f| model.texture_features(&f.apply(&crop)))
                .collect::<Result<Vec<_>>>()?;
            Ok(TrainItem {
                target: dataset.manifest.records()[i].label.index(),
                crop,
                textures,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let val_samples = val_crops
        .par_iter()
        .map(|c| model.prepare_cropped(c))
        .collect::<Result<Vec<_>>>()?;
    let val_targets: Vec<usize> = val_idx
        .iter()
        .map(|&i| dataset.manifest.records()[i].label.index())
        .collect();

    let mut adam = AdamState::new(config.adam, model.parameters())?;
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, Vec<Tensor<f32>>)> = None;
    let mut order: Vec<usize> = (0..items.len()).collect();

    for epoch in 1..=config.epochs {
        let mut rng = sample_rng(config.seed, epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            let samples: Vec<PreparedSample> = chunk
                .iter()
                .map(|&k| {
                    let item = &items[k];
                    let flip = FlipState::sample(&mut rng);
                    Ok(PreparedSample {
                        pixels: model.stats().normalize(&flip.apply(&item.crop))?,
                        texture: item.textures[flip.index()].clone(),
                    })
                })
                .collect::<Result<_>>()?;
            let refs: Vec<&PreparedSample> = samples.iter().collect();
            let (images, texture) = stack(model.config(), &refs)?;
            let targets: Vec<usize> = chunk.iter().map(|&k| items[k].target).collect();
            let loss = train_step(
                &mut model,
                &mut adam,
                &images,
                &texture,
                &targets,
                Mode::Train,
                &mut rng,
            )?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch + 1,
                    loss,
                });
            }
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / items.len() as f64;

        let refs: Vec<&PreparedSample> = val_samples.iter().collect();
        let predictions = model.predict_prepared(&refs)?;
        let correct = predictions
            .iter()
            .zip(&val_targets)
            .filter(|(p, &t)| p.label.index() == t)
            .count();
        let val_accuracy = correct as f64 / val_targets.len() as f64;
        log::info!("epoch {epoch:>3}: train_loss {train_loss:.5} val_accuracy {val_accuracy:.4}");
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_accuracy,
        });
        if best.as_ref().is_none_or(|(_, acc, _)| val_accuracy > *acc) {
            best = Some((epoch, val_accuracy, model.parameters().to_vec()));
        }
    }

    let (best_epoch, _, params) = best.expect("at least one epoch ran");
    model.set_parameters(params)?;
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}

#[cfg(test)]
mod tests;
