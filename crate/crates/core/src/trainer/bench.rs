use std::fmt;
use std::time::Instant;

use crate::datapipe::{resize_center_crop, TARGET_HEIGHT, TARGET_WIDTH};
use crate::error::{Error, Result};
use crate::model::{LodgedNetModel, PreparedSample};
use crate::raster::MultiChannelImage;

pub const BENCH_WARMUP: usize = 5;
pub const MIN_TRIALS: usize = 30;

/// Mean and sample standard deviation of a set of latencies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Timing {
    pub mean_ms: f64,
    pub std_ms: f64,
}

impl Timing {
    fn from_samples(ms: &[f64]) -> Self {
        let n = ms.len() as f64;
        let mean_ms = ms.iter().sum::<f64>() / n;
        let var = ms.iter().map(|v| (v - mean_ms).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Self {
            mean_ms,
            std_ms: var.sqrt(),
        }
    }
}

impl fmt::Display for Timing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ± {:.3} ms", self.mean_ms, self.std_ms)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    /// Normalization plus the eval-mode network pass.
    pub forward: Timing,
    /// GLCM and LBP feature extraction on the crop.
    pub texture: Timing,
    /// The whole single-sample predict path, resize included.
    pub total: Timing,
    pub n_trials: usize,
    pub warmup: usize,
    pub hardware_note: String,
}

fn hardware_note() -> String {
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "CPU, {cpus} logical core(s) available, {} worker thread(s), f32 inference. \
         GPU latency figures reported elsewhere are hardware-specific and are not a target \
         for this build.",
        rayon::current_num_threads()
    )
}

/// Times single-sample prediction of `image` over `n_trials` runs after
/// [`BENCH_WARMUP`] untimed runs.
pub fn benchmark(model: &LodgedNetModel, image: &MultiChannelImage, n_trials: usize) -> Result<BenchReport> {
    if n_trials < MIN_TRIALS {
        return Err(Error::Parameter(format!(
            "need at least {MIN_TRIALS} trials, got {n_trials}"
        )));
    }
    let mut forward = Vec::with_capacity(n_trials);
    let mut texture = Vec::with_capacity(n_trials);
    let mut total = Vec::with_capacity(n_trials);
    let ms = |start: Instant| start.elapsed().as_secs_f64() * 1e3;
    for trial in 0..BENCH_WARMUP + n_trials {
        let start = Instant::now();
        let crop = resize_center_crop(image, TARGET_HEIGHT, TARGET_WIDTH);
        let texture_start = Instant::now();
        let features = model.texture_features(&crop)?;
        let texture_ms = ms(texture_start);
        let forward_start = Instant::now();
        let sample = PreparedSample {
            pixels: model.stats().normalize(&crop)?,
            texture: features,
        };
        let prediction = model.predict_prepared(&[&sample])?;
        let forward_ms = ms(forward_start);
        let total_ms = ms(start);
        std::hint::black_box(prediction);
        if trial >= BENCH_WARMUP {
            forward.push(forward_ms);
            texture.push(texture_ms);
            total.push(total_ms);
        }
    }
    Ok(BenchReport {
        forward: Timing::from_samples(&forward),
        texture: Timing::from_samples(&texture),
        total: Timing::from_samples(&total),
        n_trials,
        warmup: BENCH_WARMUP,
        hardware_note: hardware_note(),
    })
}
