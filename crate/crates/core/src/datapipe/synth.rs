//! Synthetic lodged / non-lodged plots for end-to-end runs.
//!
//! Non-lodged plots are isotropic speckle (upright canopy seen from above);
//! lodged plots carry strong oriented bands, like stems flattened in one
//! direction. Every sample draws from its own seeded stream.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::Rng;

use super::dataset::Dataset;
use super::manifest::{DatasetManifest, Label, ManifestRecord, Split};
use super::sample_rng;
use crate::error::{Error, Result};
use crate::raster::{GrayChannel, MultiChannelImage};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_per_class: usize,
    pub channels: usize,
    pub plot_height: usize,
    pub plot_width: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_per_class: 200,
            channels: 3,
            plot_height: 60,
            plot_width: 100,
            seed: 7,
        }
    }
}

const CHANNEL_BASE: [f64; 5] = [95.0, 120.0, 80.0, 140.0, 110.0];

fn clamp_level(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn speckle_plot<R: Rng>(rng: &mut R, cfg: &SynthConfig, brightness: f64) -> Result<MultiChannelImage> {
    let (h, w) = (cfg.plot_height, cfg.plot_width);
    // Shared canopy structure, rendered per band with its own gain.
    let structure: Vec<f64> = (0..h * w)
        .map(|_| {
            let noise = rng.gen_range(-14.0..14.0);
            let leaf = if rng.gen_bool(0.05) { 35.0 } else { 0.0 };
            noise + leaf
        })
        .collect();
    let channels = (0..cfg.channels)
        .map(|c| {
            let base = CHANNEL_BASE[c % CHANNEL_BASE.len()] + brightness;
            let gain = 1.0 - 0.1 * (c % 4) as f64;
            GrayChannel::new(w, h, structure.iter().map(|s| clamp_level(base + gain * s)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    MultiChannelImage::new(channels)
}

fn streak_plot<R: Rng>(rng: &mut R, cfg: &SynthConfig, brightness: f64) -> Result<MultiChannelImage> {
    let (h, w) = (cfg.plot_height, cfg.plot_width);
    let normal = rng.gen_range(-35.0f64..35.0).to_radians();
    let period = rng.gen_range(4.5..7.0);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let (kr, kc) = (2.0 * PI * normal.sin() / period, 2.0 * PI * normal.cos() / period);
    let mut structure = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let band = 55.0 * (kr * r as f64 + kc * c as f64 + phase).sin();
            structure.push(band + rng.gen_range(-6.0..6.0));
        }
    }
    let channels = (0..cfg.channels)
        .map(|c| {
            let base = CHANNEL_BASE[c % CHANNEL_BASE.len()] + brightness;
            let gain = 1.0 - 0.1 * (c % 4) as f64;
            GrayChannel::new(w, h, structure.iter().map(|s| clamp_level(base + gain * s)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    MultiChannelImage::new(channels)
}

/// `n_per_class` non-lodged plots followed by `n_per_class` lodged plots,
/// all with split `unassigned`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.n_per_class == 0 {
        return Err(Error::Parameter("n_per_class must be at least 1".into()));
    }
    if cfg.channels == 0 {
        return Err(Error::Parameter("channel count must be at least 1".into()));
    }
    if cfg.plot_height < 6 || cfg.plot_width < 6 {
        return Err(Error::Parameter(format!(
            "plots must be at least 6×6, got {}×{}",
            cfg.plot_height, cfg.plot_width
        )));
    }
    let total = 2 * cfg.n_per_class;
    let mut records = Vec::with_capacity(total);
    let mut images = Vec::with_capacity(total);
    for i in 0..total {
        let label = if i < cfg.n_per_class {
            Label::NonLodged
        } else {
            Label::Lodged
        };
        let mut rng = sample_rng(cfg.seed, i as u64);
        let brightness = rng.gen_range(-15.0..15.0);
        let image = match label {
            Label::NonLodged => speckle_plot(&mut rng, cfg, brightness)?,
            Label::Lodged => streak_plot(&mut rng, cfg, brightness)?,
        };
        let sample_id = format!("plot_{i:05}");
        records.push(ManifestRecord {
            channel_paths: (0..cfg.channels)
                .map(|c| PathBuf::from(format!("{sample_id}_c{c}.pgm")))
                .collect(),
            sample_id,
            label,
            split: Split::Unassigned,
        });
        images.push(image);
    }
    Dataset::new(DatasetManifest::new(cfg.channels, records)?, images)
}
