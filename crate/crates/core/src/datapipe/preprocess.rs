//! Geometry, augmentation and intensity normalization.

use rand::Rng;

use crate::error::{Error, Result};
use crate::raster::{GrayChannel, MultiChannelImage};
use crate::texture::{lbp_variance_map, VarBinEdges, VAR_BINS};

pub const TARGET_HEIGHT: usize = 64;
pub const TARGET_WIDTH: usize = 128;
pub const FLIP_PROBABILITY: f64 = 0.5;
/// Lower bound applied to fitted channel standard deviations.
pub const STD_FLOOR: f32 = 1e-6;

/// Size after aspect-preserving scaling so both sides cover the target:
/// `s = max(th/h, tw/w)`, sides `round(s·h) × round(s·w)`.
pub fn resized_dims(height: usize, width: usize, target_height: usize, target_width: usize) -> (usize, usize) {
    let s = (target_height as f64 / height as f64).max(target_width as f64 / width as f64);
    let h = ((s * height as f64).round() as usize).max(target_height);
    let w = ((s * width as f64).round() as usize).max(target_width);
    (h, w)
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
pub fn resize_bilinear(channel: &GrayChannel, height: usize, width: usize) -> GrayChannel {
    let (sh, sw) = (channel.height(), channel.width());
    let axis = |dst: usize, src_len: usize, dst_len: usize| -> (usize, usize, f64) {
        let scale = src_len as f64 / dst_len as f64;
        let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(src_len - 1);
        (lo, hi, pos - lo as f64)
    };
    let cols: Vec<_> = (0..width).map(|x| axis(x, sw, width)).collect();
    let mut levels = Vec::with_capacity(height * width);
    for y in 0..height {
        let (y0, y1, fy) = axis(y, sh, height);
        for &(x0, x1, fx) in &cols {
            let p = |r, c| f64::from(channel.get(r, c));
            let top = p(y0, x0) + fx * (p(y0, x1) - p(y0, x0));
            let bottom = p(y1, x0) + fx * (p(y1, x1) - p(y1, x0));
            let v = top + fy * (bottom - top);
            levels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayChannel::new(width, height, levels).expect("resize keeps sizes consistent")
}

/// Aspect-preserving resize followed by a center crop to the target size.
/// When the margin is odd the extra pixel is removed from the bottom/right.
pub fn resize_center_crop(image: &MultiChannelImage, target_height: usize, target_width: usize) -> MultiChannelImage {
    let (rh, rw) = resized_dims(image.height(), image.width(), target_height, target_width);
    let top = (rh - target_height) / 2;
    let left = (rw - target_width) / 2;
    image.map_channels(|c| {
        let resized = if (rh, rw) == (c.height(), c.width()) {
            c.clone()
        } else {
            resize_bilinear(c, rh, rw)
        };
        resized
            .crop(top, left, target_height, target_width)
            .expect("resized image covers the target")
    })
}

/// Which flips an augmentation applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct FlipState {
    pub horizontal: bool,
    pub vertical: bool,
}

impl FlipState {
    pub const ALL: [FlipState; 4] = [
        FlipState {
            horizontal: false,
            vertical: false,
        },
        FlipState {
            horizontal: true,
            vertical: false,
        },
        FlipState {
            horizontal: false,
            vertical: true,
        },
        FlipState {
            horizontal: true,
            vertical: true,
        },
    ];

    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let horizontal = rng.gen_bool(FLIP_PROBABILITY);
        let vertical = rng.gen_bool(FLIP_PROBABILITY);
        Self { horizontal, vertical }
    }

    /// Position in [`FlipState::ALL`].
    pub fn index(self) -> usize {
        usize::from(self.horizontal) + 2 * usize::from(self.vertical)
    }

    pub fn apply(self, image: &MultiChannelImage) -> MultiChannelImage {
        let mut out = image.clone();
        if self.horizontal {
            out = out.flip_horizontal();
        }
        if self.vertical {
            out = out.flip_vertical();
        }
        out
    }
}

/// Training-time augmentation: horizontal and vertical flips, each with
/// probability 0.5.
pub fn augment_flips<R: Rng + ?Sized>(image: &MultiChannelImage, rng: &mut R) -> (MultiChannelImage, FlipState) {
    let state = FlipState::sample(rng);
    (state.apply(image), state)
}

/// Frozen preprocessing statistics carried by a model.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizationStats {
    /// Per-channel mean of unit-scaled intensities.
    pub channel_means: Vec<f32>,
    /// Per-channel standard deviation, floored at [`STD_FLOOR`].
    pub channel_stds: Vec<f32>,
    pub var_edges: VarBinEdges,
}

impl NormalizationStats {
    /// Placeholder used before fitting: zero means, unit stds and
    /// VAR edges at 0, 1, …, 16.
    pub fn identity(channels: usize) -> Self {
        let edges: Vec<f64> = (0..=VAR_BINS).map(|k| k as f64).collect();
        Self {
            channel_means: vec![0.0; channels],
            channel_stds: vec![1.0; channels],
            var_edges: VarBinEdges::new(&edges).expect("integer edges are valid"),
        }
    }

    pub fn channel_count(&self) -> usize {
        self.channel_means.len()
    }

    /// `[C, H, W]` network input: `(v/255 − mean) / std` per channel.
    pub fn normalize(&self, image: &MultiChannelImage) -> Result<Vec<f32>> {
        if image.channel_count() != self.channel_count() {
            return Err(Error::Input(format!(
                "image has {} channels, statistics cover {}",
                image.channel_count(),
                self.channel_count()
            )));
        }
        let mut out = Vec::with_capacity(image.channel_count() * image.width() * image.height());
        for ((c, &mean), &std) in image.channels().iter().zip(&self.channel_means).zip(&self.channel_stds) {
            out.extend(c.levels().iter().map(|&v| (f32::from(v) / 255.0 - mean) / std));
        }
        Ok(out)
    }
}

/// Fits channel means/stds and VAR histogram edges on the given images,
/// which must all have the same channel count.
pub fn fit_normalization(images: &[MultiChannelImage]) -> Result<NormalizationStats> {
    let Some(first) = images.first() else {
        return Err(Error::Data("cannot fit normalization on zero images".into()));
    };
    let channels = first.channel_count();
    if let Some(bad) = images.iter().find(|i| i.channel_count() != channels) {
        return Err(Error::Data(format!(
            "mixed channel counts: {channels} and {}",
            bad.channel_count()
        )));
    }

    let mut means = Vec::with_capacity(channels);
    let mut stds = Vec::with_capacity(channels);
    for c in 0..channels {
        let pixels = || {
            images
                .iter()
                .flat_map(|i| i.channels()[c].levels().iter())
                .map(|&v| f64::from(v) / 255.0)
        };
        let n = images.iter().map(|i| i.channels()[c].levels().len()).sum::<usize>() as f64;
        let mean = pixels().sum::<f64>() / n;
        let var = pixels().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        means.push(mean as f32);
        stds.push((var.sqrt() as f32).max(STD_FLOOR));
    }

    let mut var_values = Vec::new();
    for image in images {
        for channel in image.channels() {
            var_values.extend(lbp_variance_map(channel)?.values);
        }
    }
    let var_edges = VarBinEdges::from_quantiles(&mut var_values)?;
    Ok(NormalizationStats {
        channel_means: means,
        channel_stds: stds,
        var_edges,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn image(h: usize, w: usize, seed: u64) -> MultiChannelImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MultiChannelImage::new(vec![GrayChannel::from_fn(w, h, |_, _| rng.gen()).unwrap()]).unwrap()
    }

    #[test]
    fn plot_sizes_resize_as_expected() {
        assert_eq!(resized_dims(60, 100, 64, 128), (77, 128));
        assert_eq!(resized_dims(118, 348, 64, 128), (64, 189));
        assert_eq!(resized_dims(64, 128, 64, 128), (64, 128));
        for (h, w) in [(60, 100), (118, 348), (1, 1), (3, 500), (500, 3)] {
            let out = resize_center_crop(&image(h, w, 1), 64, 128);
            assert_eq!((out.height(), out.width()), (64, 128));
        }
    }

    #[test]
    fn target_sized_input_is_unchanged() {
        let img = image(64, 128, 5);
        assert_eq!(resize_center_crop(&img, 64, 128), img);
        let c = &img.channels()[0];
        assert_eq!(&resize_bilinear(c, 64, 128), c);
    }

    #[test]
    fn odd_margin_extra_pixel_goes_bottom() {
        // 77 rows → crop 64 starting at row 6, dropping 6 on top and 7 below.
        let c = GrayChannel::from_fn(128, 77, |r, _| r as u8).unwrap();
        let img = MultiChannelImage::new(vec![c]).unwrap();
        let out = resize_center_crop(&img, 64, 128);
        assert_eq!(out.channels()[0].get(0, 0), 6);
        assert_eq!(out.channels()[0].get(63, 0), 69);
    }

    #[test]
    fn flips_are_involutions_and_seeded() {
        let img = image(8, 10, 2);
        assert_eq!(img.flip_horizontal().flip_horizontal(), img);
        let draws = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| augment_flips(&img, &mut rng).1).collect::<Vec<_>>()
        };
        assert_eq!(draws(11), draws(11));
    }

    #[test]
    fn flip_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 10_000;
        let (mut h, mut v) = (0, 0);
        for _ in 0..n {
            let s = FlipState::sample(&mut rng);
            h += usize::from(s.horizontal);
            v += usize::from(s.vertical);
        }
        for count in [h, v] {
            let f = count as f64 / n as f64;
            assert!((f - 0.5).abs() <= 0.02, "flip frequency {f}");
        }
    }

    #[test]
    fn constant_channel_stats() {
        let c = GrayChannel::filled(10, 10, 128).unwrap();
        let img = MultiChannelImage::new(vec![c]).unwrap();
        let stats = fit_normalization(&[img]).unwrap();
        assert!((stats.channel_means[0] - 128.0 / 255.0).abs() < 1e-7);
        assert_eq!(stats.channel_stds[0], STD_FLOOR);
    }

    #[test]
    fn normalization_standardizes_fitting_set() {
        let imgs: Vec<_> = (0..4).map(|s| image(12, 16, s)).collect();
        let stats = fit_normalization(&imgs).unwrap();
        let all: Vec<f64> = imgs
            .iter()
            .flat_map(|i| stats.normalize(i).unwrap())
            .map(f64::from)
            .collect();
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let std = (all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-5, "mean {mean}");
        assert!((std - 1.0).abs() < 1e-5, "std {std}");
    }

    #[test]
    fn empty_fit_is_data_error() {
        assert!(matches!(fit_normalization(&[]), Err(Error::Data(_))));
    }
}
