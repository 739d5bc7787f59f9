//! The LodgedNet classifier: a seven-layer convolutional branch whose
//! flattened output is joined with the handcrafted texture vector and fed to
//! a 128-unit hidden layer and a two-way softmax.

mod format;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use format::{FORMAT_VERSION, HEADER_LEN, MAGIC};

use crate::datapipe::{resize_center_crop, Label, NormalizationStats, TARGET_HEIGHT, TARGET_WIDTH};
use crate::error::{Error, Result};
use crate::raster::MultiChannelImage;
use crate::tensor::{softmax_rows, Element, Graph, Mode, Tensor, Var};
use crate::texture::{extract_features, FEATURES_PER_CHANNEL, GLCM_FEATURES, LEVELS};

pub const CONV_LAYERS: usize = 7;
pub const DEFAULT_FILTERS: [usize; CONV_LAYERS] = [16, 16, 32, 32, 32, 32, 64];
/// Convolutions (0-based) followed by spatial dropout.
pub const SPATIAL_DROPOUT_AFTER: [usize; 5] = [1, 3, 4, 5, 6];
/// Convolutions (0-based) followed by 2×2 max pooling.
pub const POOL_AFTER: [usize; 4] = [1, 3, 5, 6];
pub const KERNEL_SIZE: usize = 3;
/// Largest possible GLCM contrast at 256 levels, `255²`. Contrasts are
/// divided by it on the way into the network so every texture input lies in
/// [0, 1].
pub const CONTRAST_SCALE: f64 = ((LEVELS - 1) * (LEVELS - 1)) as f64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LodgedNetConfig {
    pub channels: usize,
    pub conv_filters: [usize; CONV_LAYERS],
    pub hidden: usize,
    pub classes: usize,
    pub spatial_dropout_rate: f64,
    pub dropout_rate: f64,
}

impl Default for LodgedNetConfig {
    fn default() -> Self {
        Self::new(3)
    }
}

impl LodgedNetConfig {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            conv_filters: DEFAULT_FILTERS,
            hidden: 128,
            classes: 2,
            spatial_dropout_rate: 0.5,
            dropout_rate: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::Parameter("channel count must be at least 1".into()));
        }
        if self.conv_filters.contains(&0) || self.hidden == 0 {
            return Err(Error::Parameter(format!("layer widths must be positive: {self:?}")));
        }
        if self.classes != Label::ALL.len() {
            return Err(Error::Parameter(format!(
                "only {} classes are supported",
                Label::ALL.len()
            )));
        }
        for rate in [self.spatial_dropout_rate, self.dropout_rate] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::Parameter(format!("dropout rate {rate} outside [0, 1)")));
            }
        }
        Ok(())
    }

    pub fn texture_width(&self) -> usize {
        FEATURES_PER_CHANNEL * self.channels
    }

    /// Width of the flattened convolutional branch.
    pub fn flatten_width(&self) -> usize {
        let shrink = 1 << POOL_AFTER.len();
        self.conv_filters[CONV_LAYERS - 1] * (TARGET_HEIGHT / shrink) * (TARGET_WIDTH / shrink)
    }

    pub fn concat_width(&self) -> usize {
        self.flatten_width() + self.texture_width()
    }

    /// Shapes in storage order: conv1 w, conv1 b, …, conv7 b, dense1 w,
    /// dense1 b, dense2 w, dense2 b.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = Vec::with_capacity(2 * CONV_LAYERS + 4);
        let mut cin = self.channels;
        for &cout in &self.conv_filters {
            shapes.push(vec![cout, cin, KERNEL_SIZE, KERNEL_SIZE]);
            shapes.push(vec![cout]);
            cin = cout;
        }
        shapes.push(vec![self.hidden, self.concat_width()]);
        shapes.push(vec![self.hidden]);
        shapes.push(vec![self.classes, self.hidden]);
        shapes.push(vec![self.classes]);
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes().iter().map(|s| s.iter().product::<usize>()).sum()
    }
}

/// Closed-form parameter count of the default architecture with `channels`
/// input channels.
pub fn param_count_formula(channels: usize) -> usize {
    let mut conv = 0;
    let mut cin = channels;
    for &cout in &DEFAULT_FILTERS {
        conv += 9 * cin * cout + cout;
        cin = cout;
    }
    conv + (2048 + 42 * channels) * 128 + 128 + 2 * 128 + 2
}

/// Records the network on `g` and returns the `[N, classes]` logits.
///
/// `params` are graph nodes in [`LodgedNetConfig::param_shapes`] order,
/// `images` is `[N, C, 64, 128]` and `texture` is `[N, 42·C]`.
pub fn network<T: Element, R: Rng + ?Sized>(
    g: &mut Graph<T>,
    config: &LodgedNetConfig,
    params: &[Var],
    images: Var,
    texture: Var,
    mode: Mode,
    rng: &mut R,
) -> Result<Var> {
    if params.len() != 2 * CONV_LAYERS + 4 {
        return Err(Error::dim(
            "parameters",
            format!("expected {} tensors, got {}", 2 * CONV_LAYERS + 4, params.len()),
        ));
    }
    let x = g.value(images).shape();
    if x.len() != 4 || x[1..] != [config.channels, TARGET_HEIGHT, TARGET_WIDTH] {
        return Err(Error::dim(
            "images",
            format!(
                "expected [N,{},{TARGET_HEIGHT},{TARGET_WIDTH}], got {x:?}",
                config.channels
            ),
        ));
    }
    let t = g.value(texture).shape();
    if t != [x[0], config.texture_width()] {
        return Err(Error::dim(
            "texture",
            format!("expected [{}, {}], got {t:?}", x[0], config.texture_width()),
        ));
    }

    let mut h = images;
    for layer in 0..CONV_LAYERS {
        h = g.conv2d(h, params[2 * layer], params[2 * layer + 1])?;
        h = g.relu(h);
        if SPATIAL_DROPOUT_AFTER.contains(&layer) {
            h = g.spatial_dropout(h, config.spatial_dropout_rate, mode, rng)?;
        }
        if POOL_AFTER.contains(&layer) {
            h = g.maxpool2d(h)?;
        }
    }
    let flat = g.flatten(h);
    let joined = g.concat(flat, texture)?;
    let d = 2 * CONV_LAYERS;
    let h = g.dropout(joined, config.dropout_rate, mode, rng)?;
    let h = g.dense(h, params[d], params[d + 1])?;
    let h = g.relu(h);
    let h = g.dropout(h, config.dropout_rate, mode, rng)?;
    g.dense(h, params[d + 2], params[d + 3])
}

/// Row-wise softmax of `[N, classes]` logits.
pub fn probabilities(logits: &Tensor<f32>) -> Tensor<f32> {
    let k = logits.shape()[1];
    Tensor::new(logits.shape(), softmax_rows(logits.data(), k)).expect("softmax keeps the shape")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// Probability of `label`.
    pub probability: f32,
    pub probabilities: [f32; 2],
}

impl Prediction {
    fn from_row(row: &[f32]) -> Self {
        let probabilities = [row[0], row[1]];
        // Ties go to the lower class index.
        let index = usize::from(row[1] > row[0]);
        Self {
            label: Label::from_index(index).expect("binary output"),
            probability: probabilities[index],
            probabilities,
        }
    }
}

/// Network input for one plot: normalized `[C, 64, 128]` pixels and the
/// `42·C` texture vector, both derived from the same crop.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedSample {
    pub pixels: Vec<f32>,
    pub texture: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LodgedNetModel {
    config: LodgedNetConfig,
    params: Vec<Tensor<f32>>,
    stats: NormalizationStats,
    init_seed: u64,
}

impl LodgedNetModel {
    /// Fresh model. Every weight and bias is drawn from `U(±1/√fan_in)`
    /// of its layer, the stock initialisation of common deep-learning
    /// frameworks. Statistics start as [`NormalizationStats::identity`].
    pub fn build(config: LodgedNetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = config.param_shapes();
        let params = shapes
            .iter()
            .enumerate()
            .map(|(i, shape)| {
                // Biases share the fan-in of the weight stored before them.
                let weight_shape = &shapes[i - i % 2];
                let fan_in: usize = weight_shape[1..].iter().product();
                let bound = 1.0 / (fan_in as f32).sqrt();
                let n: usize = shape.iter().product();
                Tensor::new(shape, (0..n).map(|_| rng.gen_range(-bound..bound)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            stats: NormalizationStats::identity(config.channels),
            config,
            params,
            init_seed: seed,
        })
    }

    pub(crate) fn from_parts(
        config: LodgedNetConfig,
        params: Vec<Tensor<f32>>,
        stats: NormalizationStats,
    ) -> Result<Self> {
        config.validate()?;
        let mut model = Self {
            stats: NormalizationStats::identity(config.channels),
            params: Vec::new(),
            config,
            init_seed: 0,
        };
        model.set_parameters(params)?;
        model.set_stats(stats)?;
        Ok(model)
    }

    pub fn config(&self) -> &LodgedNetConfig {
        &self.config
    }

    pub fn parameters(&self) -> &[Tensor<f32>] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [Tensor<f32>] {
        &mut self.params
    }

    /// Replaces all parameters; shapes must match the configuration.
    pub fn set_parameters(&mut self, params: Vec<Tensor<f32>>) -> Result<()> {
        let expected = self.config.param_shapes();
        if params.len() != expected.len() || params.iter().zip(&expected).any(|(p, s)| p.shape() != s.as_slice()) {
            return Err(Error::dim(
                "parameters",
                "parameter shapes do not match the configuration",
            ));
        }
        self.params = params;
        Ok(())
    }

    pub fn stats(&self) -> &NormalizationStats {
        &self.stats
    }

    pub fn set_stats(&mut self, stats: NormalizationStats) -> Result<()> {
        if stats.channel_count() != self.config.channels || stats.channel_stds.len() != self.config.channels {
            return Err(Error::Input(format!(
                "statistics cover {} channels, model has {}",
                stats.channel_count(),
                self.config.channels
            )));
        }
        self.stats = stats;
        Ok(())
    }

    /// Seed the weights were initialised from (0 for loaded models).
    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Adds every parameter to `g` as a trainable leaf.
    pub fn param_vars<T: Element>(&self, g: &mut Graph<T>) -> Vec<Var> {
        self.params.iter().map(|p| g.param(&p.cast::<T>())).collect()
    }

    /// `[N, classes]` logits for a normalized image batch and its texture
    /// features.
    pub fn logits<R: Rng + ?Sized>(
        &self,
        images: &Tensor<f32>,
        texture: &Tensor<f32>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Tensor<f32>> {
        let mut g = Graph::new();
        let params: Vec<Var> = self.params.iter().map(|p| g.constant(p.clone())).collect();
        let x = g.constant(images.clone());
        let t = g.constant(texture.clone());
        let out = network(&mut g, &self.config, &params, x, t, mode, rng)?;
        Ok(g.value(out).clone())
    }

    /// Class probabilities, `[N, classes]`.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        images: &Tensor<f32>,
        texture: &Tensor<f32>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Tensor<f32>> {
        Ok(probabilities(&self.logits(images, texture, mode, rng)?))
    }

    /// Resize/crop, texture extraction and normalization for one raw plot.
    pub fn prepare(&self, image: &MultiChannelImage) -> Result<PreparedSample> {
        self.check_channels(image)?;
        let crop = resize_center_crop(image, TARGET_HEIGHT, TARGET_WIDTH);
        self.prepare_cropped(&crop)
    }

    /// Same as [`prepare`](Self::prepare) for an image already at 64×128.
    pub fn prepare_cropped(&self, crop: &MultiChannelImage) -> Result<PreparedSample> {
        self.check_channels(crop)?;
        if (crop.height(), crop.width()) != (TARGET_HEIGHT, TARGET_WIDTH) {
            return Err(Error::Input(format!(
                "expected a {TARGET_HEIGHT}×{TARGET_WIDTH} crop, got {}×{}",
                crop.height(),
                crop.width()
            )));
        }
        Ok(PreparedSample {
            pixels: self.stats.normalize(crop)?,
            texture: self.texture_features(crop)?,
        })
    }

    /// The `42·C` network texture input of a crop: the texture vector with
    /// every GLCM contrast divided by [`CONTRAST_SCALE`], using the model's
    /// VAR edges.
    pub fn texture_features(&self, crop: &MultiChannelImage) -> Result<Vec<f32>> {
        self.check_channels(crop)?;
        let texture = extract_features(crop, &self.stats.var_edges)?;
        Ok(texture
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let v = if i % FEATURES_PER_CHANNEL < GLCM_FEATURES {
                    v / CONTRAST_SCALE
                } else {
                    v
                };
                v as f32
            })
            .collect())
    }

    fn check_channels(&self, image: &MultiChannelImage) -> Result<()> {
        if image.channel_count() != self.config.channels {
            return Err(Error::Input(format!(
                "image has {} channels, model expects {}",
                image.channel_count(),
                self.config.channels
            )));
        }
        Ok(())
    }

    /// Eval-mode predictions for prepared samples.
    pub fn predict_prepared(&self, samples: &[&PreparedSample]) -> Result<Vec<Prediction>> {
        if samples.is_empty() {
            return Ok(Vec::new());
        }
        let (images, texture) = stack(&self.config, samples)?;
        let probs = self.forward(&images, &texture, Mode::Eval, &mut NoRng)?;
        Ok(probs
            .data()
            .chunks(self.config.classes)
            .map(Prediction::from_row)
            .collect())
    }

    /// End-to-end inference on a raw plot (no test-time augmentation).
    pub fn predict(&self, image: &MultiChannelImage) -> Result<Prediction> {
        let sample = self.prepare(image)?;
        Ok(self.predict_prepared(&[&sample])?[0])
    }
}

/// Stacks prepared samples into `[N,C,64,128]` and `[N,42·C]` tensors.
pub fn stack(config: &LodgedNetConfig, samples: &[&PreparedSample]) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let n = samples.len();
    let mut pixels = Vec::with_capacity(n * config.channels * TARGET_HEIGHT * TARGET_WIDTH);
    let mut texture = Vec::with_capacity(n * config.texture_width());
    for s in samples {
        pixels.extend_from_slice(&s.pixels);
        texture.extend_from_slice(&s.texture);
    }
    Ok((
        Tensor::new(&[n, config.channels, TARGET_HEIGHT, TARGET_WIDTH], pixels)?,
        Tensor::new(&[n, config.texture_width()], texture)?,
    ))
}

/// Eval mode never draws random numbers; this makes that explicit.
pub(crate) struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("eval-mode forward drew a random number")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("eval-mode forward drew a random number")
    }
    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("eval-mode forward drew a random number")
    }
    fn try_fill_bytes(&mut self, _: &mut [u8]) -> std::result::Result<(), rand::Error> {
        unreachable!("eval-mode forward drew a random number")
    }
}
