//! Handcrafted texture descriptors.
//!
//! Per channel the feature vector holds 16 GLCM contrasts (distance-major
//! over 1, 2, 4, 5 px, then angle over 0°, 90°, 135°, 180°), a 10-bin riu2
//! LBP histogram and a 16-bin histogram of local ring variance. Channels are
//! concatenated in order, giving 42 values per channel.

mod glcm;
mod lbp;

pub use glcm::{
    glcm, glcm_contrast, glcm_counts, glcm_offset, CooccurrenceMatrix, GLCM_ANGLES, GLCM_DISTANCES, LEVELS,
};
pub use lbp::{
    lbp_codes, lbp_histogram, lbp_variance_map, ring_variance, riu2_code, LbpCodes, VarianceMap, LBP_BINS, LBP_POINTS,
    NON_UNIFORM,
};

use crate::error::{Error, Result};
use crate::raster::{GrayChannel, MultiChannelImage};

pub const GLCM_FEATURES: usize = GLCM_DISTANCES.len() * GLCM_ANGLES.len();
pub const VAR_BINS: usize = 16;
pub const FEATURES_PER_CHANNEL: usize = GLCM_FEATURES + LBP_BINS + VAR_BINS;
/// Smallest channel side for which every GLCM offset has pairs.
pub const MIN_CHANNEL_SIZE: usize = 6;

/// The 17 edges of the variance histogram. Values below the first edge fall
/// in bin 0, values at or above the last edge in bin 15.
#[derive(Clone, Debug, PartialEq)]
pub struct VarBinEdges {
    edges: [f64; VAR_BINS + 1],
}

impl VarBinEdges {
    pub fn new(edges: &[f64]) -> Result<Self> {
        let edges: [f64; VAR_BINS + 1] = edges
            .try_into()
            .map_err(|_| Error::Parameter(format!("need {} VAR edges, got {}", VAR_BINS + 1, edges.len())))?;
        if edges[0] != 0.0 {
            return Err(Error::Parameter(format!("first VAR edge must be 0, got {}", edges[0])));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter(format!(
                "VAR edges must be strictly increasing: {edges:?}"
            )));
        }
        Ok(Self { edges })
    }

    /// Equal-frequency edges: edge k sits at the value of rank ⌊k·n/16⌋.
    /// Edges are rounded to `f32` (the model file precision) and nudged
    /// upward where ties would break strict monotonicity.
    pub fn from_quantiles(values: &mut [f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Data("cannot fit VAR edges on an empty sample".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Numeric(
                "VAR sample contains negative or non-finite values".into(),
            ));
        }
        values.sort_unstable_by(f64::total_cmp);
        let n = values.len();
        let mut edges = [0.0f64; VAR_BINS + 1];
        let mut previous = 0.0f32;
        for (k, edge) in edges.iter_mut().enumerate().skip(1) {
            let rank = if k == VAR_BINS {
                n - 1
            } else {
                (k * n / VAR_BINS).min(n - 1)
            };
            let mut e = values[rank] as f32;
            if e <= previous {
                e = next_up(previous);
            }
            *edge = f64::from(e);
            previous = e;
        }
        Self::new(&edges)
    }

    pub fn edges(&self) -> &[f64; VAR_BINS + 1] {
        &self.edges
    }

    pub fn bin(&self, value: f64) -> usize {
        let above = self.edges.partition_point(|&e| e <= value);
        above.saturating_sub(1).min(VAR_BINS - 1)
    }
}

fn next_up(x: f32) -> f32 {
    debug_assert!(x.is_finite() && x >= 0.0);
    f32::from_bits(x.to_bits() + 1)
}

/// Normalized 16-bin histogram of a variance map.
pub fn var_histogram(map: &VarianceMap, edges: &VarBinEdges) -> Result<[f64; VAR_BINS]> {
    if map.values.is_empty() {
        return Err(Error::EmptyHistogram("variance map is empty".into()));
    }
    let mut counts = [0usize; VAR_BINS];
    for &v in &map.values {
        counts[edges.bin(v)] += 1;
    }
    let total = map.values.len() as f64;
    Ok(counts.map(|c| c as f64 / total))
}

/// 42·C texture features, channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TextureFeatureVector {
    values: Vec<f64>,
}

impl TextureFeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c * FEATURES_PER_CHANNEL..(c + 1) * FEATURES_PER_CHANNEL]
    }
}

/// The 42 features of one channel.
pub fn channel_features(channel: &GrayChannel, edges: &VarBinEdges) -> Result<Vec<f64>> {
    if channel.width() < MIN_CHANNEL_SIZE || channel.height() < MIN_CHANNEL_SIZE {
        return Err(Error::dim(
            "size",
            format!(
                "texture features need at least {MIN_CHANNEL_SIZE}×{MIN_CHANNEL_SIZE} pixels, got {}×{}",
                channel.height(),
                channel.width()
            ),
        ));
    }
    let mut out = Vec::with_capacity(FEATURES_PER_CHANNEL);
    for &d in &GLCM_DISTANCES {
        for &a in &GLCM_ANGLES {
            out.push(glcm_contrast(&glcm(channel, d, a)?)?);
        }
    }
    out.extend(lbp_histogram(&lbp_codes(channel)?)?);
    out.extend(var_histogram(&lbp_variance_map(channel)?, edges)?);
    Ok(out)
}

pub fn extract_features(image: &MultiChannelImage, edges: &VarBinEdges) -> Result<TextureFeatureVector> {
    let mut values = Vec::with_capacity(FEATURES_PER_CHANNEL * image.channel_count());
    for channel in image.channels() {
        values.extend(channel_features(channel, edges)?);
    }
    Ok(TextureFeatureVector { values })
}
