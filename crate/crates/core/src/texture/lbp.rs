//! Rotation-invariant uniform local binary patterns (8 neighbors, radius 1)
//! and the local variance of the same neighbor ring.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::raster::GrayChannel;

/// Neighbors on the sampling circle.
pub const LBP_POINTS: usize = 8;
/// Uniform codes 0..=8 plus one non-uniform bin.
pub const LBP_BINS: usize = LBP_POINTS + 2;
/// Code given to patterns with more than two circular transitions.
pub const NON_UNIFORM: u8 = LBP_POINTS as u8 + 1;

/// Maps an 8-bit pattern to its riu2 code.
pub fn riu2_code(pattern: u8) -> u8 {
    let transitions = (pattern ^ pattern.rotate_right(1)).count_ones();
    if transitions <= 2 {
        pattern.count_ones() as u8
    } else {
        NON_UNIFORM
    }
}

/// Gray values on the radius-1 circle around `(row, col)`, neighbor `k` at
/// angle `2πk/8` (k = 0 east, k = 2 north). Diagonal samples are bilinearly
/// interpolated; the caller guarantees `(row, col)` is not on the border.
#[inline]
pub(crate) fn ring_samples(channel: &GrayChannel, row: usize, col: usize) -> [f64; LBP_POINTS] {
    let px = |r: usize, c: usize| f64::from(channel.get(r, c));
    let center = px(row, col);
    let (n, s, e, w) = (px(row - 1, col), px(row + 1, col), px(row, col + 1), px(row, col - 1));
    // Bilinear value at (±t, ±t): written so that both axis neighbors enter
    // symmetrically and a flat block interpolates to exactly the center.
    let diagonal = |axis_a: f64, axis_b: f64, corner: f64| {
        const T: f64 = FRAC_1_SQRT_2;
        const T2: f64 = FRAC_1_SQRT_2 * FRAC_1_SQRT_2;
        center + T * (axis_a + axis_b - 2.0 * center) + T2 * (corner - axis_a - axis_b + center)
    };
    [
        e,
        diagonal(n, e, px(row - 1, col + 1)),
        n,
        diagonal(n, w, px(row - 1, col - 1)),
        w,
        diagonal(s, w, px(row + 1, col - 1)),
        s,
        diagonal(s, e, px(row + 1, col + 1)),
    ]
}

fn check_interior(channel: &GrayChannel) -> Result<()> {
    if channel.width() < 3 || channel.height() < 3 {
        return Err(Error::dim(
            "size",
            format!(
                "LBP needs at least 3×3 pixels, got {}×{}",
                channel.height(),
                channel.width()
            ),
        ));
    }
    Ok(())
}

/// riu2 codes over the interior (one-pixel border excluded).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LbpCodes {
    pub width: usize,
    pub height: usize,
    pub codes: Vec<u8>,
}

pub fn lbp_codes(channel: &GrayChannel) -> Result<LbpCodes> {
    check_interior(channel)?;
    let (h, w) = (channel.height(), channel.width());
    let mut codes = Vec::with_capacity((h - 2) * (w - 2));
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            let center = f64::from(channel.get(r, c));
            let pattern = ring_samples(channel, r, c)
                .iter()
                .enumerate()
                .fold(0u8, |acc, (k, &g)| acc | (u8::from(g >= center) << k));
            codes.push(riu2_code(pattern));
        }
    }
    Ok(LbpCodes {
        width: w - 2,
        height: h - 2,
        codes,
    })
}

/// Fraction of interior pixels carrying each riu2 code.
pub fn lbp_histogram(codes: &LbpCodes) -> Result<[f64; LBP_BINS]> {
    if codes.codes.is_empty() {
        return Err(Error::EmptyHistogram("no interior LBP codes".into()));
    }
    let mut counts = [0usize; LBP_BINS];
    for &code in &codes.codes {
        counts[code as usize] += 1;
    }
    let total = codes.codes.len() as f64;
    Ok(counts.map(|c| c as f64 / total))
}

/// Population variance of the neighbor ring over the interior.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

/// `(1/8)·Σ(g_k − μ)²` of the ring samples.
pub fn ring_variance(samples: &[f64; LBP_POINTS]) -> f64 {
    let mean = samples.iter().sum::<f64>() / LBP_POINTS as f64;
    samples.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / LBP_POINTS as f64
}

pub fn lbp_variance_map(channel: &GrayChannel) -> Result<VarianceMap> {
    check_interior(channel)?;
    let (h, w) = (channel.height(), channel.width());
    let mut values = Vec::with_capacity((h - 2) * (w - 2));
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            values.push(ring_variance(&ring_samples(channel, r, c)));
        }
    }
    Ok(VarianceMap {
        width: w - 2,
        height: h - 2,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riu2_mapping() {
        assert_eq!(riu2_code(0b0000_0000), 0);
        assert_eq!(riu2_code(0b1111_1111), 8);
        assert_eq!(riu2_code(0b0001_1100), 3);
        assert_eq!(riu2_code(0b1000_0011), 3);
        assert_eq!(riu2_code(0b0101_0000), NON_UNIFORM);
        let distinct: std::collections::BTreeSet<u8> = (0..=255u8).map(riu2_code).collect();
        assert_eq!(distinct.len(), LBP_BINS);
    }

    #[test]
    fn constant_image_codes_are_eight() {
        let c = GrayChannel::filled(6, 5, 93).unwrap();
        let codes = lbp_codes(&c).unwrap();
        assert_eq!((codes.width, codes.height), (4, 3));
        assert!(codes.codes.iter().all(|&k| k == 8));
        let hist = lbp_histogram(&codes).unwrap();
        assert_eq!(hist[8], 1.0);
        let var = lbp_variance_map(&c).unwrap();
        assert!(var.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bright_isolated_center_is_code_zero() {
        let c = GrayChannel::from_fn(3, 3, |r, col| if (r, col) == (1, 1) { 200 } else { 10 }).unwrap();
        assert_eq!(lbp_codes(&c).unwrap().codes, vec![0]);
    }

    #[test]
    fn balanced_ring_variance() {
        let ring = [0.0, 255.0, 0.0, 255.0, 0.0, 255.0, 0.0, 255.0];
        assert_eq!(ring_variance(&ring), 16256.25);
    }

    #[test]
    fn cross_pattern_variance_by_hand() {
        // Center 0, axis neighbors 255, corners 0. Each diagonal sample is
        // t(255+255) + t²(0 − 510) = 510·(t − t²) with t = 1/√2.
        let c = GrayChannel::from_fn(3, 3, |r, col| if (r + col) % 2 == 1 { 255 } else { 0 }).unwrap();
        let t = FRAC_1_SQRT_2;
        let diag = 510.0 * (t - t * t);
        let mean = (4.0 * 255.0 + 4.0 * diag) / 8.0;
        let expected = (4.0 * (255.0 - mean).powi(2) + 4.0 * (diag - mean).powi(2)) / 8.0;
        let got = lbp_variance_map(&c).unwrap().values[0];
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn too_small_is_dimension_error() {
        let c = GrayChannel::filled(2, 5, 0).unwrap();
        assert!(matches!(lbp_codes(&c), Err(Error::Dimension { .. })));
        assert!(matches!(lbp_variance_map(&c), Err(Error::Dimension { .. })));
    }
}
