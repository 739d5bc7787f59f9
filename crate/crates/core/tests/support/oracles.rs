//! Brute-force references for the texture descriptors.

use lodgednet::raster::GrayChannel;
use lodgednet::texture::{glcm, glcm_contrast, glcm_counts, lbp_codes, lbp_variance_map, GLCM_ANGLES, GLCM_DISTANCES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ORACLE_IMAGES: usize = 100;
pub const ORACLE_SIZE: usize = 16;
pub const REAL_TOLERANCE: f64 = 1e-9;

pub fn random_channel(seed: u64, size: usize) -> GrayChannel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Mix full-range noise with flat patches so ties are exercised too.
    let flat = rng.gen_range(0..=255u8);
    GrayChannel::from_fn(
        size,
        size,
        |r, c| {
            if (r / 4 + c / 4) % 3 == 0 {
                flat
            } else {
                rng.gen()
            }
        },
    )
    .unwrap()
}

/// Neighbor offsets written out by hand: 135° at distance d steps
/// `round(d/√2)` up and left.
pub fn offset_table(distance: usize, angle: u32) -> (isize, isize) {
    let d = distance as isize;
    match angle {
        0 => (0, d),
        90 => (-d, 0),
        180 => (0, -d),
        135 => {
            let k = match distance {
                1 | 2 => 1,
                4 => 3,
                5 => 4,
                _ => unreachable!("distance outside the feature set"),
            };
            (-k, -k)
        }
        _ => unreachable!("angle outside the feature set"),
    }
}

/// Ordered-pair counts by visiting every pixel and testing its neighbor.
pub fn brute_glcm(channel: &GrayChannel, distance: usize, angle: u32) -> Vec<u64> {
    let (dr, dc) = offset_table(distance, angle);
    let (h, w) = (channel.height() as isize, channel.width() as isize);
    let mut counts = vec![0u64; 256 * 256];
    for r in 0..h {
        for c in 0..w {
            let (nr, nc) = (r + dr, c + dc);
            if (0..h).contains(&nr) && (0..w).contains(&nc) {
                let a = channel.get(r as usize, c as usize) as usize;
                let b = channel.get(nr as usize, nc as usize) as usize;
                counts[a * 256 + b] += 1;
            }
        }
    }
    counts
}

/// Whether the radius-1 sample at a diagonal is ≥ the center, decided in
/// integers. With `t = 1/√2` the bilinear sample minus the center is
/// `t·A + t²·B`, `A = a + b − 2c`, `B = d − a − b + c`; its sign is the sign
/// of `√2·A + B`, and `√2·A + B = 0` only when `A = B = 0`.
fn diagonal_at_least_center(center: i64, a: i64, b: i64, corner: i64) -> bool {
    let big_a = a + b - 2 * center;
    let big_b = corner - a - b + center;
    match (big_a.signum(), big_b.signum()) {
        (0, s) => s >= 0,
        (1, s) => s >= 0 || 2 * big_a * big_a > big_b * big_b,
        (_, s) => s > 0 && big_b * big_b > 2 * big_a * big_a,
    }
}

fn reference_riu2(pattern: u32) -> u8 {
    let bits: Vec<u32> = (0..8).map(|k| (pattern >> k) & 1).collect();
    let transitions = (0..8).filter(|&k| bits[k] != bits[(k + 1) % 8]).count();
    if transitions <= 2 {
        bits.iter().sum::<u32>() as u8
    } else {
        9
    }
}

/// riu2 codes of the interior, with the pattern built in exact arithmetic.
pub fn exact_lbp_codes(channel: &GrayChannel) -> Vec<u8> {
    let px = |r: usize, c: usize| i64::from(channel.get(r, c));
    let mut out = Vec::new();
    for r in 1..channel.height() - 1 {
        for c in 1..channel.width() - 1 {
            let g = px(r, c);
            let (n, s, e, w) = (px(r - 1, c), px(r + 1, c), px(r, c + 1), px(r, c - 1));
            let bits = [
                e >= g,
                diagonal_at_least_center(g, n, e, px(r - 1, c + 1)),
                n >= g,
                diagonal_at_least_center(g, n, w, px(r - 1, c - 1)),
                w >= g,
                diagonal_at_least_center(g, s, w, px(r + 1, c - 1)),
                s >= g,
                diagonal_at_least_center(g, s, e, px(r + 1, c + 1)),
            ];
            let pattern = bits
                .iter()
                .enumerate()
                .fold(0u32, |acc, (k, &b)| acc | (u32::from(b) << k));
            out.push(reference_riu2(pattern));
        }
    }
    out
}

/// Textbook bilinear interpolation at an arbitrary real position.
fn bilinear(channel: &GrayChannel, y: f64, x: f64) -> f64 {
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let (y0, x0) = (y0 as usize, x0 as usize);
    let y1 = (y0 + 1).min(channel.height() - 1);
    let x1 = (x0 + 1).min(channel.width() - 1);
    let p = |r: usize, c: usize| f64::from(channel.get(r, c));
    p(y0, x0) * (1.0 - fy) * (1.0 - fx)
        + p(y0, x1) * (1.0 - fy) * fx
        + p(y1, x0) * fy * (1.0 - fx)
        + p(y1, x1) * fy * fx
}

/// Ring variance from samples at `(r − sin φ_k, c + cos φ_k)`,
/// `φ_k = 2πk/8`, axis positions snapped to the grid.
pub fn brute_variance_map(channel: &GrayChannel) -> Vec<f64> {
    let mut out = Vec::new();
    for r in 1..channel.height() - 1 {
        for c in 1..channel.width() - 1 {
            let samples: Vec<f64> = (0..8)
                .map(|k| {
                    let phi = std::f64::consts::TAU * k as f64 / 8.0;
                    let snap = |v: f64| if (v - v.round()).abs() < 1e-12 { v.round() } else { v };
                    bilinear(channel, snap(r as f64 - phi.sin()), snap(c as f64 + phi.cos()))
                })
                .collect();
            let mean = samples.iter().sum::<f64>() / 8.0;
            out.push(samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / 8.0);
        }
    }
    out
}

#[derive(Clone, Debug, Default)]
pub struct OracleSummary {
    pub images: usize,
    pub glcm_mismatches: usize,
    pub lbp_mismatches: usize,
    pub max_var_error: f64,
    pub max_contrast_asymmetry: f64,
}

impl OracleSummary {
    pub fn passed(&self) -> bool {
        self.images > 0
            && self.glcm_mismatches == 0
            && self.lbp_mismatches == 0
            && self.max_var_error <= REAL_TOLERANCE
            && self.max_contrast_asymmetry <= REAL_TOLERANCE
    }
}

/// Compares every GLCM, the LBP codes and the variance map of seeded random
/// images with the references, and checks contrast(0°) = contrast(180°).
pub fn texture_oracle_suite(images: usize, size: usize) -> OracleSummary {
    let mut summary = OracleSummary {
        images,
        ..Default::default()
    };
    for seed in 0..images as u64 {
        let ch = random_channel(seed, size);
        for &d in &GLCM_DISTANCES {
            for &a in &GLCM_ANGLES {
                let fast = glcm_counts(&ch, d, a).unwrap();
                let brute = brute_glcm(&ch, d, a);
                if fast.values().iter().zip(&brute).any(|(&x, &y)| x != y as f64) {
                    summary.glcm_mismatches += 1;
                }
            }
            let c0 = glcm_contrast(&glcm(&ch, d, 0).unwrap()).unwrap();
            let c180 = glcm_contrast(&glcm(&ch, d, 180).unwrap()).unwrap();
            summary.max_contrast_asymmetry = summary.max_contrast_asymmetry.max((c0 - c180).abs());
        }
        if lbp_codes(&ch).unwrap().codes != exact_lbp_codes(&ch) {
            summary.lbp_mismatches += 1;
        }
        let var = lbp_variance_map(&ch).unwrap().values;
        for (a, b) in var.iter().zip(brute_variance_map(&ch)) {
            summary.max_var_error = summary.max_var_error.max((a - b).abs());
        }
    }
    summary
}
