//! Asymmetric, normalized gray-level co-occurrence matrices.

use crate::error::{Error, Result};
use crate::raster::GrayChannel;

/// Number of gray levels; raw 8-bit values are used without requantization.
pub const LEVELS: usize = 256;

/// Pixel distances used for the contrast features.
pub const GLCM_DISTANCES: [usize; 4] = [1, 2, 4, 5];

/// Orientations (degrees) used for the contrast features.
pub const GLCM_ANGLES: [u32; 4] = [0, 90, 135, 180];

#[derive(Clone, Debug, PartialEq)]
pub struct CooccurrenceMatrix {
    values: Vec<f64>,
    offset: (isize, isize),
    normalized: bool,
}

impl CooccurrenceMatrix {
    /// Entry for the ordered level pair `(reference, neighbor)`.
    pub fn get(&self, reference: u8, neighbor: u8) -> f64 {
        self.values[reference as usize * LEVELS + neighbor as usize]
    }

    /// Row-major `LEVELS × LEVELS` entries.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(Δrow, Δcol)` from a reference pixel to its neighbor.
    pub fn offset(&self) -> (isize, isize) {
        self.offset
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Scales counts into a probability distribution.
    pub fn normalize(mut self) -> Result<Self> {
        let total = self.total();
        if total <= 0.0 {
            return Err(Error::EmptyMatrix(format!("offset {:?} has no pairs", self.offset)));
        }
        for v in &mut self.values {
            *v /= total;
        }
        self.normalized = true;
        Ok(self)
    }
}

/// Pixel offset for a distance and angle: `(-round(d·sin θ), round(d·cos θ))`,
/// rounding half away from zero.
pub fn glcm_offset(distance: usize, angle_degrees: u32) -> Result<(isize, isize)> {
    if !GLCM_DISTANCES.contains(&distance) {
        return Err(Error::Parameter(format!(
            "GLCM distance {distance} not in {GLCM_DISTANCES:?}"
        )));
    }
    if !GLCM_ANGLES.contains(&angle_degrees) {
        return Err(Error::Parameter(format!(
            "GLCM angle {angle_degrees}° not in {GLCM_ANGLES:?}"
        )));
    }
    let theta = f64::from(angle_degrees).to_radians();
    let d = distance as f64;
    // f64::round rounds half away from zero; `+ 0.0` folds -0 into 0.
    let dr = -(d * theta.sin()).round() + 0.0;
    let dc = (d * theta.cos()).round() + 0.0;
    Ok((dr as isize, dc as isize))
}

/// Raw pair counts for one offset.
pub fn glcm_counts(channel: &GrayChannel, distance: usize, angle_degrees: u32) -> Result<CooccurrenceMatrix> {
    let offset = glcm_offset(distance, angle_degrees)?;
    let (dr, dc) = offset;
    let (h, w) = (channel.height() as isize, channel.width() as isize);
    let rows = (0.max(-dr))..(h.min(h - dr));
    let cols = (0.max(-dc))..(w.min(w - dc));
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::EmptyMatrix(format!(
            "{}×{} image has no pixel pairs at offset {offset:?}",
            h, w
        )));
    }
    let mut counts = vec![0u32; LEVELS * LEVELS];
    let levels = channel.levels();
    for r in rows {
        let reference_row = &levels[(r * w) as usize..((r + 1) * w) as usize];
        let neighbor_row = &levels[((r + dr) * w) as usize..((r + dr + 1) * w) as usize];
        for c in cols.clone() {
            let i = reference_row[c as usize] as usize;
            let j = neighbor_row[(c + dc) as usize] as usize;
            counts[i * LEVELS + j] += 1;
        }
    }
    Ok(CooccurrenceMatrix {
        values: counts.into_iter().map(f64::from).collect(),
        offset,
        normalized: false,
    })
}

/// Normalized co-occurrence matrix for one distance and angle.
pub fn glcm(channel: &GrayChannel, distance: usize, angle_degrees: u32) -> Result<CooccurrenceMatrix> {
    glcm_counts(channel, distance, angle_degrees)?.normalize()
}

/// `Σ P(i,j)·(i−j)²` of a normalized matrix.
pub fn glcm_contrast(matrix: &CooccurrenceMatrix) -> Result<f64> {
    if !matrix.normalized {
        return Err(Error::State(
            "contrast requires a normalized co-occurrence matrix".into(),
        ));
    }
    let mut contrast = 0.0;
    for (i, row) in matrix.values.chunks(LEVELS).enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p != 0.0 {
                let diff = i as f64 - j as f64;
                contrast += p * diff * diff;
            }
        }
    }
    Ok(contrast)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_for_all_combinations() {
        assert_eq!(glcm_offset(1, 0).unwrap(), (0, 1));
        assert_eq!(glcm_offset(2, 90).unwrap(), (-2, 0));
        assert_eq!(glcm_offset(4, 180).unwrap(), (0, -4));
        assert_eq!(glcm_offset(1, 135).unwrap(), (-1, -1));
        assert_eq!(glcm_offset(2, 135).unwrap(), (-1, -1));
        assert_eq!(glcm_offset(4, 135).unwrap(), (-3, -3));
        assert_eq!(glcm_offset(5, 135).unwrap(), (-4, -4));
    }

    #[test]
    fn rejects_unsupported_parameters() {
        assert!(matches!(glcm_offset(3, 0), Err(Error::Parameter(_))));
        assert!(matches!(glcm_offset(1, 45), Err(Error::Parameter(_))));
    }

    #[test]
    fn two_by_two_example() {
        let c = GrayChannel::new(2, 2, vec![0, 1, 0, 1]).unwrap();
        let m = glcm(&c, 1, 0).unwrap();
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.total(), 1.0);
        assert_eq!(glcm_contrast(&m).unwrap(), 1.0);
    }

    #[test]
    fn constant_image_is_single_diagonal_entry() {
        let c = GrayChannel::filled(9, 7, 77).unwrap();
        for &d in &GLCM_DISTANCES {
            for &a in &GLCM_ANGLES {
                let m = glcm(&c, d, a).unwrap();
                assert_eq!(m.get(77, 77), 1.0);
                assert_eq!(glcm_contrast(&m).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn checkerboard_contrast() {
        let c = GrayChannel::from_fn(8, 8, |r, col| if (r + col) % 2 == 0 { 0 } else { 255 }).unwrap();
        let m = glcm(&c, 1, 0).unwrap();
        assert_eq!(glcm_contrast(&m).unwrap(), 65025.0);
    }

    #[test]
    fn too_small_image_has_no_pairs() {
        let c = GrayChannel::filled(3, 3, 0).unwrap();
        assert!(matches!(glcm(&c, 4, 0), Err(Error::EmptyMatrix(_))));
        assert!(matches!(glcm(&c, 5, 135), Err(Error::EmptyMatrix(_))));
    }

    #[test]
    fn contrast_requires_normalization() {
        let c = GrayChannel::filled(4, 4, 3).unwrap();
        let m = glcm_counts(&c, 1, 0).unwrap();
        assert_eq!(m.total(), 12.0);
        assert!(matches!(glcm_contrast(&m), Err(Error::State(_))));
    }
}
