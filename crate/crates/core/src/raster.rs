//! 8-bit single- and multi-channel rasters.

use crate::error::{Error, Result};

/// One 8-bit image channel, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayChannel {
    width: usize,
    height: usize,
    levels: Vec<u8>,
}

impl GrayChannel {
    pub fn new(width: usize, height: usize, levels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::dim(
                "size",
                format!("channel must be non-empty, got {width}×{height}"),
            ));
        }
        if levels.len() != width * height {
            return Err(Error::dim(
                "levels",
                format!(
                    "{width}×{height} channel needs {} values, got {}",
                    width * height,
                    levels.len()
                ),
            ));
        }
        Ok(Self { width, height, levels })
    }

    pub fn filled(width: usize, height: usize, level: u8) -> Result<Self> {
        Self::new(width, height, vec![level; width * height])
    }

    /// Builds a channel from a per-pixel function of `(row, col)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut levels = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                levels.push(f(r, c));
            }
        }
        Self::new(width, height, levels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    pub fn into_levels(self) -> Vec<u8> {
        self.levels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.levels[row * self.width + col]
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut levels = self.levels.clone();
        for row in levels.chunks_mut(self.width) {
            row.reverse();
        }
        Self { levels, ..*self }
    }

    pub fn flip_vertical(&self) -> Self {
        let mut levels = Vec::with_capacity(self.levels.len());
        for row in self.levels.chunks(self.width).rev() {
            levels.extend_from_slice(row);
        }
        Self { levels, ..*self }
    }

    /// Rotates by 90° counter-clockwise.
    pub fn rotate90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        // new(r, c) = old(c, w - 1 - r); new is h wide, w tall
        let levels = (0..w)
            .flat_map(|r| (0..h).map(move |c| (r, c)))
            .map(|(r, c)| self.get(c, w - 1 - r))
            .collect();
        Self {
            width: h,
            height: w,
            levels,
        }
    }

    /// Copies the `height×width` window whose top-left corner is `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        if row + height > self.height || col + width > self.width {
            return Err(Error::dim(
                "crop",
                format!(
                    "window {height}×{width} at ({row},{col}) exceeds {}×{}",
                    self.height, self.width
                ),
            ));
        }
        let mut levels = Vec::with_capacity(height * width);
        for r in row..row + height {
            levels.extend_from_slice(&self.levels[r * self.width + col..r * self.width + col + width]);
        }
        Self::new(width, height, levels)
    }
}

/// C equally-sized channels of one scene.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiChannelImage {
    channels: Vec<GrayChannel>,
}

impl MultiChannelImage {
    pub fn new(channels: Vec<GrayChannel>) -> Result<Self> {
        let Some(first) = channels.first() else {
            return Err(Error::dim("channels", "image needs at least one channel"));
        };
        let (w, h) = (first.width, first.height);
        if let Some((i, c)) = channels.iter().enumerate().find(|(_, c)| c.width != w || c.height != h) {
            return Err(Error::dim(
                "channels",
                format!("channel {i} is {}×{}, channel 0 is {h}×{w}", c.height, c.width),
            ));
        }
        Ok(Self { channels })
    }

    pub fn channels(&self) -> &[GrayChannel] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<GrayChannel> {
        self.channels
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn width(&self) -> usize {
        self.channels[0].width
    }

    pub fn height(&self) -> usize {
        self.channels[0].height
    }

    pub fn map_channels(&self, f: impl Fn(&GrayChannel) -> GrayChannel) -> Self {
        Self {
            channels: self.channels.iter().map(f).collect(),
        }
    }

    pub fn flip_horizontal(&self) -> Self {
        self.map_channels(GrayChannel::flip_horizontal)
    }

    pub fn flip_vertical(&self) -> Self {
        self.map_channels(GrayChannel::flip_vertical)
    }

    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        let channels = self
            .channels
            .iter()
            .map(|c| c.crop(row, col, height, width))
            .collect::<Result<Vec<_>>>()?;
        Self::new(channels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_sizes() {
        assert!(GrayChannel::new(3, 2, vec![0; 5]).is_err());
        assert!(GrayChannel::new(0, 2, vec![]).is_err());
        let a = GrayChannel::filled(4, 4, 1).unwrap();
        let b = GrayChannel::filled(4, 5, 1).unwrap();
        assert!(MultiChannelImage::new(vec![a, b]).is_err());
        assert!(MultiChannelImage::new(vec![]).is_err());
    }

    #[test]
    fn flips_and_rotation() {
        let c = GrayChannel::new(3, 2, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(c.flip_horizontal().levels(), &[3, 2, 1, 6, 5, 4]);
        assert_eq!(c.flip_vertical().levels(), &[4, 5, 6, 1, 2, 3]);
        assert_eq!(c.flip_horizontal().flip_horizontal(), c);
        let r = c.rotate90();
        assert_eq!((r.width(), r.height()), (2, 3));
        assert_eq!(r.levels(), &[3, 6, 2, 5, 1, 4]);
        assert_eq!(r.rotate90().rotate90().rotate90(), c);
    }

    #[test]
    fn crop_window() {
        let c = GrayChannel::from_fn(4, 3, |r, col| (r * 10 + col) as u8).unwrap();
        assert_eq!(c.crop(1, 2, 2, 2).unwrap().levels(), &[12, 13, 22, 23]);
        assert!(c.crop(2, 0, 2, 1).is_err());
    }
}
