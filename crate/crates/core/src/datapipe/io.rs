//! Channel image files: binary PGM (P5, maxval 255) or 8-bit grayscale PNG.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder};

use crate::error::{Error, Result};
use crate::raster::{GrayChannel, MultiChannelImage};

pub fn read_channel(path: &Path) -> Result<GrayChannel> {
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    match decoded {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            GrayChannel::new(w as usize, h as usize, buf.into_raw())
        }
        other => Err(Error::Decode {
            path: path.to_path_buf(),
            message: format!("expected an 8-bit single-channel image, found {:?}", other.color()),
        }),
    }
}

pub fn read_image(paths: &[impl AsRef<Path>]) -> Result<MultiChannelImage> {
    let channels = paths
        .iter()
        .map(|p| read_channel(p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    MultiChannelImage::new(channels)
}

pub fn write_pgm(path: &Path, channel: &GrayChannel) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(
            channel.levels(),
            channel.width() as u32,
            channel.height() as u32,
            ExtendedColorType::L8,
        )
        .map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        let c = GrayChannel::from_fn(7, 3, |r, col| (r * 40 + col * 3) as u8).unwrap();
        write_pgm(&path, &c).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5"));
        assert_eq!(read_channel(&path).unwrap(), c);
    }

    #[test]
    fn png_input_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let c = GrayChannel::from_fn(5, 4, |r, col| (r * 50 + col) as u8).unwrap();
        image::GrayImage::from_raw(5, 4, c.levels().to_vec())
            .unwrap()
            .save(&path)
            .unwrap();
        assert_eq!(read_channel(&path).unwrap(), c);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_channel(Path::new("/nonexistent/x.pgm")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
