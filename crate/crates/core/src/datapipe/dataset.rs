use std::fs;
use std::path::{Path, PathBuf};

use super::io::write_pgm;
use super::manifest::{DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::raster::MultiChannelImage;

pub const MANIFEST_FILE: &str = "manifest.csv";

/// A manifest together with its decoded images, index-aligned.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub images: Vec<MultiChannelImage>,
}

impl Dataset {
    pub fn new(manifest: DatasetManifest, images: Vec<MultiChannelImage>) -> Result<Self> {
        if manifest.len() != images.len() {
            return Err(Error::Data(format!(
                "{} manifest records but {} images",
                manifest.len(),
                images.len()
            )));
        }
        if let Some((r, _)) = manifest
            .records()
            .iter()
            .zip(&images)
            .find(|(_, i)| i.channel_count() != manifest.channel_count())
        {
            return Err(Error::Data(format!(
                "sample {} does not have {} channels",
                r.sample_id,
                manifest.channel_count()
            )));
        }
        Ok(Self { manifest, images })
    }

    /// Reads a manifest CSV and every image it lists; relative channel
    /// paths resolve against the manifest's directory.
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest = DatasetManifest::read(manifest_path)?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let images = manifest
            .records()
            .iter()
            .map(|r| manifest.load_image(r, base))
            .collect::<Result<Vec<_>>>()?;
        Self::new(manifest, images)
    }

    /// Writes one PGM per channel plus `manifest.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (record, image) in self.manifest.records().iter().zip(&self.images) {
            for (path, channel) in record.channel_paths.iter().zip(image.channels()) {
                write_pgm(&dir.join(path), channel)?;
            }
        }
        let manifest_path = dir.join(MANIFEST_FILE);
        self.manifest.write(&manifest_path)?;
        Ok(manifest_path)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Positions of the records in `split`, in manifest order.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.manifest
            .records()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.split == split)
            .map(|(i, _)| i)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::{generate_synthetic, SynthConfig};

    #[test]
    fn write_then_load() {
        let d = generate_synthetic(&SynthConfig {
            n_per_class: 3,
            plot_height: 10,
            plot_width: 12,
            ..Default::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = d.write(&dir.path().join("nested")).unwrap();
        assert_eq!(Dataset::load(&path).unwrap(), d);
        assert_eq!(d.indices(Split::Unassigned).len(), 6);
        assert!(d.indices(Split::Train).is_empty());
    }

    #[test]
    fn misaligned_parts_are_rejected() {
        let d = generate_synthetic(&SynthConfig {
            n_per_class: 1,
            plot_height: 8,
            plot_width: 8,
            ..Default::default()
        })
        .unwrap();
        assert!(Dataset::new(d.manifest.clone(), d.images[..1].to_vec()).is_err());
    }
}
