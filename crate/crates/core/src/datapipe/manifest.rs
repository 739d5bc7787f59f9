use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::raster::MultiChannelImage;

use super::io::read_image;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    NonLodged,
    Lodged,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::NonLodged, Label::Lodged];

    /// Class index used by the network output.
    pub fn index(self) -> usize {
        match self {
            Label::NonLodged => 0,
            Label::Lodged => 1,
        }
    }

    pub fn from_index(index: usize) -> Result<Self> {
        match index {
            0 => Ok(Label::NonLodged),
            1 => Ok(Label::Lodged),
            other => Err(Error::Label(format!("class index {other} out of range"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::NonLodged => "non_lodged",
            Label::Lodged => "lodged",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "non_lodged" => Ok(Label::NonLodged),
            "lodged" => Ok(Label::Lodged),
            other => Err(Error::Label(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
    Unassigned,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }

    /// Splits whose pixels may be used to fit preprocessing statistics.
    pub fn is_fitting(self) -> bool {
        matches!(self, Split::Train | Split::Val)
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "unassigned" | "" => Ok(Split::Unassigned),
            other => Err(Error::Data(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRecord {
    pub sample_id: String,
    pub label: Label,
    pub split: Split,
    /// One path per channel; relative paths resolve against the manifest
    /// file's directory.
    pub channel_paths: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    channel_count: usize,
    records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn new(channel_count: usize, records: Vec<ManifestRecord>) -> Result<Self> {
        if channel_count == 0 {
            return Err(Error::Data("manifest needs at least one channel".into()));
        }
        if let Some(r) = records.iter().find(|r| r.channel_paths.len() != channel_count) {
            return Err(Error::Data(format!(
                "record {} has {} channel paths, expected {channel_count}",
                r.sample_id,
                r.channel_paths.len()
            )));
        }
        Ok(Self { channel_count, records })
    }

    pub fn channel_count(&self) -> usize {
        self.channel_count
    }

    pub fn records(&self) -> &[ManifestRecord] {
        &self.records
    }

    pub fn records_mut(&mut self) -> &mut [ManifestRecord] {
        &mut self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn has_unassigned(&self) -> bool {
        self.records.iter().any(|r| r.split == Split::Unassigned)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        let fixed = ["sample_id", "label", "split"];
        if headers.len() < 4 || headers.iter().take(3).ne(fixed.iter().copied()) {
            return Err(Error::Data(format!(
                "{}: header must be sample_id,label,split,channel_0,...",
                path.display()
            )));
        }
        let channel_count = headers.len() - 3;
        for (c, name) in headers.iter().skip(3).enumerate() {
            if name != format!("channel_{c}") {
                return Err(Error::Data(format!(
                    "{}: column {} should be channel_{c}, found {name:?}",
                    path.display(),
                    c + 3
                )));
            }
        }
        let mut records = Vec::new();
        for (line, row) in reader.records().enumerate() {
            let row = row.map_err(|e| csv_error(path, e))?;
            let context = |e: Error| Error::Data(format!("{}: row {}: {e}", path.display(), line + 1));
            records.push(ManifestRecord {
                sample_id: row[0].to_string(),
                label: row[1].parse().map_err(context)?,
                split: row[2].parse().map_err(context)?,
                channel_paths: row.iter().skip(3).map(PathBuf::from).collect(),
            });
        }
        Self::new(channel_count, records)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut header = vec!["sample_id".to_string(), "label".into(), "split".into()];
        header.extend((0..self.channel_count).map(|c| format!("channel_{c}")));
        writer.write_record(&header).map_err(|e| csv_error(path, e))?;
        for r in &self.records {
            let mut row = vec![r.sample_id.clone(), r.label.to_string(), r.split.to_string()];
            row.extend(r.channel_paths.iter().map(|p| p.to_string_lossy().into_owned()));
            writer.write_record(&row).map_err(|e| csv_error(path, e))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }

    /// Loads one record's channels, resolving relative paths against `base`.
    pub fn load_image(&self, record: &ManifestRecord, base: &Path) -> Result<MultiChannelImage> {
        let paths: Vec<PathBuf> = record.channel_paths.iter().map(|p| base.join(p)).collect();
        read_image(&paths)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Data(format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, label: Label, split: Split, c: usize) -> ManifestRecord {
        ManifestRecord {
            sample_id: id.into(),
            label,
            split,
            channel_paths: (0..c).map(|i| PathBuf::from(format!("{id}_c{i}.pgm"))).collect(),
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = DatasetManifest::new(
            2,
            vec![
                record("a", Label::Lodged, Split::Train, 2),
                record("b", Label::NonLodged, Split::Unassigned, 2),
            ],
        )
        .unwrap();
        m.write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("sample_id,label,split,channel_0,channel_1\n"));
        assert!(text.contains("b,non_lodged,unassigned,b_c0.pgm,b_c1.pgm"));
        assert_eq!(DatasetManifest::read(&path).unwrap(), m);
    }

    #[test]
    fn rejects_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "sample_id,label,split,channel_0\na,upright,train,x.pgm\n").unwrap();
        assert!(matches!(DatasetManifest::read(&path), Err(Error::Data(_))));
        std::fs::write(&path, "id,label,split,channel_0\n").unwrap();
        assert!(matches!(DatasetManifest::read(&path), Err(Error::Data(_))));
        assert!(DatasetManifest::new(3, vec![record("a", Label::Lodged, Split::Test, 2)]).is_err());
    }

    #[test]
    fn label_indices() {
        for l in Label::ALL {
            assert_eq!(Label::from_index(l.index()).unwrap(), l);
            assert_eq!(l.as_str().parse::<Label>().unwrap(), l);
        }
        assert!(Label::from_index(2).is_err());
    }
}
