//! Little-endian model file:
//!
//! ```text
//! "LDNT" | version u16 | C u16 | 7 × filters u16 | hidden u16 | classes u16
//! C × f32 means | C × f32 stds | 17 × f32 VAR edges
//! parameters as f32, in LodgedNetConfig::param_shapes order
//! ```

use std::fs;
use std::path::Path;

use super::{LodgedNetConfig, LodgedNetModel, CONV_LAYERS};
use crate::datapipe::NormalizationStats;
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::texture::{VarBinEdges, VAR_BINS};

pub const MAGIC: [u8; 4] = *b"LDNT";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 * (4 + CONV_LAYERS);

fn u16_field(value: usize, what: &str) -> Result<u16> {
    u16::try_from(value).map_err(|_| Error::Parameter(format!("{what} {value} does not fit the model file")))
}

impl LodgedNetModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let c = &self.config;
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * (2 * c.channels + VAR_BINS + 1 + self.param_count()));
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&u16_field(c.channels, "channel count")?.to_le_bytes());
        for &f in &c.conv_filters {
            out.extend_from_slice(&u16_field(f, "filter count")?.to_le_bytes());
        }
        out.extend_from_slice(&u16_field(c.hidden, "hidden width")?.to_le_bytes());
        out.extend_from_slice(&u16_field(c.classes, "class count")?.to_le_bytes());
        let stats = &self.stats;
        let edges = stats.var_edges.edges().iter().map(|&e| e as f32);
        for v in stats
            .channel_means
            .iter()
            .chain(&stats.channel_stds)
            .copied()
            .chain(edges)
        {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for p in &self.params {
            for v in p.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, offset: 0 };
        if r.take(4)? != MAGIC {
            return Err(r.error_at(0, "bad magic, not a model file"));
        }
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(r.error_at(4, &format!("unsupported format version {version}")));
        }
        let mut config = LodgedNetConfig::new(usize::from(r.u16()?));
        for f in config.conv_filters.iter_mut() {
            *f = usize::from(r.u16()?);
        }
        config.hidden = usize::from(r.u16()?);
        config.classes = usize::from(r.u16()?);
        config
            .validate()
            .map_err(|e| r.error_at(6, &format!("invalid architecture: {e}")))?;

        let stats_offset = r.offset;
        let channel_means = r.f32s(config.channels)?;
        let channel_stds = r.f32s(config.channels)?;
        if channel_means.iter().chain(&channel_stds).any(|v| !v.is_finite()) || channel_stds.iter().any(|&s| s <= 0.0) {
            return Err(r.error_at(stats_offset, "channel statistics must be finite with positive stds"));
        }
        let edges_offset = r.offset;
        let edges: Vec<f64> = r.f32s(VAR_BINS + 1)?.into_iter().map(f64::from).collect();
        let var_edges = VarBinEdges::new(&edges).map_err(|e| r.error_at(edges_offset, &e.to_string()))?;

        let params = config
            .param_shapes()
            .iter()
            .map(|shape| {
                let data = r.f32s(shape.iter().product())?;
                Tensor::new(shape, data)
            })
            .collect::<Result<Vec<_>>>()?;
        if r.offset != bytes.len() {
            return Err(r.error_at(r.offset, &format!("{} trailing bytes", bytes.len() - r.offset)));
        }
        let stats = NormalizationStats {
            channel_means,
            channel_stds,
            var_edges,
        };
        LodgedNetModel::from_parts(config, params, stats)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn error_at(&self, offset: usize, message: &str) -> Error {
        Error::Format {
            offset: offset as u64,
            message: message.to_string(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.offset + n;
        if end > self.bytes.len() {
            return Err(self.error_at(
                self.bytes.len(),
                &format!("truncated: needed {n} bytes at offset {}", self.offset),
            ));
        }
        let out = &self.bytes[self.offset..end];
        self.offset = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("two bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(4 * n)?;
        Ok(raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("four bytes")))
            .collect())
    }
}
