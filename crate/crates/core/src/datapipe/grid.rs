//! Regular plot grids laid over an orthomosaic.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::raster::MultiChannelImage;

/// Parses `key=value` lines. Blank lines and `#` comments are ignored;
/// later keys override earlier ones.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Data(format!("line {}: expected key=value, got {raw:?}", n + 1)));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Data(format!("line {}: empty key", n + 1)));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    pub origin_row: usize,
    pub origin_col: usize,
    pub plot_height: usize,
    pub plot_width: usize,
    pub row_gap: usize,
    pub col_gap: usize,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl GridSpec {
    const KEYS: [&'static str; 8] = [
        "origin_row",
        "origin_col",
        "plot_height",
        "plot_width",
        "row_gap",
        "col_gap",
        "n_rows",
        "n_cols",
    ];

    pub fn parse(text: &str) -> Result<Self> {
        let kv = parse_key_values(text)?;
        if let Some(unknown) = kv.keys().find(|k| !Self::KEYS.contains(&k.as_str())) {
            return Err(Error::Data(format!("unknown grid key {unknown:?}")));
        }
        let get = |key: &str, default: Option<usize>| -> Result<usize> {
            match kv.get(key) {
                Some(v) => v
                    .parse()
                    .map_err(|_| Error::Data(format!("grid key {key}: {v:?} is not a non-negative integer"))),
                None => default.ok_or_else(|| Error::Data(format!("grid key {key} is missing"))),
            }
        };
        let spec = Self {
            origin_row: get("origin_row", Some(0))?,
            origin_col: get("origin_col", Some(0))?,
            plot_height: get("plot_height", None)?,
            plot_width: get("plot_width", None)?,
            row_gap: get("row_gap", Some(0))?,
            col_gap: get("col_gap", Some(0))?,
            n_rows: get("n_rows", None)?,
            n_cols: get("n_cols", None)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let values = [
            self.origin_row,
            self.origin_col,
            self.plot_height,
            self.plot_width,
            self.row_gap,
            self.col_gap,
            self.n_rows,
            self.n_cols,
        ];
        Self::KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.plot_height == 0 || self.plot_width == 0 || self.n_rows == 0 || self.n_cols == 0 {
            return Err(Error::Data(format!("grid extents must be positive: {self:?}")));
        }
        Ok(())
    }

    /// Top-left pixel of cell `(row, col)`.
    pub fn cell_origin(&self, row: usize, col: usize) -> (usize, usize) {
        (
            self.origin_row + row * (self.plot_height + self.row_gap),
            self.origin_col + col * (self.plot_width + self.col_gap),
        )
    }
}

/// Crops every grid cell, row-major.
pub fn extract_plots(mosaic: &MultiChannelImage, grid: &GridSpec) -> Result<Vec<MultiChannelImage>> {
    grid.validate()?;
    let mut plots = Vec::with_capacity(grid.n_rows * grid.n_cols);
    for row in 0..grid.n_rows {
        for col in 0..grid.n_cols {
            let (top, left) = grid.cell_origin(row, col);
            if top + grid.plot_height > mosaic.height() || left + grid.plot_width > mosaic.width() {
                return Err(Error::Bounds {
                    row,
                    col,
                    message: format!(
                        "cell spans rows {top}..{} and cols {left}..{} of a {}×{} mosaic",
                        top + grid.plot_height,
                        left + grid.plot_width,
                        mosaic.height(),
                        mosaic.width()
                    ),
                });
            }
            plots.push(mosaic.crop(top, left, grid.plot_height, grid.plot_width)?);
        }
    }
    Ok(plots)
}
