//! Dataset ingestion and preprocessing.
//!
//! Randomness contract: per-sample work draws from [`sample_rng`], an
//! independent ChaCha stream keyed by the master seed and the sample index,
//! so results do not depend on how work is scheduled across threads.

mod dataset;
mod grid;
mod io;
mod manifest;
mod preprocess;
mod split;
mod synth;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use dataset::{Dataset, MANIFEST_FILE};
pub use grid::{extract_plots, parse_key_values, GridSpec};
pub use io::{read_channel, read_image, write_pgm};
pub use manifest::{DatasetManifest, Label, ManifestRecord, Split};
pub use preprocess::{
    augment_flips, fit_normalization, resize_bilinear, resize_center_crop, resized_dims, FlipState, NormalizationStats,
    FLIP_PROBABILITY, STD_FLOOR, TARGET_HEIGHT, TARGET_WIDTH,
};
pub use split::{split_dataset, SplitRatios};
pub use synth::{generate_synthetic, SynthConfig};

/// Independent random stream for item `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
