use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::manifest::{DatasetManifest, Label, Split};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    /// 80/20 train/test, then 80/20 of the training part for validation.
    fn default() -> Self {
        Self {
            train: 0.64,
            val: 0.16,
            test: 0.20,
        }
    }
}

impl SplitRatios {
    fn validate(&self) -> Result<()> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|r| !(0.0..=1.0).contains(r)) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!(
                "split ratios must be in [0,1] and sum to 1: {self:?}"
            )));
        }
        Ok(())
    }
}

/// `floor(ratio · n)`, tolerant of representation error just below an integer.
fn share(ratio: f64, n: usize) -> usize {
    (ratio * n as f64 + 1e-9).floor() as usize
}

/// Stratified random split. Within each class, `floor(test·n)` records go to
/// test and `floor(val·n)` to validation after a seeded shuffle; the rest
/// (including rounding remainders) go to train.
pub fn split_dataset(manifest: &DatasetManifest, ratios: SplitRatios, seed: u64) -> Result<DatasetManifest> {
    ratios.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = manifest.clone();
    for label in Label::ALL {
        let mut members: Vec<usize> = manifest
            .records()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == label)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            return Err(Error::Data(format!("class {label} has no records")));
        }
        members.shuffle(&mut rng);
        let n = members.len();
        let n_test = share(ratios.test, n);
        let n_val = share(ratios.val, n);
        for (rank, &i) in members.iter().enumerate() {
            out.records_mut()[i].split = if rank < n_test {
                Split::Test
            } else if rank < n_test + n_val {
                Split::Val
            } else {
                Split::Train
            };
        }
    }
    Ok(out)
}
