use std::fmt;

use rayon::prelude::*;

use crate::datapipe::{Dataset, Label, Split};
use crate::error::{Error, Result};
use crate::model::{LodgedNetModel, PreparedSample};

/// Samples per eval-mode forward pass.
const EVAL_BATCH: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// `confusion[truth][predicted]`, indexed by [`Label::index`].
    pub confusion: [[usize; 2]; 2],
    pub n_samples: usize,
    pub accuracy: f64,
    /// `None` when no sample was predicted as that class.
    pub precision: [Option<f64>; 2],
    /// `None` when no sample of that class was present.
    pub recall: [Option<f64>; 2],
}

impl EvalReport {
    pub fn from_predictions(truth: &[Label], predicted: &[Label]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::dim(
                "predictions",
                format!("{} labels but {} predictions", truth.len(), predicted.len()),
            ));
        }
        if truth.is_empty() {
            return Err(Error::Data("cannot evaluate an empty split".into()));
        }
        let mut confusion = [[0usize; 2]; 2];
        for (t, p) in truth.iter().zip(predicted) {
            confusion[t.index()][p.index()] += 1;
        }
        let n = truth.len();
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        let precision = [0, 1].map(|k| ratio(confusion[k][k], confusion[0][k] + confusion[1][k]));
        let recall = [0, 1].map(|k| ratio(confusion[k][k], confusion[k][0] + confusion[k][1]));
        Ok(Self {
            accuracy: (confusion[0][0] + confusion[1][1]) as f64 / n as f64,
            confusion,
            n_samples: n,
            precision,
            recall,
        })
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{:.2}%", 100.0 * v));
        writeln!(f, "samples: {}", self.n_samples)?;
        writeln!(f, "accuracy: {:.2}%", 100.0 * self.accuracy)?;
        writeln!(f, "confusion (rows = true, cols = predicted):")?;
        writeln!(
            f,
            "{:>12} {:>12} {:>12}",
            "",
            Label::NonLodged.as_str(),
            Label::Lodged.as_str()
        )?;
        for label in Label::ALL {
            let row = self.confusion[label.index()];
            writeln!(f, "{:>12} {:>12} {:>12}", label.as_str(), row[0], row[1])?;
        }
        for label in Label::ALL {
            let k = label.index();
            writeln!(
                f,
                "{label}: precision {} recall {}",
                pct(self.precision[k]),
                pct(self.recall[k])
            )?;
        }
        Ok(())
    }
}

/// Eval-mode predictions for every sample of `split`, without augmentation.
pub fn evaluate(model: &LodgedNetModel, dataset: &Dataset, split: Split) -> Result<EvalReport> {
    let indices = dataset.indices(split);
    if indices.is_empty() {
        return Err(Error::Data(format!("split {split} is empty")));
    }
    let prepared = indices
        .par_iter()
        .map(|&i| model.prepare(&dataset.images[i]))
        .collect::<Result<Vec<_>>>()?;
    let mut predicted = Vec::with_capacity(prepared.len());
    for chunk in prepared.chunks(EVAL_BATCH) {
        let refs: Vec<&PreparedSample> = chunk.iter().collect();
        predicted.extend(model.predict_prepared(&refs)?.into_iter().map(|p| p.label));
    }
    let truth: Vec<Label> = indices.iter().map(|&i| dataset.manifest.records()[i].label).collect();
    EvalReport::from_predictions(&truth, &predicted)
}
