use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Settings for comparing analytic gradients to central differences.
#[derive(Clone, Debug)]
pub struct GradCheck {
    /// Central-difference half step.
    pub step: f64,
    /// Maximum accepted relative error.
    pub tolerance: f64,
    /// Gradient magnitudes below this are compared on an absolute scale.
    pub magnitude_floor: f64,
    /// Check only this many randomly chosen coordinates per input.
    pub coords_per_input: Option<usize>,
    /// Seed for the coordinate sample.
    pub seed: u64,
    /// When set, coordinates whose forward and backward one-sided
    /// differences disagree by more than this (relative) are skipped: a
    /// ReLU or max-pool kink lies within one step of the point, where the
    /// function has no derivative to compare against.
    pub nonsmooth_tolerance: Option<f64>,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-5,
            magnitude_floor: 1e-3,
            coords_per_input: None,
            seed: 0,
            nonsmooth_tolerance: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(input, flat index)` of the worst coordinate.
    pub worst: (usize, usize),
    pub checked: usize,
    /// Coordinates rejected by the non-smoothness screen.
    pub skipped: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_rel_error <= self.tolerance
    }
}

/// Checks `build`'s scalar output against central finite differences with
/// respect to every input (or a seeded sample of coordinates per input).
pub fn grad_check<F>(build: F, inputs: &[Tensor<f64>], cfg: &GradCheck) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut graph = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| graph.param(t)).collect();
    let out = build(&mut graph, &vars)?;
    scalar_of(&graph, out)?;
    graph.backward(out)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .map(|&v| {
            graph
                .grad(v)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; graph.value(v).len()])
        })
        .collect();
    drop(graph);

    let eval = |point: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = point.iter().map(|t| g.constant(t.clone())).collect();
        let out = build(&mut g, &vars)?;
        scalar_of(&g, out)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut point = inputs.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        checked: 0,
        skipped: 0,
        tolerance: cfg.tolerance,
    };
    let base = match cfg.nonsmooth_tolerance {
        Some(_) => eval(inputs)?,
        None => 0.0,
    };
    for (which, grads) in analytic.iter().enumerate() {
        let len = grads.len();
        let coords: Vec<usize> = match cfg.coords_per_input {
            Some(k) if k < len => sample(&mut rng, len, k).into_vec(),
            _ => (0..len).collect(),
        };
        for idx in coords {
            let original = point[which].data()[idx];
            point[which].data_mut()[idx] = original + cfg.step;
            let plus = eval(&point)?;
            point[which].data_mut()[idx] = original - cfg.step;
            let minus = eval(&point)?;
            point[which].data_mut()[idx] = original;

            let numeric = (plus - minus) / (2.0 * cfg.step);
            let exact = grads[idx];
            if !numeric.is_finite() || !exact.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite gradient at input {which}[{idx}]: analytic {exact}, numeric {numeric}"
                )));
            }
            let scale = exact.abs().max(numeric.abs()).max(cfg.magnitude_floor);
            if let Some(limit) = cfg.nonsmooth_tolerance {
                let forward = (plus - base) / cfg.step;
                let backward = (base - minus) / cfg.step;
                if (forward - backward).abs() / scale > limit {
                    report.skipped += 1;
                    continue;
                }
            }
            let rel = (exact - numeric).abs() / scale;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (which, idx);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}

fn scalar_of(graph: &Graph<f64>, out: Var) -> Result<f64> {
    let value = graph.value(out);
    if value.len() != 1 {
        return Err(Error::dim(
            "output",
            format!("expected a scalar, got {:?}", value.shape()),
        ));
    }
    let v = value.data()[0];
    if !v.is_finite() {
        return Err(Error::Numeric(format!("non-finite output {v}")));
    }
    Ok(v)
}
