//! Finite-difference gradient suites over seeded random points.

use lodgednet::model::{network, LodgedNetConfig, LodgedNetModel};
use lodgednet::tensor::{grad_check, GradCheck, GradCheckReport, Graph, Mode, Tensor, Var};
use lodgednet::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const OP_TOLERANCE: f64 = 1e-5;
pub const NETWORK_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub name: &'static str,
    pub trials: usize,
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
    pub tolerance: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_rel_error <= self.tolerance
    }
}

impl std::fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: max rel error {:.3e} (tol {:.0e}) over {} trials, {} coords checked, {} skipped at kinks",
            self.name, self.max_rel_error, self.tolerance, self.trials, self.checked, self.skipped
        )
    }
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Values bounded away from zero so no ReLU kink is within one step.
fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.gen_range(0.1..2.0);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

/// Distinct values at least 0.05 apart so every pooling window has a clear
/// maximum.
fn distinct(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let mut ranks: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(ranks.as_mut_slice(), rng);
    let data = ranks
        .iter()
        .map(|&r| r as f64 * 0.05 - 1.0 + rng.gen_range(0.0..0.01))
        .collect();
    Tensor::new(shape, data).unwrap()
}

/// Smooth reduction to a scalar: flatten, fixed affine map to two logits,
/// cross-entropy against fixed targets.
fn reduce(g: &mut Graph<f64>, v: Var, seed: u64) -> Result<Var> {
    let flat = g.flatten(v);
    let (n, f) = (g.value(flat).shape()[0], g.value(flat).shape()[1]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let w = g.constant(uniform(&mut rng, &[2, f], -1.0, 1.0));
    let b = g.constant(uniform(&mut rng, &[2], -0.5, 0.5));
    let logits = g.dense(flat, w, b)?;
    let targets: Vec<usize> = (0..n).map(|i| i % 2).collect();
    Ok(g.softmax_cross_entropy(logits, &targets)?.0)
}

fn run<F>(name: &'static str, trials: usize, tolerance: f64, mut trial: F) -> SuiteResult
where
    F: FnMut(u64) -> GradCheckReport,
{
    let mut out = SuiteResult {
        name,
        trials,
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
        tolerance,
    };
    for seed in 0..trials as u64 {
        let r = trial(seed);
        out.max_rel_error = out.max_rel_error.max(r.max_rel_error);
        out.checked += r.checked;
        out.skipped += r.skipped;
    }
    out
}

fn op_check(seed: u64) -> GradCheck {
    GradCheck {
        tolerance: OP_TOLERANCE,
        seed,
        ..Default::default()
    }
}

pub fn op_suite(trials: usize) -> Vec<SuiteResult> {
    let mut results = Vec::new();

    results.push(run("dense", trials, OP_TOLERANCE, |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = [
            uniform(&mut rng, &[3, 4], -1.0, 1.0),
            uniform(&mut rng, &[5, 4], -1.0, 1.0),
            uniform(&mut rng, &[5], -1.0, 1.0),
        ];
        grad_check(
            |g, v| {
                let y = g.dense(v[0], v[1], v[2])?;
                reduce(g, y, seed)
            },
            &inputs,
            &op_check(seed),
        )
        .unwrap()
    }));

    results.push(run("conv2d", trials, OP_TOLERANCE, |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = [
            uniform(&mut rng, &[1, 2, 6, 6], -1.0, 1.0),
            uniform(&mut rng, &[3, 2, 3, 3], -1.0, 1.0),
            uniform(&mut rng, &[3], -1.0, 1.0),
        ];
        grad_check(
            |g, v| {
                let y = g.conv2d(v[0], v[1], v[2])?;
                reduce(g, y, seed)
            },
            &inputs,
            &op_check(seed),
        )
        .unwrap()
    }));

    results.push(run("relu", trials, OP_TOLERANCE, |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = [away_from_zero(&mut rng, &[2, 3, 4, 4])];
        grad_check(
            |g, v| {
                let y = g.relu(v[0]);
                reduce(g, y, seed)
            },
            &inputs,
            &op_check(seed),
        )
        .unwrap()
    }));

    results.push(run("maxpool2d", trials, OP_TOLERANCE, |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = [distinct(&mut rng, &[2, 2, 4, 6])];
        grad_check(
            |g, v| {
                let y = g.maxpool2d(v[0])?;
                reduce(g, y, seed)
            },
            &inputs,
            &op_check(seed),
        )
        .unwrap()
    }));

    results.push(run("dropout", trials, OP_TOLERANCE, |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = [uniform(&mut rng, &[3, 10], -1.0, 1.0)];
        grad_check(
            |g, v| {
                // The same mask on every evaluation.
                let mut mask_rng = ChaCha8Rng::seed_from_u64(seed + 1000);
                let y = g.dropout(v[0], 0.3, Mode::Train, &mut mask_rng)?;
                reduce(g, y, seed)
            },
            &inputs,
            &op_check(seed),
        )
        .unwrap()
    }));

    results.push(run("spatial_dropout", trials, OP_TOLERANCE, |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = [uniform(&mut rng, &[2, 4, 3, 3], -1.0, 1.0)];
        grad_check(
            |g, v| {
                let mut mask_rng = ChaCha8Rng::seed_from_u64(seed + 2000);
                let y = g.spatial_dropout(v[0], 0.5, Mode::Train, &mut mask_rng)?;
                reduce(g, y, seed)
            },
            &inputs,
            &op_check(seed),
        )
        .unwrap()
    }));

    results.push(run("flatten+concat", trials, OP_TOLERANCE, |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = [
            uniform(&mut rng, &[2, 2, 2, 3], -1.0, 1.0),
            uniform(&mut rng, &[2, 5], -1.0, 1.0),
        ];
        grad_check(
            |g, v| {
                let flat = g.flatten(v[0]);
                let y = g.concat(flat, v[1])?;
                reduce(g, y, seed)
            },
            &inputs,
            &op_check(seed),
        )
        .unwrap()
    }));

    results.push(run("softmax_cross_entropy", trials, OP_TOLERANCE, |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = [uniform(&mut rng, &[4, 2], -3.0, 3.0)];
        let targets: Vec<usize> = (0..4).map(|_| rng.gen_range(0..2)).collect();
        grad_check(
            |g, v| Ok(g.softmax_cross_entropy(v[0], &targets)?.0),
            &inputs,
            &op_check(seed),
        )
        .unwrap()
    }));

    results
}

/// Eval-mode LodgedNet (C = 3, batch of one): one random coordinate of every
/// parameter tensor, the image and the texture vector per trial.
pub fn network_suite(trials: usize) -> SuiteResult {
    let config = LodgedNetConfig::new(3);
    run("full network (eval mode)", trials, NETWORK_TOLERANCE, |seed| {
        let model = LodgedNetModel::build(config, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inputs: Vec<Tensor<f64>> = model.parameters().iter().map(|p| p.cast()).collect();
        inputs.push(uniform(&mut rng, &[1, 3, 64, 128], -2.0, 2.0));
        inputs.push(uniform(&mut rng, &[1, config.texture_width()], 0.0, 1.0));
        let target = [rng.gen_range(0..2)];
        let n_params = model.parameters().len();
        let cfg = GradCheck {
            tolerance: NETWORK_TOLERANCE,
            coords_per_input: Some(1),
            nonsmooth_tolerance: Some(NETWORK_TOLERANCE),
            seed,
            ..Default::default()
        };
        grad_check(
            |g, v| {
                let logits = network(
                    g,
                    &config,
                    &v[..n_params],
                    v[n_params],
                    v[n_params + 1],
                    Mode::Eval,
                    &mut rand::rngs::mock::StepRng::new(0, 0),
                )?;
                Ok(g.softmax_cross_entropy(logits, &target)?.0)
            },
            &inputs,
            &cfg,
        )
        .unwrap()
    })
}
