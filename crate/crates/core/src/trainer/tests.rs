use super::*;
use crate::datapipe::{generate_synthetic, split_dataset, Label, SplitRatios, SynthConfig};
use crate::model::LodgedNetConfig;

fn tiny_dataset(n_per_class: usize, seed: u64) -> Dataset {
    let d = generate_synthetic(&SynthConfig {
        n_per_class,
        channels: 2,
        plot_height: 30,
        plot_width: 50,
        seed,
    })
    .unwrap();
    let manifest = split_dataset(&d.manifest, SplitRatios::default(), seed).unwrap();
    Dataset::new(manifest, d.images).unwrap()
}

fn fitted_model(dataset: &Dataset, seed: u64) -> LodgedNetModel {
    let mut model = LodgedNetModel::build(LodgedNetConfig::new(dataset.manifest.channel_count()), seed).unwrap();
    let crops: Vec<_> = crops(dataset, &(0..dataset.len()).collect::<Vec<_>>());
    model.set_stats(fit_normalization(&crops).unwrap()).unwrap();
    model
}

fn batch(model: &LodgedNetModel, dataset: &Dataset, indices: &[usize]) -> (Tensor<f32>, Tensor<f32>, Vec<usize>) {
    let samples: Vec<_> = indices
        .iter()
        .map(|&i| model.prepare(&dataset.images[i]).unwrap())
        .collect();
    let refs: Vec<_> = samples.iter().collect();
    let (x, t) = stack(model.config(), &refs).unwrap();
    let targets = indices
        .iter()
        .map(|&i| dataset.manifest.records()[i].label.index())
        .collect();
    (x, t, targets)
}

#[test]
fn perfect_and_majority_reports() {
    let truth: Vec<Label> = (0..10).map(|i| Label::from_index(i % 2).unwrap()).collect();
    let perfect = EvalReport::from_predictions(&truth, &truth).unwrap();
    assert_eq!(perfect.accuracy, 1.0);
    assert_eq!(perfect.confusion[0][1] + perfect.confusion[1][0], 0);

    let truth: Vec<Label> = (0..100)
        .map(|i| if i < 60 { Label::NonLodged } else { Label::Lodged })
        .collect();
    let majority = vec![Label::NonLodged; 100];
    let r = EvalReport::from_predictions(&truth, &majority).unwrap();
    assert!((r.accuracy - 0.6).abs() < 1e-12);
    assert_eq!(r.confusion, [[60, 0], [40, 0]]);
    assert_eq!(r.confusion.iter().flatten().sum::<usize>(), r.n_samples);
    assert_eq!(r.precision, [Some(0.6), None]);
    assert_eq!(r.recall, [Some(1.0), Some(0.0)]);
    let direct = truth.iter().zip(&majority).filter(|(a, b)| a == b).count() as f64 / 100.0;
    assert!((r.accuracy - direct).abs() <= 1e-12);
    assert!(r.to_string().contains("accuracy: 60.00%"));
    assert!(EvalReport::from_predictions(&[], &[]).is_err());
}

#[test]
fn one_step_lowers_the_batch_loss() {
    let dataset = tiny_dataset(4, 3);
    let mut failures = 0;
    for seed in 0..20 {
        let mut model = fitted_model(&dataset, seed);
        let (x, t, y) = batch(&model, &dataset, &[0, 1, 4, 5]);
        let before = batch_loss(&model, &x, &t, &y).unwrap();
        let mut adam = AdamState::new(AdamConfig::default(), model.parameters()).unwrap();
        let reported = train_step(&mut model, &mut adam, &x, &t, &y, Mode::Eval, &mut NoRng).unwrap();
        assert!((reported - before).abs() <= 1e-6 * before.abs().max(1.0));
        let after = batch_loss(&model, &x, &t, &y).unwrap();
        if after >= before {
            failures += 1;
        }
    }
    assert!(failures <= 1, "{failures} of 20 steps failed to lower the loss");
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let dataset = tiny_dataset(3, 1);
    let mut model = fitted_model(&dataset, 0);
    let original = model.parameters().to_vec();
    let (x, t, y) = batch(&model, &dataset, &[0, 3]);
    let cfg = AdamConfig {
        lr: 0.0,
        ..Default::default()
    };
    let mut adam = AdamState::new(cfg, model.parameters()).unwrap();
    let mut rng = sample_rng(1, 0);
    for _ in 0..3 {
        train_step(&mut model, &mut adam, &x, &t, &y, Mode::Train, &mut rng).unwrap();
    }
    assert_eq!(model.parameters(), original.as_slice());
}

#[test]
fn training_is_reproducible_and_keeps_best_epoch() {
    let dataset = tiny_dataset(8, 5);
    let config = TrainConfig {
        epochs: 3,
        batch_size: 4,
        seed: 11,
        ..Default::default()
    };
    let run = || {
        train(
            LodgedNetModel::build(LodgedNetConfig::new(2), 11).unwrap(),
            &dataset,
            &config,
        )
        .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.model, b.model);
    assert_eq!(a.history, b.history);
    assert_eq!(a.history.len(), 3);

    let best = a.history[a.best_epoch - 1].val_accuracy;
    assert!(a.history.iter().all(|r| r.val_accuracy <= best));
    assert!(a.history[..a.best_epoch - 1].iter().all(|r| r.val_accuracy < best));
    let report = evaluate(&a.model, &dataset, Split::Val).unwrap();
    assert!((report.accuracy - best).abs() < 1e-12);
    assert_eq!(report, evaluate(&a.model, &dataset, Split::Val).unwrap());
}

#[test]
fn training_needs_train_and_val() {
    let mut dataset = tiny_dataset(4, 2);
    for r in dataset.manifest.records_mut() {
        if r.split == Split::Val {
            r.split = Split::Train;
        }
    }
    let model = LodgedNetModel::build(LodgedNetConfig::new(2), 0).unwrap();
    assert!(matches!(
        train(model, &dataset, &TrainConfig::default()),
        Err(Error::Data(_))
    ));
    let model = LodgedNetModel::build(LodgedNetConfig::new(3), 0).unwrap();
    assert!(matches!(
        train(model, &dataset, &TrainConfig::default()),
        Err(Error::Input(_))
    ));
}

#[test]
fn evaluation_rejects_empty_splits_and_wrong_channels() {
    let dataset = tiny_dataset(2, 0);
    let model = fitted_model(&dataset, 0);
    assert!(matches!(
        evaluate(&model, &dataset, Split::Unassigned),
        Err(Error::Data(_))
    ));
    let other = LodgedNetModel::build(LodgedNetConfig::new(1), 0).unwrap();
    assert!(matches!(evaluate(&other, &dataset, Split::Train), Err(Error::Input(_))));
}

#[test]
fn history_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    let history = [
        EpochRecord {
            epoch: 1,
            train_loss: 0.5,
            val_accuracy: 0.75,
        },
        EpochRecord {
            epoch: 2,
            train_loss: 0.25,
            val_accuracy: 1.0,
        },
    ];
    write_history(&path, &history).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, "epoch,train_loss,val_accuracy\n1,0.5,0.75\n2,0.25,1\n");
}

#[test]
fn benchmark_reports_both_timings() {
    let dataset = tiny_dataset(1, 0);
    let model = fitted_model(&dataset, 0);
    assert!(matches!(
        benchmark(&model, &dataset.images[0], MIN_TRIALS - 1),
        Err(Error::Parameter(_))
    ));
    let r = benchmark(&model, &dataset.images[0], MIN_TRIALS).unwrap();
    assert_eq!((r.n_trials, r.warmup), (MIN_TRIALS, BENCH_WARMUP));
    for t in [r.forward, r.texture, r.total] {
        assert!(t.mean_ms > 0.0 && t.std_ms >= 0.0);
    }
    assert!(r.hardware_note.contains("GPU"));
}
