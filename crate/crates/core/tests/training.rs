use fredn_core::losses::LossKind;
use fredn_core::model::Variant;
use fredn_core::training::{
    evaluate, mean_loss, metrics, prepare, repeat_last_baseline, targets, train, Dataset, Schedule, SplitRatios,
    Standardizer, TrainConfig,
};
use ndarray::{s, Array2};

fn small_config() -> TrainConfig {
    TrainConfig {
        lookback: 48,
        horizon: 24,
        batch_size: 32,
        lr: 2e-3,
        epochs: 6,
        patience: 3,
        schedule: Schedule::Constant,
        loss: LossKind::TimeMse,
        embed_dim: 4,
        hidden_size: 32,
        depth: 2,
        dropout: 0.1,
        ma_window: 9,
        ..TrainConfig::default()
    }
}

fn sinusoids(rows: usize, channels: usize) -> Dataset {
    let values = Array2::from_shape_fn((rows, channels), |(t, c)| {
        let t = t as f64;
        (t * std::f64::consts::TAU / (17.3 + 4.0 * c as f64)).sin() + 0.002 * t
    });
    Dataset::from_values("sines", values)
}

#[test]
fn splits_do_not_leak() {
    // each cell holds its own row index, so windows reveal which rows they read
    let values = Array2::from_shape_fn((1000, 2), |(t, _)| t as f64);
    let data = prepare(
        &Dataset::from_values("index", values),
        SplitRatios::DEFAULT,
        24,
        12,
        false,
    )
    .unwrap();
    let r = &data.ranges;
    assert!(r.train.end <= r.val.start && r.val.end <= r.test.start);
    let rows_of = |set: &fredn_core::training::WindowSet| {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut in_hi, mut tgt_lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..set.len() {
            let (x, y) = set.get(i);
            lo = lo.min(x[[0, 0]]);
            hi = hi.max(y[[0, y.ncols() - 1]]);
            in_hi = in_hi.max(x[[0, x.ncols() - 1]]);
            tgt_lo = tgt_lo.min(y[[0, 0]]);
        }
        (lo as usize, hi as usize, in_hi as usize, tgt_lo as usize)
    };
    let (_, train_hi, _, _) = rows_of(&data.train);
    let (_, val_hi, _, val_tgt_lo) = rows_of(&data.val);
    let (_, test_hi, _, test_tgt_lo) = rows_of(&data.test);
    assert!(train_hi < r.train.end);
    assert_eq!(val_tgt_lo, r.val.start);
    assert!(val_hi < r.val.end);
    assert_eq!(test_tgt_lo, r.test.start);
    assert_eq!(test_hi, 999);
    assert!(train_hi < val_tgt_lo && val_hi < test_tgt_lo);
}

#[test]
fn standardizer_ignores_held_out_rows() {
    let base = sinusoids(1000, 3);
    let mut spiked = base.clone();
    spiked
        .values
        .slice_mut(s![700.., ..])
        .mapv_inplace(|v| v * 100.0 + 50.0);
    let a = prepare(&base, SplitRatios::DEFAULT, 48, 24, true).unwrap();
    let b = prepare(&spiked, SplitRatios::DEFAULT, 48, 24, true).unwrap();
    assert_eq!(a.standardizer, b.standardizer);
    let fitted = Standardizer::fit(base.values.slice(s![..700, ..])).unwrap();
    assert_eq!(a.standardizer, fitted);
}

#[test]
fn early_stopping_keeps_the_best_epoch() {
    let cfg = TrainConfig {
        epochs: 5,
        patience: 2,
        lr: 2e-2,
        ..small_config()
    };
    let data = cfg.prepare(&sinusoids(900, 2)).unwrap();
    let out = train(&data, &cfg).unwrap();
    let min = out.history.iter().map(|h| h.val_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(out.best_val_loss, min);
    assert_eq!(out.history[out.best_epoch - 1].val_loss, min);
    let again = mean_loss(&out.params, &data.val, cfg.loss, cfg.batch_size).unwrap();
    assert!((again - min).abs() <= 1e-12 * min.max(1.0));
}

#[test]
fn seeded_runs_repeat_exactly() {
    let cfg = TrainConfig {
        epochs: 3,
        patience: 3,
        ..small_config()
    };
    let data = cfg.prepare(&sinusoids(800, 2)).unwrap();
    let a = train(&data, &cfg).unwrap();
    let b = train(&data, &cfg).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.params, b.params);
    let c = train(
        &data,
        &TrainConfig {
            seed: cfg.seed + 1,
            ..cfg.clone()
        },
    )
    .unwrap();
    assert_ne!(a.history, c.history);
}

#[test]
fn learns_a_sinusoid_better_than_repeating_the_last_value() {
    for variant in Variant::ALL {
        let cfg = TrainConfig {
            epochs: 10,
            patience: 10,
            variant,
            dropout: 0.0,
            ..small_config()
        };
        let data = cfg.prepare(&sinusoids(1000, 1)).unwrap();
        let out = train(&data, &cfg).unwrap();
        let steps = out.history.len() * data.train.len().div_ceil(cfg.batch_size);
        assert!(steps >= 200, "{steps} steps");
        let report = evaluate(&out.params, &data.test, 64).unwrap();
        let baseline = repeat_last_baseline(&data.test).unwrap();
        assert!(
            report.mse < 0.5 * baseline.mse,
            "{variant}: {} vs {}",
            report.mse,
            baseline.mse
        );
    }
}

#[test]
fn perfect_prediction_scores_zero() {
    let data = prepare(&sinusoids(400, 2), SplitRatios::DEFAULT, 24, 12, true).unwrap();
    let y = targets(&data.test);
    let m = metrics(&y, &y).unwrap();
    assert_eq!((m.mse, m.mae), (0.0, 0.0));
}
