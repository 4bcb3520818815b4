use std::path::PathBuf;

use anyhow::{Context, Result};
use fredn_core::model::{load_checkpoint, save_checkpoint};
use fredn_core::training::{self, evaluate, predict_windows, targets, Dataset};
use fredn_core::FrednError;

use crate::config::{apply_data, apply_hyper, RunConfig};
use crate::output::{ensure_dir, write_json, write_table};
use crate::{EvalArgs, TrainArgs};

pub fn train(args: TrainArgs) -> Result<()> {
    let mut run = match &args.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if args.data.is_some() {
        run.data = args.data.clone();
    }
    if args.out.is_some() {
        run.out = args.out.clone();
    }
    apply_hyper(&mut run.train, &args.hyper)?;
    apply_data(&mut run.train, &args.data_opts);
    run.train.validate()?;
    let data_path = run
        .data
        .clone()
        .ok_or_else(|| FrednError::config("no dataset given (use --data or a config file with \"data\")"))?;
    let dataset = Dataset::from_csv_path(&data_path)?;
    let out = run
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{}-{}", dataset.name, run.train.variant)));
    run.out = Some(out.clone());
    ensure_dir(&out)?;
    run.write(&out.join("config.json"))?;

    let prepared = run.train.prepare(&dataset)?;
    eprintln!(
        "{}: {} rows x {} channels; windows train {} / val {} / test {}",
        dataset.name,
        dataset.rows(),
        dataset.channels(),
        prepared.train.len(),
        prepared.val.len(),
        prepared.test.len()
    );
    let outcome = training::train(&prepared, &run.train)?;
    for r in &outcome.history {
        eprintln!(
            "epoch {:>3}  lr {:.3e}  train {:.6}  val {:.6}",
            r.epoch, r.lr, r.train_loss, r.val_loss
        );
    }

    save_checkpoint(&outcome.params, &out.join("checkpoint.json"))?;
    write_table(
        &out.join("history.csv"),
        &["epoch", "train_loss", "val_loss", "lr"],
        outcome
            .history
            .iter()
            .map(|r| vec![r.epoch as f64, r.train_loss, r.val_loss, r.lr]),
    )?;
    let report = evaluate(&outcome.params, &prepared.val, run.train.batch_size)?;
    write_json(&out.join("val_report.json"), &report)?;
    println!(
        "best epoch {} (val loss {:.6}); validation mse {:.6} mae {:.6}; artifacts in {}",
        outcome.best_epoch,
        outcome.best_val_loss,
        report.mse,
        report.mae,
        out.display()
    );
    Ok(())
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let params = load_checkpoint(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let mut run = match &args.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if args.data.is_some() {
        run.data = args.data.clone();
    }
    apply_data(&mut run.train, &args.data_opts);
    let model = &params.config;
    for (name, flag, have) in [
        ("lookback", args.lookback, model.lookback),
        ("horizon", args.horizon, model.horizon),
    ] {
        if let Some(v) = flag {
            if v != have {
                return Err(
                    FrednError::config(format!("--{name} {v} does not match the checkpoint's {name} {have}")).into(),
                );
            }
        }
    }
    run.train.lookback = model.lookback;
    run.train.horizon = model.horizon;
    if let Some(b) = args.batch {
        run.train.batch_size = b;
    }
    let data_path = run
        .data
        .clone()
        .ok_or_else(|| FrednError::config("no dataset given (use --data or --config)"))?;
    let dataset = Dataset::from_csv_path(&data_path)?;
    if dataset.channels() != model.channels {
        return Err(FrednError::config(format!(
            "dataset has shape ({} rows x {} channels) but the checkpoint expects {} channels x {} lookback",
            dataset.rows(),
            dataset.channels(),
            model.channels,
            model.lookback
        ))
        .into());
    }
    let prepared = run.train.prepare(&dataset)?;
    let set = match args.split.as_str() {
        "test" => &prepared.test,
        "val" => &prepared.val,
        other => return Err(FrednError::config(format!("unknown split '{other}' (test or val)")).into()),
    };
    let report = evaluate(&params, set, run.train.batch_size)?;
    if let Some(path) = &args.dump_predictions {
        let pred = predict_windows(&params, set, run.train.batch_size)?;
        let truth = targets(set);
        let (n, c, t) = pred.dim();
        let rows = (0..n).flat_map(|w| {
            let (pred, truth) = (&pred, &truth);
            (0..c).flat_map(move |ch| {
                (0..t).map(move |s| vec![w as f64, ch as f64, s as f64, truth[[w, ch, s]], pred[[w, ch, s]]])
            })
        });
        write_table(path, &["window", "channel", "step", "y", "y_hat"], rows)?;
    }
    match &args.out {
        Some(p) => write_json(p, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}
