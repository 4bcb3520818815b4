use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fredn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fredn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_series(dir: &Path, rows: usize) -> PathBuf {
    let path = dir.join("series.csv");
    let mut text = String::from("date,a,b\n");
    for t in 0..rows {
        let x = t as f64;
        text.push_str(&format!(
            "2021-01-01 {t},{:.6},{:.6}\n",
            (x / 5.0).sin() + 0.01 * x,
            (x / 11.0).cos()
        ));
    }
    fs::write(&path, text).unwrap();
    path
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

const SMALL: [&str; 16] = [
    "--lookback",
    "32",
    "--horizon",
    "16",
    "--d",
    "2",
    "--hidden",
    "16",
    "--epochs",
    "2",
    "--patience",
    "2",
    "--batch",
    "16",
    "--ma-window",
    "5",
];

#[test]
fn train_then_eval() {
    let dir = TempDir::new().unwrap();
    let data = write_series(dir.path(), 400);
    let out = dir.path().join("run");
    let mut args = vec![
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend(SMALL);
    let res = fredn(&args);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    for f in ["config.json", "checkpoint.json", "history.csv", "val_report.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    assert_eq!(header(&out.join("history.csv")), "epoch,train_loss,val_loss,lr");
    let config: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(config["lookback"], 32);
    assert_eq!(config["horizon"], 16);

    let report_path = dir.path().join("test.json");
    let preds = dir.path().join("pred.csv");
    let res = fredn(&[
        "eval",
        "--checkpoint",
        out.join("checkpoint.json").to_str().unwrap(),
        "--config",
        out.join("config.json").to_str().unwrap(),
        "--dump-predictions",
        preds.to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert!(report["mse"].as_f64().unwrap() >= 0.0);
    assert!(report["mae"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["per_horizon_mse"].as_array().unwrap().len(), 16);
    assert_eq!(header(&preds), "window,channel,step,y,y_hat");

    // the resolved config alone reproduces the run
    let again = dir.path().join("again");
    let res = fredn(&[
        "train",
        "--config",
        out.join("config.json").to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(
        fs::read_to_string(out.join("history.csv")).unwrap(),
        fs::read_to_string(again.join("history.csv")).unwrap()
    );
}

#[test]
fn eval_rejects_mismatched_checkpoint() {
    let dir = TempDir::new().unwrap();
    let data = write_series(dir.path(), 400);
    let out = dir.path().join("run");
    let mut args = vec![
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend(SMALL);
    assert_eq!(code(&fredn(&args)), 0);
    let res = fredn(&[
        "eval",
        "--checkpoint",
        out.join("checkpoint.json").to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--lookback",
        "48",
    ]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("48"), "{}", stderr(&res));
}

#[test]
fn missing_file_is_a_data_error() {
    let res = fredn(&["train", "--data", "/nonexistent/etth1.csv"]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("/nonexistent/etth1.csv"));
}

#[test]
fn malformed_csv_reports_the_line() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "date,a\nt0,1.0\nt1,oops\n").unwrap();
    let res = fredn(&["train", "--data", path.to_str().unwrap()]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("line 3"), "{}", stderr(&res));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(&path, r#"{"lookback": 96, "learning_rate": 0.1}"#).unwrap();
    let res = fredn(&["train", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("learning_rate"), "{}", stderr(&res));
    assert_eq!(code(&fredn(&["train", "--lookback", "many"])), 1);
    assert_eq!(code(&fredn(&["frobnicate"])), 1);
}

#[test]
fn divergence_exits_with_three() {
    let dir = TempDir::new().unwrap();
    let data = write_series(dir.path(), 400);
    let out = dir.path().join("run");
    let mut args = vec![
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--lr",
        "1e300",
    ];
    args.extend(SMALL);
    let res = fredn(&args);
    assert_eq!(code(&res), 3, "{}", stderr(&res));
    assert!(stderr(&res).contains("epoch"));
}

#[test]
fn synth_writes_four_tables() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("synth");
    let res = fredn(&[
        "synth",
        "--len",
        "256",
        "--season",
        "8:1.0",
        "--season",
        "20.5:0.5:1.2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    for f in ["components.csv", "spectra.csv", "proportions.csv", "heuristics.csv"] {
        let text = fs::read_to_string(out.join(f)).unwrap();
        assert!(text.lines().count() > 2, "{f} is empty");
    }
    let components = fs::read_to_string(out.join("components.csv")).unwrap();
    assert_eq!(components.lines().count(), 257);
    for line in components.lines().skip(1) {
        let v: Vec<f64> = line.split(',').skip(1).map(|s| s.parse().unwrap()).collect();
        assert!((v[0] + v[1] + v[2] - v[3]).abs() < 1e-9, "{line}");
    }
    assert_eq!(
        code(&fredn(&[
            "synth",
            "--season",
            "nonsense",
            "--out",
            out.to_str().unwrap()
        ])),
        1
    );
}

#[test]
fn decompose_ma_includes_theory() {
    let dir = TempDir::new().unwrap();
    let data = write_series(dir.path(), 800);
    for method in ["ma", "topk", "fred"] {
        let out = dir.path().join(method);
        let res = fredn(&[
            "decompose",
            "--method",
            method,
            "--window",
            "25",
            "--data",
            data.to_str().unwrap(),
            "--channel",
            "0",
            "--len",
            "720",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&res), 0, "{method}: {}", stderr(&res));
        assert_eq!(fs::read_to_string(out.join("series.csv")).unwrap().lines().count(), 721);
        let spec_header = header(&out.join("spectrum.csv"));
        assert_eq!(spec_header.contains("h_theory"), method == "ma", "{spec_header}");
    }
    let out = dir.path().join("bad");
    let res = fredn(&[
        "decompose",
        "--method",
        "ma",
        "--data",
        data.to_str().unwrap(),
        "--channel",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_ne!(code(&res), 0);
}

#[test]
fn gradcheck_passes() {
    let res = fredn(&["gradcheck", "--config", "tiny"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains("fredn") && text.contains("complex-linear"), "{text}");
}
