//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.
//!
//! The ETTh1 benchmark reads `FREDN_ETTH1_CSV`, falling back to
//! `data/ETTh1.csv` at the workspace root.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use fredn_core::decomposition::{lobe_peaks, ma_frequency_response, ma_transfer_estimate};
use fredn_core::dft::{dft_matrix, fft_full, irfft, n_freq, rfft, Normalization};
use fredn_core::gradcheck::gradcheck_tiny;
use fredn_core::losses::{loss_gradient_with, LossKind, SpectrumMode};
use fredn_core::model::{reachability, ModelConfig, ModelParams, Variant};
use fredn_core::signal::{gen_benchmark_series, gen_bspline_trend, spectral_decay_fit};
use fredn_core::training::{evaluate, repeat_last_baseline, train, Dataset, Schedule, TrainConfig};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;

const LOSSES: [LossKind; 4] = [
    LossKind::TimeMse,
    LossKind::TimeMae,
    LossKind::FreqMse,
    LossKind::FreqMae,
];

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0f64, String::new());
    for variant in Variant::ALL {
        for loss in LOSSES {
            let report = gradcheck_tiny(variant, loss, 7).map_err(|e| e.to_string())?;
            if report.max_rel_err > worst.0 || worst.1.is_empty() {
                worst = (
                    report.max_rel_err,
                    format!("{variant}/{} {}", loss.name(), report.worst_param),
                );
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst.0 < 1e-4 && secs < 60.0,
        format!(
            "max rel err {:.2e} at {} over 16 combinations, {secs:.1}s",
            worst.0, worst.1
        ),
    )
}

fn dft_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut note = |err: f64| worst = worst.max(err);
    for n in 1..=1024usize {
        let x: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let energy: f64 = x.iter().map(|v| v * v).sum();
        for norm in [Normalization::Unnormalized, Normalization::Orthonormal] {
            let fx = rfft(&x, norm).map_err(|e| e.to_string())?;
            let back = irfft(&fx, n).map_err(|e| e.to_string())?;
            for (a, b) in back.row(0).iter().zip(&x) {
                note((a - b).abs() / (1.0 + b.abs()));
            }
            let (a, b) = (normal(&mut rng), normal(&mut rng));
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let fy = rfft(&y, norm).map_err(|e| e.to_string())?;
            let fm = rfft(&mix, norm).map_err(|e| e.to_string())?;
            let scale = if norm == Normalization::Orthonormal {
                1.0
            } else {
                (n as f64).sqrt()
            };
            for ((m, p), q) in fm.data.iter().zip(fx.data.iter()).zip(fy.data.iter()) {
                note((m - (p * a + q * b)).norm() / scale);
            }
        }
        let full = fft_full(&x, Normalization::Orthonormal);
        let spec_energy: f64 = full.iter().map(|z| z.norm_sqr()).sum();
        note((spec_energy - energy).abs() / energy.max(1.0));

        let m = dft_matrix(n, Normalization::Orthonormal).map_err(|e| e.to_string())?;
        let half = rfft(&x, Normalization::Orthonormal).map_err(|e| e.to_string())?;
        for k in 0..n_freq(n) {
            let dense: Complex64 = m.row(k).iter().zip(&x).map(|(w, v)| w * v).sum();
            note((dense - half.data[[0, k]]).norm());
        }
    }
    // orthonormal frequency MSE is time MSE up to the constant tau / tau_freq
    for tau in [8usize, 96, 97, 336, 720, 1024] {
        let yh = Array2::from_shape_fn((3, tau), |_| normal(&mut rng));
        let y = Array2::from_shape_fn((3, tau), |_| normal(&mut rng));
        let gf = loss_gradient_with(LossKind::FreqMse, SpectrumMode::OrthonormalFull, yh.view(), y.view())
            .map_err(|e| e.to_string())?;
        let gt = loss_gradient_with(LossKind::TimeMse, SpectrumMode::OrthonormalFull, yh.view(), y.view())
            .map_err(|e| e.to_string())?;
        let c = n_freq(tau) as f64 / tau as f64;
        for (a, b) in gf.iter().zip(gt.iter()) {
            note((a - b / c).abs());
        }
    }
    check(worst < 1e-10, format!("worst deviation {worst:.2e} over n = 1..1024"))
}

fn spectral_decay() -> Outcome {
    let start = Instant::now();
    let mut summary = Vec::new();
    let mut ok = true;
    for degree in 1..=3usize {
        let mut passing = 0;
        let mut lowest = f64::INFINITY;
        for seed in 0..20u64 {
            let trend = gen_bspline_trend(8, degree, 720, 1.0, seed).map_err(|e| e.to_string())?;
            let spec = rfft(&trend, Normalization::Unnormalized).map_err(|e| e.to_string())?;
            let m = spectral_decay_fit(&spec, 4, 64).map_err(|e| e.to_string())?;
            lowest = lowest.min(m);
            if m >= degree as f64 - 0.5 {
                passing += 1;
            }
        }
        ok &= passing >= 18;
        summary.push(format!("m={degree}: {passing}/20 (min {lowest:.2})"));
    }
    summary.push(format!("{:.2}s", start.elapsed().as_secs_f64()));
    check(ok, summary.join(", "))
}

fn expressiveness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut max_reachable, mut min_unreachable) = (0.0f64, f64::INFINITY);
    let mut wrong = 0;
    for instance in 0..1000 {
        let d = rng.gen_range(2..=16);
        if instance % 2 == 0 {
            let x: Vec<Complex64> = (0..d)
                .map(|_| Complex64::new(normal(&mut rng), normal(&mut rng)))
                .collect();
            let z = Complex64::new(normal(&mut rng), normal(&mut rng)) * 5.0;
            let r = reachability(&x, z);
            let hit: Complex64 = r.weights.iter().zip(&x).map(|(w, v)| v * *w).sum();
            wrong += usize::from(!r.full_rank);
            max_reachable = max_reachable.max((hit - z).norm()).max(r.residual);
        } else {
            let dir = Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::PI));
            let x: Vec<Complex64> = (0..d).map(|_| dir * normal(&mut rng)).collect();
            let off = rng.gen_range(0.01..3.0);
            let z = dir * Complex64::new(normal(&mut rng), off);
            let r = reachability(&x, z);
            wrong += usize::from(r.full_rank);
            min_unreachable = min_unreachable.min(r.residual);
        }
    }
    check(
        wrong == 0 && max_reachable < 1e-8 && min_unreachable > 1e-3,
        format!(
            "reachable residual <= {max_reachable:.1e}, collinear residual >= {min_unreachable:.1e}, {wrong} rank errors, 1000 instances"
        ),
    )
}

fn parameter_ratio() -> Outcome {
    let mut ratios = Vec::new();
    for l in [96, 336, 720] {
        for tau in [96, 336, 720] {
            let real = ModelConfig {
                lookback: l,
                horizon: tau,
                ..ModelConfig::default()
            };
            let complex = ModelConfig {
                variant: Variant::ComplexLinear,
                ..real.clone()
            };
            let a = ModelParams::zeros(&real).param_count().spectral;
            let b = ModelParams::zeros(&complex).param_count().spectral;
            ratios.push(a as f64 / b as f64);
        }
    }
    let ok = ratios.iter().all(|&r| r == 0.5);
    check(
        ok,
        format!(
            "FreDN / complex spectral ratio {:?} over 9 shapes",
            ratios.first().unwrap()
        ),
    )
}

fn ma_sidelobes() -> Outcome {
    let (n, window) = (720, 25);
    let curve = ma_transfer_estimate(window, n, 256, 17).map_err(|e| e.to_string())?;
    let theory: Vec<f64> = (0..n_freq(n))
        .map(|b| ma_frequency_response(b as f64 / n as f64, window).norm())
        .collect();
    let got = lobe_peaks(&curve, n, window, 2);
    let want = lobe_peaks(&theory, n, window, 2);
    let ok = got.len() == 3
        && got
            .iter()
            .zip(&want)
            .all(|((gb, gm), (wb, wm))| gb.abs_diff(*wb) <= 1 && (gm - wm).abs() <= 0.1 * wm);
    let fmt = |p: &[(usize, f64)]| {
        p.iter()
            .map(|(b, m)| format!("{b}:{m:.3}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    check(
        ok,
        format!("peaks (bin:|H|) measured {} vs theory {}", fmt(&got), fmt(&want)),
    )
}

fn ablation() -> Outcome {
    let start = Instant::now();
    let values = gen_benchmark_series(5000, 3, 42).map_err(|e| e.to_string())?;
    let dataset = Dataset::from_values("synthetic", values);
    let mut means = Vec::new();
    for variant in [Variant::FreDN, Variant::MovDN, Variant::TopKDN] {
        let mut total = 0.0;
        for seed in 1..=3u64 {
            let cfg = TrainConfig {
                variant,
                seed,
                lookback: 96,
                horizon: 96,
                epochs: 20,
                ..TrainConfig::default()
            };
            let data = cfg.prepare(&dataset).map_err(|e| e.to_string())?;
            let out = train(&data, &cfg).map_err(|e| e.to_string())?;
            total += evaluate(&out.params, &data.test, 64).map_err(|e| e.to_string())?.mse;
        }
        means.push((variant, total / 3.0));
    }
    let fredn = means[0].1;
    let ok = means[1..].iter().all(|(_, m)| fredn <= *m);
    let listed = means
        .iter()
        .map(|(v, m)| format!("{v} {m:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    check(
        ok,
        format!("mean test MSE {listed}, {:.0}s", start.elapsed().as_secs_f64()),
    )
}

fn etth1_path() -> PathBuf {
    std::env::var_os("FREDN_ETTH1_CSV")
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
            crate_dir.ancestors().nth(2).unwrap_or(crate_dir).join("data/ETTh1.csv")
        })
}

fn etth1_benchmark() -> Outcome {
    let path = etth1_path();
    if !path.exists() {
        return Err(format!(
            "dataset not found at {} (set FREDN_ETTH1_CSV to the ETTh1 CSV)",
            path.display()
        ));
    }
    let start = Instant::now();
    let mut dataset = Dataset::from_csv_path(&path).map_err(|e| e.to_string())?;
    // 12/4/4 months of hourly rows under the 6:2:2 split
    dataset.truncate(14400);
    let cfg = TrainConfig {
        ett: true,
        lookback: 720,
        horizon: 96,
        ..TrainConfig::default()
    };
    let data = cfg.prepare(&dataset).map_err(|e| e.to_string())?;
    let out = train(&data, &cfg).map_err(|e| e.to_string())?;
    let report = evaluate(&out.params, &data.test, 64).map_err(|e| e.to_string())?;
    let baseline = repeat_last_baseline(&data.test).map_err(|e| e.to_string())?;
    let minutes = start.elapsed().as_secs_f64() / 60.0;
    let ok = report.mse <= 0.45 && report.mae <= 0.46 && minutes <= 30.0 && report.mse <= 0.9 * baseline.mse;
    check(
        ok,
        format!(
            "test MSE {:.4} MAE {:.4}, repeat-last MSE {:.4}, {minutes:.1} min",
            report.mse, report.mae, baseline.mse
        ),
    )
}

fn determinism() -> Outcome {
    let values = gen_benchmark_series(1200, 2, 5).map_err(|e| e.to_string())?;
    let dataset = Dataset::from_values("synthetic", values);
    let cfg = TrainConfig {
        lookback: 48,
        horizon: 24,
        epochs: 4,
        patience: 4,
        hidden_size: 32,
        dropout: 0.2,
        schedule: Schedule::Cosine,
        seed: 99,
        ..TrainConfig::default()
    };
    let data = cfg.prepare(&dataset).map_err(|e| e.to_string())?;
    let a = train(&data, &cfg).map_err(|e| e.to_string())?;
    let b = train(&data, &cfg).map_err(|e| e.to_string())?;
    let gap = a
        .history
        .iter()
        .zip(&b.history)
        .map(|(x, y)| (x.val_loss - y.val_loss).abs())
        .fold(0.0, f64::max);
    check(
        a.history.len() == b.history.len() && gap <= 1e-12,
        format!("{} epochs, max val-loss gap {gap:.1e}", a.history.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient oracle", gradient_oracle),
        ("DFT suite", dft_suite),
        ("trend spectral decay", spectral_decay),
        ("real-weight expressiveness", expressiveness),
        ("parameter-count ratio", parameter_ratio),
        ("moving-average sidelobes", ma_sidelobes),
        ("ablation ordering", ablation),
        ("ETTh1 benchmark", etth1_benchmark),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
