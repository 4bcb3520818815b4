use anyhow::{bail, Result};
use fredn_core::decomposition::{
    fred_decompose, init_mask, ma_frequency_response, moving_average_decomp, topk_decomp, topk_default,
};
use fredn_core::dft::{n_freq, rfft, Normalization};
use fredn_core::gradcheck::gradcheck_tiny;
use fredn_core::losses::LossKind;
use fredn_core::model::Variant;
use fredn_core::signal::{
    gen_bspline_trend, gen_noise, gen_seasonal, spectral_proportions, SeasonalComponent, SyntheticSignal,
};
use fredn_core::training::Dataset;
use fredn_core::FrednError;
use ndarray::{s, Array2};

use crate::output::{ensure_dir, write_table};
use crate::{DecomposeArgs, GradcheckArgs, SynthArgs};

fn parse_season(spec: &str) -> Result<SeasonalComponent> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse()
            .map_err(|_| FrednError::config(format!("bad number '{s}' in --season {spec}")).into())
    };
    match parts.as_slice() {
        [c, a] => Ok(SeasonalComponent {
            cycles: num(c)?,
            amplitude: num(a)?,
            phase: 0.0,
        }),
        [c, a, p] => Ok(SeasonalComponent {
            cycles: num(c)?,
            amplitude: num(a)?,
            phase: num(p)?,
        }),
        _ => Err(FrednError::config(format!("--season expects cycles:amplitude[:phase], got '{spec}'")).into()),
    }
}

fn magnitudes(x: &[f64]) -> Result<Vec<f64>> {
    Ok(rfft(x, Normalization::Unnormalized)?.magnitudes().row(0).to_vec())
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let seasons = args
        .season
        .iter()
        .map(|s| parse_season(s))
        .collect::<Result<Vec<_>>>()?;
    let trend = gen_bspline_trend(args.knots, args.trend_degree, args.len, args.trend_amplitude, args.seed)?;
    let seasonal = gen_seasonal(&seasons, args.len)?;
    let noise = gen_noise(args.noise, args.len, args.seed.wrapping_add(1))?;
    let signal = SyntheticSignal::compose(trend, seasonal, noise, args.seed)?;
    ensure_dir(&args.out)?;

    write_table(
        &args.out.join("components.csv"),
        &["t", "trend", "seasonal", "noise", "composite"],
        (0..args.len).map(|t| {
            vec![
                t as f64,
                signal.trend[t],
                signal.seasonal[t],
                signal.noise[t],
                signal.composite[t],
            ]
        }),
    )?;
    let spectra = [&signal.trend, &signal.seasonal, &signal.noise, &signal.composite]
        .into_iter()
        .map(|v| magnitudes(v))
        .collect::<Result<Vec<_>>>()?;
    let nf = n_freq(args.len);
    write_table(
        &args.out.join("spectra.csv"),
        &["k", "trend", "seasonal", "noise", "composite"],
        (0..nf).map(|k| vec![k as f64, spectra[0][k], spectra[1][k], spectra[2][k], spectra[3][k]]),
    )?;
    let props = spectral_proportions(&signal)?;
    write_table(
        &args.out.join("proportions.csv"),
        &["k", "trend", "seasonal", "noise", "degenerate"],
        (0..nf).map(|k| {
            vec![
                k as f64,
                props.shares[[k, 0]],
                props.shares[[k, 1]],
                props.shares[[k, 2]],
                f64::from(u8::from(props.degenerate[k])),
            ]
        }),
    )?;
    // what the two heuristic decompositions make of the composite
    let x = Array2::from_shape_vec((1, args.len), signal.composite.clone())?;
    let ma = moving_average_decomp(x.view(), 25.min(args.len | 1).min(args.len))?;
    let tk = topk_decomp(x.view(), topk_default(args.len).clamp(1, nf))?;
    let ma_trend = magnitudes(ma.trend.row(0).as_slice().expect("contiguous"))?;
    let tk_season = magnitudes(tk.seasonal.row(0).as_slice().expect("contiguous"))?;
    write_table(
        &args.out.join("heuristics.csv"),
        &["k", "ma_trend", "topk_seasonal"],
        (0..nf).map(|k| vec![k as f64, ma_trend[k], tk_season[k]]),
    )?;
    println!(
        "wrote components, spectra, proportions and heuristics to {}",
        args.out.display()
    );
    Ok(())
}

pub fn decompose(args: DecomposeArgs) -> Result<()> {
    let dataset = Dataset::from_csv_path(&args.data)?;
    if args.channel >= dataset.channels() {
        bail!(FrednError::config(format!(
            "channel {} out of range (dataset has {})",
            args.channel,
            dataset.channels()
        )));
    }
    if args.start + args.len > dataset.rows() {
        return Err(FrednError::Data(format!(
            "segment {}..{} exceeds the {} rows of {}",
            args.start,
            args.start + args.len,
            dataset.rows(),
            args.data.display()
        ))
        .into());
    }
    let x = dataset
        .values
        .slice(s![args.start..args.start + args.len, args.channel])
        .to_owned()
        .insert_axis(ndarray::Axis(0));
    let result = match args.method.as_str() {
        "ma" => moving_average_decomp(x.view(), args.window)?,
        "topk" => topk_decomp(x.view(), args.k.unwrap_or_else(|| topk_default(args.len)))?,
        "fred" => fred_decompose(x.view(), &init_mask(n_freq(args.len), 1, args.order)?)?,
        other => bail!(FrednError::config(format!(
            "unknown method '{other}' (ma, topk or fred)"
        ))),
    };
    ensure_dir(&args.out)?;
    let (xr, tr, se) = (x.row(0), result.trend.row(0), result.seasonal.row(0));
    write_table(
        &args.out.join("series.csv"),
        &["t", "x", "trend", "seasonal"],
        (0..args.len).map(|t| vec![(args.start + t) as f64, xr[t], tr[t], se[t]]),
    )?;
    let mx = magnitudes(&xr.to_vec())?;
    let mt = magnitudes(&tr.to_vec())?;
    let ms = magnitudes(&se.to_vec())?;
    let n = args.len as f64;
    let mut header = vec!["k", "f", "input", "trend", "seasonal"];
    let with_h = args.method == "ma";
    if with_h {
        header.push("h_theory");
    }
    write_table(
        &args.out.join("spectrum.csv"),
        &header,
        (0..n_freq(args.len)).map(|k| {
            let f = k as f64 / n;
            let mut row = vec![k as f64, f, mx[k], mt[k], ms[k]];
            if with_h {
                row.push(ma_frequency_response(f, args.window).norm());
            }
            row
        }),
    )?;
    println!("wrote series.csv and spectrum.csv to {}", args.out.display());
    Ok(())
}

pub fn gradcheck(args: GradcheckArgs) -> Result<()> {
    if args.config != "tiny" {
        bail!(FrednError::config(format!(
            "unknown gradcheck config '{}' (only 'tiny')",
            args.config
        )));
    }
    let mut failures = 0;
    let mut worst = 0.0f64;
    for variant in Variant::ALL {
        for loss in LossKind::ALL {
            let r = gradcheck_tiny(variant, loss, args.seed)?;
            worst = worst.max(r.max_rel_err);
            let ok = r.passes(args.tol);
            failures += usize::from(!ok);
            println!(
                "{:<15} {:<9} {:>5} params  max rel err {:.2e}  {}",
                variant.name(),
                loss.name(),
                r.checked,
                r.max_rel_err,
                if ok { "ok" } else { "FAIL" }
            );
            let mut groups: Vec<(String, f64)> = Vec::new();
            for (name, err) in &r.per_tensor {
                let group = name.split('.').next().unwrap_or(name).to_string();
                match groups.iter_mut().find(|(g, _)| *g == group) {
                    Some((_, e)) => *e = e.max(*err),
                    None => groups.push((group, *err)),
                }
            }
            let line: Vec<String> = groups.iter().map(|(g, e)| format!("{g} {e:.1e}")).collect();
            println!("    {}", line.join(", "));
        }
    }
    println!("worst relative error {worst:.2e} (tolerance {:.0e})", args.tol);
    if failures > 0 {
        bail!("{failures} gradient checks exceeded the tolerance");
    }
    Ok(())
}
