//! Synthetic trend + seasonal + noise signals and their spectral make-up.
//!
//! Trends are periodic B-splines on a uniform knot grid. The DFT of a finite
//! window only sees the periodic extension of the signal, so a spline that
//! wraps smoothly is what exhibits the `|k|^-m` decay of a Sobolev-smooth
//! function; an open spline would carry an edge jump and decay like `1/k`.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::dft::{self, Normalization, Spectrum};
use crate::error::{FrednError, Result};

/// Bins whose magnitude falls below this fraction of the spectrum peak are
/// treated as exact zeros (they are round-off, not signal).
const ZERO_BIN_REL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSignal {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub noise: Vec<f64>,
    pub composite: Vec<f64>,
    pub length: usize,
    pub seed: u64,
}

impl SyntheticSignal {
    pub fn compose(trend: Vec<f64>, seasonal: Vec<f64>, noise: Vec<f64>, seed: u64) -> Result<Self> {
        let length = trend.len();
        if seasonal.len() != length || noise.len() != length {
            return Err(FrednError::dim(format!(
                "component lengths differ: trend {}, seasonal {}, noise {}",
                length,
                seasonal.len(),
                noise.len()
            )));
        }
        let composite = trend
            .iter()
            .zip(&seasonal)
            .zip(&noise)
            .map(|((t, s), n)| t + s + n)
            .collect();
        Ok(SyntheticSignal {
            trend,
            seasonal,
            noise,
            composite,
            length,
            seed,
        })
    }
}

/// Parameters of one sinusoid: `amplitude * cos(2 pi cycles t / len + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeasonalComponent {
    /// Cycles per window; non-integer values fall between DFT bins.
    pub cycles: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// Cardinal B-spline of the given degree, supported on `[0, degree + 1)`.
fn cardinal_bspline(degree: usize, x: f64) -> f64 {
    if x < 0.0 || x >= (degree + 1) as f64 {
        return 0.0;
    }
    // Cox-de Boor on integer knots
    let mut basis: Vec<f64> = (0..=degree)
        .map(|j| if x >= j as f64 && x < (j + 1) as f64 { 1.0 } else { 0.0 })
        .collect();
    for p in 1..=degree {
        for j in 0..=(degree - p) {
            let jf = j as f64;
            let pf = p as f64;
            basis[j] = ((x - jf) * basis[j] + (jf + pf + 1.0 - x) * basis[j + 1]) / pf;
        }
    }
    basis[0]
}

/// Evaluates the periodic spline `sum_j c_j B(n t - j mod n)` on the grid
/// `t = i / length`, `n = coefficients.len()`.
pub fn periodic_bspline(coefficients: &[f64], degree: usize, length: usize) -> Result<Vec<f64>> {
    let n = coefficients.len();
    if degree == 0 {
        return Err(FrednError::config("B-spline degree must be at least 1"));
    }
    if n < degree + 1 {
        return Err(FrednError::config(format!(
            "need at least degree + 1 = {} knots, got {}",
            degree + 1,
            n
        )));
    }
    if length < 2 {
        return Err(FrednError::config("trend length must be at least 2"));
    }
    let nf = n as f64;
    Ok((0..length)
        .map(|i| {
            let u = i as f64 / length as f64 * nf;
            coefficients
                .iter()
                .enumerate()
                .map(|(j, &c)| {
                    let x = (u - j as f64).rem_euclid(nf);
                    c * cardinal_bspline(degree, x)
                })
                .sum()
        })
        .collect())
}

/// Random periodic B-spline trend. Control coefficients follow a scaled
/// Gaussian random walk, so the curve wanders rather than oscillates.
pub fn gen_bspline_trend(
    knot_count: usize,
    degree: usize,
    length: usize,
    amplitude: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if degree == 0 {
        return Err(FrednError::config("B-spline degree must be at least 1"));
    }
    if knot_count < degree + 1 {
        return Err(FrednError::config(format!(
            "knot_count {} must be at least degree + 1 = {}",
            knot_count,
            degree + 1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = amplitude / (knot_count as f64).sqrt();
    let mut level = 0.0;
    let coefficients: Vec<f64> = (0..knot_count)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            level += z;
            level * scale
        })
        .collect();
    periodic_bspline(&coefficients, degree, length)
}

pub fn gen_seasonal(components: &[SeasonalComponent], length: usize) -> Result<Vec<f64>> {
    let nyquist = length as f64 / 2.0;
    for c in components {
        if !(c.amplitude >= 0.0) {
            return Err(FrednError::config(format!("negative amplitude {}", c.amplitude)));
        }
        if !(c.cycles >= 0.0 && c.cycles < nyquist) {
            return Err(FrednError::config(format!(
                "frequency {} cycles is outside [0, {}) for length {}",
                c.cycles, nyquist, length
            )));
        }
    }
    Ok((0..length)
        .map(|t| {
            components
                .iter()
                .map(|c| c.amplitude * (2.0 * PI * c.cycles * t as f64 / length as f64 + c.phase).cos())
                .sum()
        })
        .collect())
}

pub fn gen_noise(std: f64, length: usize, seed: u64) -> Result<Vec<f64>> {
    if !(std >= 0.0) {
        return Err(FrednError::config(format!("noise std must be non-negative, got {std}")));
    }
    if std == 0.0 {
        return Ok(vec![0.0; length]);
    }
    let normal = Normal::new(0.0, std).map_err(|e| FrednError::config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..length).map(|_| normal.sample(&mut rng)).collect())
}

/// Per-bin shares of trend, seasonal and noise magnitude (columns 0, 1, 2).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProportions {
    pub shares: Array2<f64>,
    /// Bins where every component is (numerically) zero; shares there are 1/3.
    pub degenerate: Vec<bool>,
}

pub fn spectral_proportions(signal: &SyntheticSignal) -> Result<SpectralProportions> {
    let mags: Vec<Vec<f64>> = [&signal.trend, &signal.seasonal, &signal.noise]
        .iter()
        .map(|c| dft::rfft(c, Normalization::Unnormalized).map(|s| s.data.row(0).iter().map(|z| z.norm()).collect()))
        .collect::<Result<_>>()?;
    let nf = mags[0].len();
    let totals: Vec<f64> = (0..nf).map(|k| mags.iter().map(|m| m[k]).sum()).collect();
    let peak = totals.iter().cloned().fold(0.0, f64::max);
    let mut shares = Array2::zeros((nf, 3));
    let mut degenerate = vec![false; nf];
    for k in 0..nf {
        if totals[k] <= ZERO_BIN_REL * peak || totals[k] == 0.0 {
            degenerate[k] = true;
            shares.row_mut(k).fill(1.0 / 3.0);
        } else {
            for c in 0..3 {
                shares[[k, c]] = mags[c][k] / totals[k];
            }
        }
    }
    Ok(SpectralProportions { shares, degenerate })
}

/// Least-squares slope of `log |X_k|` against `log k` over `k_min..=k_max`,
/// returned with the sign flipped so a `C / k^m` spectrum gives `m`.
pub fn decay_exponent(magnitudes: &[f64], k_min: usize, k_max: usize) -> Result<f64> {
    if k_min < 1 || k_max <= k_min {
        return Err(FrednError::Fit(format!("invalid bin range [{k_min}, {k_max}]")));
    }
    let peak = magnitudes.iter().cloned().fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = (k_min..=k_max.min(magnitudes.len().saturating_sub(1)))
        .filter(|&k| magnitudes[k] > ZERO_BIN_REL * peak && magnitudes[k] > 0.0)
        .map(|k| ((k as f64).ln(), magnitudes[k].ln()))
        .collect();
    if pts.len() < 2 {
        return Err(FrednError::Fit(format!("only {} usable bins in range", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(-sxy / sxx)
}

/// [`decay_exponent`] on the first row of a spectrum.
pub fn spectral_decay_fit(spectrum: &Spectrum, k_min: usize, k_max: usize) -> Result<f64> {
    if spectrum.channels() == 0 {
        return Err(FrednError::EmptyInput);
    }
    let mags: Vec<f64> = spectrum.data.row(0).iter().map(|z| z.norm()).collect();
    decay_exponent(&mags, k_min, k_max)
}

/// Multichannel trend + seasonal + noise series used for model comparisons.
/// Each channel has a cubic periodic B-spline trend (one knot per 250
/// steps), daily- and weekly-like cycles of periods 24 and 168 plus a
/// channel-specific off-grid cycle, and Gaussian noise of std 0.3.
pub fn gen_benchmark_series(length: usize, channels: usize, seed: u64) -> Result<Array2<f64>> {
    if length < 400 {
        return Err(FrednError::config("benchmark series needs at least 400 steps"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Array2::zeros((length, channels));
    let n = length as f64;
    for c in 0..channels {
        let trend = gen_bspline_trend(
            (length / 250).max(4),
            3,
            length,
            3.0,
            seed.wrapping_add(1000 + c as u64),
        )?;
        let mut phase = || 2.0 * PI * rand::Rng::gen::<f64>(&mut rng);
        let comps = [
            SeasonalComponent {
                cycles: n / 24.0,
                amplitude: 1.0,
                phase: phase(),
            },
            SeasonalComponent {
                cycles: n / 168.0,
                amplitude: 0.6,
                phase: phase(),
            },
            SeasonalComponent {
                cycles: n / (37.3 + 5.1 * c as f64),
                amplitude: 0.4,
                phase: phase(),
            },
        ];
        let seasonal = gen_seasonal(&comps, length)?;
        let noise = gen_noise(0.3, length, seed.wrapping_add(2000 + c as u64))?;
        for t in 0..length {
            out[[t, c]] = trend[t] + seasonal[t] + noise[t];
        }
    }
    Ok(out)
}
