//! Trend/season decomposition: the learnable frequency gate plus the
//! moving-average and top-K baselines it is compared against.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dft::{self, Planes};
use crate::error::{FrednError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecompositionMethod {
    FreD,
    MovingAverage,
    TopK,
}

/// Time-domain split of a `channels x L` signal.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    pub trend: Array2<f64>,
    pub seasonal: Array2<f64>,
    pub method: DecompositionMethod,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Learnable gate `M` of shape `n_freq x embed_dim`; `sigmoid(M)` is the
/// trend share of each bin, `1 - sigmoid(M)` the seasonal share.
#[derive(Debug, Clone, PartialEq)]
pub struct DisentanglerMask {
    pub weights: Array2<f64>,
    pub init_order: f64,
}

impl DisentanglerMask {
    pub fn n_freq(&self) -> usize {
        self.weights.nrows()
    }

    pub fn embed_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn trend_share(&self) -> Array2<f64> {
        self.weights.mapv(sigmoid)
    }
}

/// Smoothness prior: row `k` is `-m * ln(1 + k)`, so the trend share starts
/// at 1/2 for DC and falls off with frequency.
pub fn init_mask(n_freq: usize, embed_dim: usize, m: f64) -> Result<DisentanglerMask> {
    if !(m >= 1.0) {
        return Err(FrednError::config(format!("mask init order must be >= 1, got {m}")));
    }
    Ok(DisentanglerMask {
        weights: Array2::from_shape_fn((n_freq, embed_dim), |(k, _)| -m * (1.0 + k as f64).ln()),
        init_order: m,
    })
}

/// Gates an embedded spectrum. Rows of `spectrum` are `(channel, embed)`
/// pairs with the embedding index varying fastest, so row `r` uses mask
/// column `r % embed_dim`. The mask is shared across channels.
pub fn fred_split(spectrum: &Planes, mask: &DisentanglerMask) -> Result<(Planes, Planes)> {
    let d = mask.embed_dim();
    if spectrum.re.ncols() != mask.n_freq() || d == 0 || spectrum.re.nrows() % d != 0 {
        return Err(FrednError::dim(format!(
            "spectrum {:?} does not fit mask {:?}",
            spectrum.re.dim(),
            mask.weights.dim()
        )));
    }
    let share = mask.trend_share();
    let mut trend = spectrum.clone();
    let mut season = spectrum.clone();
    for r in 0..spectrum.re.nrows() {
        let i = r % d;
        for k in 0..mask.n_freq() {
            let s = share[[k, i]];
            let (re, im) = (spectrum.re[[r, k]], spectrum.im[[r, k]]);
            trend.re[[r, k]] = re * s;
            trend.im[[r, k]] = im * s;
            // subtract rather than scale by (1 - s) so the parts add back exactly
            season.re[[r, k]] = re - trend.re[[r, k]];
            season.im[[r, k]] = im - trend.im[[r, k]];
        }
    }
    Ok((trend, season))
}

/// Frequency-gate decomposition of a plain `channels x L` signal with a
/// single-column mask, returned in the time domain.
pub fn fred_decompose(x: ArrayView2<f64>, mask: &DisentanglerMask) -> Result<DecompositionResult> {
    let l = x.ncols();
    if l == 0 {
        return Err(FrednError::EmptyInput);
    }
    if mask.embed_dim() != 1 {
        return Err(FrednError::dim(
            "time-domain FreD decomposition needs a single-column mask",
        ));
    }
    let spec = dft::rfft_planes(x);
    let (trend_spec, _) = fred_split(&spec, mask)?;
    let trend = dft::irfft_planes(&trend_spec, l);
    let seasonal = &x - &trend;
    Ok(DecompositionResult {
        trend,
        seasonal,
        method: DecompositionMethod::FreD,
    })
}

fn check_window(window: usize, len: usize) -> Result<()> {
    if window % 2 == 0 {
        return Err(FrednError::config(format!(
            "moving-average window must be odd, got {window}"
        )));
    }
    if window > len {
        return Err(FrednError::config(format!(
            "window {window} exceeds series length {len}"
        )));
    }
    Ok(())
}

/// Centered moving average with edge-replication padding, row by row.
pub fn moving_average(x: ArrayView2<f64>, window: usize) -> Result<Array2<f64>> {
    let l = x.ncols();
    check_window(window, l)?;
    let h = (window - 1) / 2;
    let inv = 1.0 / window as f64;
    let mut out = Array2::zeros(x.dim());
    for (row, mut dst) in x.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
        // prefix sums over the padded sequence
        let padded: Vec<f64> = (0..l + 2 * h)
            .map(|j| row[(j as isize - h as isize).clamp(0, l as isize - 1) as usize])
            .collect();
        let mut prefix = vec![0.0; padded.len() + 1];
        for (j, v) in padded.iter().enumerate() {
            prefix[j + 1] = prefix[j] + v;
        }
        for t in 0..l {
            dst[t] = (prefix[t + window] - prefix[t]) * inv;
        }
    }
    Ok(out)
}

/// Transpose of [`moving_average`] as a linear map.
pub fn moving_average_adjoint(g: ArrayView2<f64>, window: usize) -> Result<Array2<f64>> {
    let l = g.ncols();
    check_window(window, l)?;
    let h = (window - 1) / 2;
    let inv = 1.0 / window as f64;
    let mut out = Array2::zeros(g.dim());
    for (row, mut dst) in g.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
        // each padded position j receives the sum of g over outputs t in [j - 2h, j]
        let mut prefix = vec![0.0; l + 1];
        for t in 0..l {
            prefix[t + 1] = prefix[t] + row[t];
        }
        let range_sum = |lo: isize, hi: isize| -> f64 {
            let lo = lo.max(0) as usize;
            let hi = (hi.min(l as isize - 1) + 1).max(0) as usize;
            if hi > lo {
                prefix[hi] - prefix[lo]
            } else {
                0.0
            }
        };
        for j in 0..(l + 2 * h) as isize {
            let src = (j - h as isize).clamp(0, l as isize - 1) as usize;
            dst[src] += range_sum(j - 2 * h as isize, j) * inv;
        }
    }
    Ok(out)
}

pub fn moving_average_decomp(x: ArrayView2<f64>, window: usize) -> Result<DecompositionResult> {
    let trend = moving_average(x, window)?;
    let seasonal = &x - &trend;
    Ok(DecompositionResult {
        trend,
        seasonal,
        method: DecompositionMethod::MovingAverage,
    })
}

/// Default number of retained bins for a lookback of length `l`.
pub fn topk_default(l: usize) -> usize {
    if l == 0 {
        0
    } else {
        l.ilog2() as usize
    }
}

/// Selects, per group of `group` consecutive rows, the `k` bins with the
/// largest group-averaged magnitude. Returns a 0/1 matrix shaped like the
/// input. Ties go to the lower bin.
pub fn topk_mask(spectrum: &Planes, group: usize, k: usize) -> Result<Array2<f64>> {
    let (rows, nf) = spectrum.re.dim();
    if k == 0 || k > nf {
        return Err(FrednError::config(format!("K = {k} outside [1, {nf}]")));
    }
    if group == 0 || rows % group != 0 {
        return Err(FrednError::dim(format!("{rows} rows cannot be grouped by {group}")));
    }
    let mut mask = Array2::zeros((rows, nf));
    let mut amp = vec![0.0; nf];
    let mut order: Vec<usize> = (0..nf).collect();
    for g in 0..rows / group {
        amp.iter_mut().for_each(|a| *a = 0.0);
        for r in g * group..(g + 1) * group {
            for (b, a) in amp.iter_mut().enumerate() {
                *a += spectrum.re[[r, b]].hypot(spectrum.im[[r, b]]);
            }
        }
        order.sort_by(|&a, &b| amp[b].total_cmp(&amp[a]).then(a.cmp(&b)));
        for &b in &order[..k] {
            for r in g * group..(g + 1) * group {
                mask[[r, b]] = 1.0;
            }
        }
    }
    Ok(mask)
}

/// Keeps the `k` strongest bins of each row as the seasonal part; the
/// remainder is the trend.
pub fn topk_decomp(x: ArrayView2<f64>, k: usize) -> Result<DecompositionResult> {
    let l = x.ncols();
    if l == 0 {
        return Err(FrednError::EmptyInput);
    }
    let spec = dft::rfft_planes(x);
    let mask = topk_mask(&spec, 1, k)?;
    let kept = Planes {
        re: &spec.re * &mask,
        im: &spec.im * &mask,
    };
    let seasonal = dft::irfft_planes(&kept, l);
    let trend = &x - &seasonal;
    Ok(DecompositionResult {
        trend,
        seasonal,
        method: DecompositionMethod::TopK,
    })
}

/// Frequency response of a length-`window` moving average at normalized
/// frequency `f` (cycles per sample):
/// `H(f) = sin(pi f k) / (k sin(pi f)) * exp(-i pi f (k - 1))`.
pub fn ma_frequency_response(f: f64, window: usize) -> Complex64 {
    let k = window as f64;
    let s = (PI * f).sin();
    let ratio = if s.abs() < 1e-12 {
        // limit at integer f = m: k * (-1)^(m (k - 1))
        let m = f.round() as i64;
        if (m * (window as i64 - 1)) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    } else {
        (PI * f * k).sin() / (k * s)
    };
    Complex64::from_polar(1.0, -PI * f * (k - 1.0)) * ratio
}

/// Empirical transfer magnitude of the replication-padded moving average,
/// estimated from `realizations` white-noise inputs of length `n` with the
/// cross-spectral ratio `|sum T X*| / sum |X|^2` per bin.
pub fn ma_transfer_estimate(window: usize, n: usize, realizations: usize, seed: u64) -> Result<Vec<f64>> {
    check_window(window, n)?;
    let nf = dft::n_freq(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cross = vec![Complex64::new(0.0, 0.0); nf];
    let mut power = vec![0.0; nf];
    for _ in 0..realizations {
        let x = Array2::from_shape_fn((1, n), |_| StandardNormal.sample(&mut rng));
        let trend = moving_average(x.view(), window)?;
        let xs = dft::rfft_planes(x.view());
        let ts = dft::rfft_planes(trend.view());
        for b in 0..nf {
            let xb = Complex64::new(xs.re[[0, b]], xs.im[[0, b]]);
            let tb = Complex64::new(ts.re[[0, b]], ts.im[[0, b]]);
            cross[b] += tb * xb.conj();
            power[b] += xb.norm_sqr();
        }
    }
    Ok(cross.iter().zip(&power).map(|(c, p)| c.norm() / p).collect())
}

/// Location of the maximum of `curve` inside each lobe of a length-`window`
/// averaging filter, for the main lobe and the next `sidelobes` lobes.
/// `curve` is indexed by bin of a length-`n` transform; lobe `j` spans
/// normalized frequencies `[j / window, (j + 1) / window]`.
pub fn lobe_peaks(curve: &[f64], n: usize, window: usize, sidelobes: usize) -> Vec<(usize, f64)> {
    (0..=sidelobes)
        .filter_map(|j| {
            let lo = ((j * n) as f64 / window as f64).ceil() as usize;
            let hi = (((j + 1) * n) as f64 / window as f64).floor() as usize;
            (lo..=hi.min(curve.len() - 1))
                .map(|b| (b, curve[b]))
                .max_by(|a, b| a.1.total_cmp(&b.1))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn saturated_mask_sends_everything_to_season() {
        let spec = Planes {
            re: array![[1.0, 2.0, -3.0], [0.5, 0.1, 4.0]],
            im: array![[0.0, 1.5, 0.0], [0.0, -2.0, 0.0]],
        };
        let mask = DisentanglerMask {
            weights: Array2::from_elem((3, 2), -30.0),
            init_order: 1.0,
        };
        let (t, s) = fred_split(&spec, &mask).unwrap();
        for (a, b) in s.re.iter().zip(spec.re.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
        }
        assert!(t.re.iter().chain(t.im.iter()).all(|v| v.abs() < 1e-9));

        let mask = DisentanglerMask {
            weights: Array2::zeros((3, 2)),
            init_order: 1.0,
        };
        let (t, s) = fred_split(&spec, &mask).unwrap();
        assert_eq!(t, s);
        assert_eq!(t.re, spec.re.mapv(|v| v / 2.0));
    }

    #[test]
    fn fred_split_shape_errors() {
        let spec = Planes::zeros(3, 4);
        let mask = init_mask(4, 2, 1.0).unwrap();
        assert!(matches!(fred_split(&spec, &mask), Err(FrednError::Dimension(_))));
        let mask = init_mask(5, 1, 1.0).unwrap();
        assert!(matches!(fred_split(&spec, &mask), Err(FrednError::Dimension(_))));
    }

    #[test]
    fn mask_init_prior() {
        let m = init_mask(10, 3, 1.0).unwrap();
        assert_eq!(m.weights[[0, 2]], 0.0);
        assert_abs_diff_eq!(sigmoid(m.weights[[0, 0]]), 0.5);
        assert_abs_diff_eq!(m.weights[[1, 1]], -(2f64.ln()), epsilon = 1e-15);
        assert_abs_diff_eq!(sigmoid(m.weights[[1, 1]]), 1.0 / 3.0, epsilon = 1e-15);
        for m_order in [1.0, 2.0, 3.0] {
            let share = init_mask(50, 2, m_order).unwrap().trend_share();
            for k in 1..50 {
                assert!(share[[k, 0]] < share[[k - 1, 0]]);
                assert_eq!(share[[k, 0]], share[[k, 1]]);
            }
        }
        assert!(init_mask(4, 1, 0.5).is_err());
    }

    #[test]
    fn moving_average_examples() {
        let x = array![[1.0, 2.0, 3.0, 4.0, 5.0]];
        let r = moving_average_decomp(x.view(), 3).unwrap();
        let want = [4.0 / 3.0, 2.0, 3.0, 4.0, 14.0 / 3.0];
        for (a, b) in r.trend.iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let r = moving_average_decomp(x.view(), 1).unwrap();
        assert_eq!(r.trend, x);
        assert!(r.seasonal.iter().all(|v| *v == 0.0));

        let c = Array2::from_elem((2, 30), 1.7);
        let r = moving_average_decomp(c.view(), 25).unwrap();
        assert!(r.trend.iter().all(|v| (v - 1.7).abs() < 1e-12));
        assert!(r.seasonal.iter().all(|v| v.abs() < 1e-12));

        assert!(matches!(moving_average_decomp(x.view(), 2), Err(FrednError::Config(_))));
        assert!(matches!(moving_average_decomp(x.view(), 7), Err(FrednError::Config(_))));
    }

    #[test]
    fn moving_average_adjoint_is_transpose() {
        let l = 11;
        let w = 5;
        // dense matrix of the forward map, one unit impulse at a time
        let mut dense = Array2::zeros((l, l));
        for j in 0..l {
            let mut e = Array2::zeros((1, l));
            e[[0, j]] = 1.0;
            let col = moving_average(e.view(), w).unwrap();
            for t in 0..l {
                dense[[t, j]] = col[[0, t]];
            }
        }
        let g = Array2::from_shape_fn((1, l), |(_, t)| (t as f64 * 0.7).sin());
        let adj = moving_average_adjoint(g.view(), w).unwrap();
        let want = g.dot(&dense);
        for (a, b) in adj.iter().zip(want.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn topk_keep_all_and_two_tone() {
        let l = 64;
        let x = Array2::from_shape_fn((2, l), |(c, t)| ((c * 7 + t * 13) % 17) as f64 * 0.3 - 1.0);
        let r = topk_decomp(x.view(), l / 2 + 1).unwrap();
        for (a, b) in r.seasonal.iter().zip(x.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
        }
        assert!(r.trend.iter().all(|v| v.abs() < 1e-9));

        let tone = Array2::from_shape_fn((1, l), |(_, t)| {
            let t = t as f64 / l as f64;
            (2.0 * PI * 3.0 * t).cos() + 0.5 * (2.0 * PI * 10.0 * t + 0.4).sin()
        });
        let r = topk_decomp(tone.view(), 2).unwrap();
        for (a, b) in r.seasonal.iter().zip(tone.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
        }
        assert!(r.trend.iter().all(|v| v.abs() < 1e-9));

        assert!(topk_decomp(tone.view(), 0).is_err());
        assert!(topk_decomp(tone.view(), 34).is_err());
    }

    #[test]
    fn topk_default_values() {
        let got: Vec<usize> = [96, 192, 336, 512, 720].iter().map(|&l| topk_default(l)).collect();
        assert_eq!(got, vec![6, 7, 8, 9, 9]);
    }

    #[test]
    fn topk_groups_share_selection() {
        let spec = Planes {
            re: array![[1.0, 5.0, 0.0], [1.0, 0.0, 4.0]],
            im: Array2::zeros((2, 3)),
        };
        let m = topk_mask(&spec, 2, 1).unwrap();
        // averaged amplitudes: [1, 2.5, 2] -> bin 1 for both rows
        assert_eq!(m, array![[0.0, 1.0, 0.0], [0.0, 1.0, 0.0]]);
        let m = topk_mask(&spec, 1, 1).unwrap();
        assert_eq!(m, array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn frequency_response_examples() {
        for k in [1usize, 5, 25] {
            let h = ma_frequency_response(0.0, k);
            assert_abs_diff_eq!(h.re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(h.im, 0.0, epsilon = 1e-15);
        }
        for m in 1..=12 {
            let h = ma_frequency_response(m as f64 / 25.0, 25);
            assert!(h.norm() < 1e-12, "m={m}: {}", h.norm());
        }
        // box filter zero-padded to N, evaluated at f = 0.06 via its DTFT sum
        let f = 0.06;
        let dtft: Complex64 = (0..25)
            .map(|t| Complex64::from_polar(1.0 / 25.0, -2.0 * PI * f * t as f64))
            .sum();
        let h = ma_frequency_response(f, 25);
        assert_abs_diff_eq!(h.norm(), dtft.norm(), epsilon = 1e-9);
        assert_abs_diff_eq!(h.re, dtft.re, epsilon = 1e-9);
        assert_abs_diff_eq!(h.im, dtft.im, epsilon = 1e-9);
    }

    #[test]
    fn fred_decompose_is_additive() {
        let x = Array2::from_shape_fn((3, 40), |(c, t)| {
            (c as f64 + 1.0) * (t as f64 * 0.3).sin() + 0.05 * t as f64
        });
        let mask = init_mask(21, 1, 1.0).unwrap();
        let r = fred_decompose(x.view(), &mask).unwrap();
        let back = &r.trend + &r.seasonal;
        for (a, b) in back.iter().zip(x.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
        }
    }
}
