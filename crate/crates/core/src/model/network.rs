use ndarray::{concatenate, s, Array1, Array2, Array3, ArrayView2, ArrayView3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::complex::{ComplexResMlp, ComplexResMlpCache};
use super::layers::Linear;
use super::resmlp::{ResMlp, ResMlpCache};
use super::revin::{revin_denormalize, revin_normalize, RevInState};
use super::{ModelConfig, Variant};
use crate::decomposition::{
    fred_split, init_mask, moving_average, moving_average_adjoint, topk_mask, DisentanglerMask,
};
use crate::dft::{irfft_adjoint, irfft_planes, rfft_adjoint, rfft_planes, Planes};
use crate::error::{FrednError, Result};
use crate::losses::{loss_and_gradient, LossKind};

#[derive(Debug, Clone, PartialEq)]
pub enum SeasonBlock {
    /// One real block applied to the real and imaginary planes alike.
    Shared(ResMlp),
    Complex(ComplexResMlp),
}

impl SeasonBlock {
    pub fn param_count(&self) -> usize {
        match self {
            SeasonBlock::Shared(m) => m.param_count(),
            SeasonBlock::Complex(m) => m.param_count(),
        }
    }
}

/// All trainable tensors. The gradient of a loss has the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub phi: Array1<f64>,
    /// Present for the gated variants only.
    pub mask: Option<DisentanglerMask>,
    pub trend: ResMlp,
    pub season: SeasonBlock,
    pub trend_out: Linear,
    pub season_out: Linear,
}

/// Trainable scalar counts per path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub spectral: usize,
    pub trend: usize,
    pub embedding: usize,
    pub disentangler: usize,
    pub projection: usize,
    pub revin: usize,
}

impl ParamCount {
    pub fn total(&self) -> usize {
        self.spectral + self.trend + self.embedding + self.disentangler + self.projection + self.revin
    }
}

#[derive(Debug, Clone)]
enum DecompCache {
    Gate { spec: Planes, share: Array2<f64> },
    MovingAverage,
    TopK { keep: Array2<f64> },
}

#[derive(Debug, Clone)]
enum SeasonCache {
    Shared(ResMlpCache),
    Complex(ComplexResMlpCache),
}

/// Intermediates of one forward pass, consumed by [`ModelParams::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    revin: RevInState,
    xhat: Array2<f64>,
    xn: Array2<f64>,
    decomp: DecompCache,
    trend_cache: ResMlpCache,
    season_cache: SeasonCache,
    trend_hidden: Array2<f64>,
    season_time: Array2<f64>,
    yn: Array2<f64>,
}

impl ModelParams {
    fn build(
        config: &ModelConfig,
        phi: Array1<f64>,
        gamma: Array1<f64>,
        mask: Option<DisentanglerMask>,
        mut linear: impl FnMut(usize, usize) -> Linear,
        trend: ResMlp,
        season: SeasonBlock,
    ) -> Self {
        let d = config.embed_dim;
        ModelParams {
            config: config.clone(),
            gamma,
            beta: Array1::zeros(config.channels),
            phi,
            mask,
            trend,
            season,
            trend_out: linear(d, 1),
            season_out: linear(d, 1),
        }
    }

    /// Fresh parameters: uniform fan-in init for linears, `phi = 1`,
    /// `gamma = 1`, `beta = 0` and the log-decay gate.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trend = ResMlp::init(config.trend_mlp(), &mut rng);
        let season = match config.variant {
            Variant::ComplexLinear => SeasonBlock::Complex(ComplexResMlp::init(config.season_mlp(), &mut rng)),
            _ => SeasonBlock::Shared(ResMlp::init(config.season_mlp(), &mut rng)),
        };
        let mask = if config.variant.uses_mask() {
            Some(init_mask(
                config.lookback_freq(),
                config.embed_dim,
                config.mask_init_order,
            )?)
        } else {
            None
        };
        Ok(Self::build(
            config,
            Array1::ones(config.embed_dim),
            Array1::ones(config.channels),
            mask,
            |i, o| Linear::init(i, o, &mut rng),
            trend,
            season,
        ))
    }

    /// All-zero tensors shaped like [`ModelParams::init`] (gradient buffers).
    pub fn zeros(config: &ModelConfig) -> Self {
        let season = match config.variant {
            Variant::ComplexLinear => SeasonBlock::Complex(ComplexResMlp::zeros(config.season_mlp())),
            _ => SeasonBlock::Shared(ResMlp::zeros(config.season_mlp())),
        };
        let mask = config.variant.uses_mask().then(|| DisentanglerMask {
            weights: Array2::zeros((config.lookback_freq(), config.embed_dim)),
            init_order: config.mask_init_order,
        });
        Self::build(
            config,
            Array1::zeros(config.embed_dim),
            Array1::zeros(config.channels),
            mask,
            Linear::zeros,
            ResMlp::zeros(config.trend_mlp()),
            season,
        )
    }

    pub fn param_count(&self) -> ParamCount {
        ParamCount {
            spectral: self.season.param_count(),
            trend: self.trend.param_count(),
            embedding: self.phi.len(),
            disentangler: self.mask.as_ref().map_or(0, |m| m.weights.len()),
            projection: self.trend_out.param_count() + self.season_out.param_count(),
            revin: self.gamma.len() + self.beta.len(),
        }
    }

    /// Visits every tensor in a fixed order as `(name, shape, row-major data)`.
    pub fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        f(
            "revin.gamma",
            self.gamma.shape(),
            self.gamma.as_slice().expect("standard layout"),
        );
        f(
            "revin.beta",
            self.beta.shape(),
            self.beta.as_slice().expect("standard layout"),
        );
        f(
            "embed.phi",
            self.phi.shape(),
            self.phi.as_slice().expect("standard layout"),
        );
        if let Some(m) = &self.mask {
            f(
                "mask",
                m.weights.shape(),
                m.weights.as_slice().expect("standard layout"),
            );
        }
        self.trend.visit("trend", f);
        match &self.season {
            SeasonBlock::Shared(m) => m.visit("season", f),
            SeasonBlock::Complex(m) => m.visit("season", f),
        }
        self.trend_out.visit("trend_out", f);
        self.season_out.visit("season_out", f);
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        fn arr1(name: &str, a: &mut Array1<f64>, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
            let shape = a.shape().to_vec();
            f(name, &shape, a.as_slice_mut().expect("standard layout"));
        }
        arr1("revin.gamma", &mut self.gamma, f);
        arr1("revin.beta", &mut self.beta, f);
        arr1("embed.phi", &mut self.phi, f);
        if let Some(m) = &mut self.mask {
            let shape = m.weights.shape().to_vec();
            f("mask", &shape, m.weights.as_slice_mut().expect("standard layout"));
        }
        self.trend.visit_mut("trend", f);
        match &mut self.season {
            SeasonBlock::Shared(m) => m.visit_mut("season", f),
            SeasonBlock::Complex(m) => m.visit_mut("season", f),
        }
        self.trend_out.visit_mut("trend_out", f);
        self.season_out.visit_mut("season_out", f);
    }

    /// Parameters flattened in [`visit`](Self::visit) order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count().total());
        self.visit(&mut |_, _, data| out.extend_from_slice(data));
        out
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        let total = self.param_count().total();
        if values.len() != total {
            return Err(FrednError::dim(format!(
                "expected {total} values, got {}",
                values.len()
            )));
        }
        let mut offset = 0;
        self.visit_mut(&mut |_, _, data| {
            data.copy_from_slice(&values[offset..offset + data.len()]);
            offset += data.len();
        });
        Ok(())
    }

    /// Names and lengths of all tensors, in visit order.
    pub fn layout(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        self.visit(&mut |name, _, data| out.push((name.to_string(), data.len())));
        out
    }

    fn check_input(&self, x: &ArrayView3<f64>) -> Result<()> {
        let c = &self.config;
        let (_, ch, l) = x.dim();
        if ch != c.channels || l != c.lookback {
            return Err(FrednError::dim(format!(
                "input has {ch} channels x {l} steps, model expects {} x {}",
                c.channels, c.lookback
            )));
        }
        if x.is_empty() {
            return Err(FrednError::EmptyInput);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(FrednError::Data("non-finite value in model input".into()));
        }
        Ok(())
    }

    /// Inference on a `batch x channels x lookback` tensor.
    pub fn forward(&self, x: ArrayView3<f64>) -> Result<Array3<f64>> {
        Ok(self.forward_train(x, None)?.0)
    }

    /// Single window `channels x lookback` to `channels x horizon`.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let y = self.forward(x.insert_axis(Axis(0)))?;
        Ok(y.index_axis_move(Axis(0), 0))
    }

    /// Forward pass keeping intermediates. Dropout is applied only when an
    /// RNG is supplied.
    pub fn forward_train(
        &self,
        x: ArrayView3<f64>,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Array3<f64>, ForwardCache)> {
        self.check_input(&x)?;
        let cfg = &self.config;
        let (batch, channels, l) = x.dim();
        let (d, tau) = (cfg.embed_dim, cfg.horizon);
        let rows = batch * channels;
        let x2 = x
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((rows, l))
            .expect("contiguous input");

        let (xn, revin) = revin_normalize(x2.view(), &self.gamma, &self.beta, cfg.revin_eps)?;
        let scale = revin.scale();
        let mut xhat = x2;
        for (r, mut row) in xhat.axis_iter_mut(Axis(0)).enumerate() {
            let (m, s) = (revin.mu[r], scale[r]);
            row.mapv_inplace(|v| (v - m) / s);
        }

        // series embedding: row r * d + i carries xn[r] * phi[i]
        let mut emb = Array2::zeros((rows * d, l));
        for (q, mut row) in emb.axis_iter_mut(Axis(0)).enumerate() {
            row.assign(&xn.row(q / d));
            row *= self.phi[q % d];
        }

        let (trend_time, season_spec, decomp) = match cfg.variant {
            Variant::FreDN | Variant::ComplexLinear => {
                let mask = self.mask.as_ref().expect("gated variant carries a mask");
                let spec = rfft_planes(emb.view());
                let (trend_spec, season_spec) = fred_split(&spec, mask)?;
                let trend_time = irfft_planes(&trend_spec, l);
                let share = mask.trend_share();
                (trend_time, season_spec, DecompCache::Gate { spec, share })
            }
            Variant::MovDN => {
                let trend_time = moving_average(emb.view(), cfg.ma_window)?;
                let season_in = &emb - &trend_time;
                (trend_time, rfft_planes(season_in.view()), DecompCache::MovingAverage)
            }
            Variant::TopKDN => {
                let spec = rfft_planes(emb.view());
                let keep = topk_mask(&spec, d, cfg.top_k())?;
                let season_spec = Planes {
                    re: &spec.re * &keep,
                    im: &spec.im * &keep,
                };
                let trend_time = &emb - &irfft_planes(&season_spec, l);
                (trend_time, season_spec, DecompCache::TopK { keep })
            }
        };

        let (trend_hidden, trend_cache) = self.trend.forward_cached(trend_time.view(), rng.as_deref_mut())?;

        let (season_out_spec, season_cache) = match &self.season {
            SeasonBlock::Shared(mlp) => {
                let n = season_spec.re.nrows();
                let stacked = concatenate![Axis(0), season_spec.re, season_spec.im];
                let (out, cache) = mlp.forward_cached(stacked.view(), rng.as_deref_mut())?;
                let planes = Planes {
                    re: out.slice(s![..n, ..]).to_owned(),
                    im: out.slice(s![n.., ..]).to_owned(),
                };
                (planes, SeasonCache::Shared(cache))
            }
            SeasonBlock::Complex(block) => {
                let (out, cache) = block.forward_cached(&season_spec)?;
                (out, SeasonCache::Complex(cache))
            }
        };
        let season_time = irfft_planes(&season_out_spec, tau);

        let yn = collapse(&self.trend_out, &trend_hidden, d) + collapse(&self.season_out, &season_time, d);
        let y = revin_denormalize(yn.view(), &revin)?;
        let y = y
            .into_shape_with_order((batch, channels, tau))
            .expect("contiguous output");
        Ok((
            y,
            ForwardCache {
                batch,
                revin,
                xhat,
                xn,
                decomp,
                trend_cache,
                season_cache,
                trend_hidden,
                season_time,
                yn,
            },
        ))
    }

    /// Gradient of all parameters given `dL/dy` for the cached forward pass.
    pub fn backward(&self, cache: &ForwardCache, dy: ArrayView3<f64>) -> Result<ModelParams> {
        let cfg = &self.config;
        let (d, l, tau) = (cfg.embed_dim, cfg.lookback, cfg.horizon);
        let rows = cache.batch * cfg.channels;
        if dy.dim() != (cache.batch, cfg.channels, tau) {
            return Err(FrednError::dim(format!(
                "output gradient {:?} does not match forward output ({}, {}, {tau})",
                dy.dim(),
                cache.batch,
                cfg.channels
            )));
        }
        let dy = dy
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((rows, tau))
            .expect("contiguous gradient");
        let mut grad = ModelParams::zeros(cfg);
        let ch = |r: usize| r % cfg.channels;

        // instance denormalization
        let scale = cache.revin.scale();
        let mut dyn_ = dy;
        for (r, mut row) in dyn_.axis_iter_mut(Axis(0)).enumerate() {
            let c = ch(r);
            let g = self.gamma[c];
            row *= scale[r] / g;
            let yn = cache.yn.row(r);
            grad.beta[c] -= row.sum();
            grad.gamma[c] -= row.iter().zip(yn).map(|(a, v)| a * (v - self.beta[c])).sum::<f64>() / g;
        }

        let d_trend_hidden = collapse_backward(
            &self.trend_out,
            &cache.trend_hidden,
            dyn_.view(),
            d,
            &mut grad.trend_out,
        );
        let d_season_time = collapse_backward(
            &self.season_out,
            &cache.season_time,
            dyn_.view(),
            d,
            &mut grad.season_out,
        );

        // seasonal branch back to the lookback spectrum
        let d_season_out = irfft_adjoint(d_season_time.view(), tau);
        let d_season_spec = match (&self.season, &cache.season_cache, &mut grad.season) {
            (SeasonBlock::Shared(mlp), SeasonCache::Shared(c), SeasonBlock::Shared(g)) => {
                let n = d_season_out.re.nrows();
                let stacked = concatenate![Axis(0), d_season_out.re, d_season_out.im];
                let dx = mlp.backward(c, stacked.view(), g);
                Planes {
                    re: dx.slice(s![..n, ..]).to_owned(),
                    im: dx.slice(s![n.., ..]).to_owned(),
                }
            }
            (SeasonBlock::Complex(block), SeasonCache::Complex(c), SeasonBlock::Complex(g)) => {
                block.backward(c, &d_season_out, g)
            }
            _ => unreachable!("season block, cache and gradient share the variant"),
        };

        let d_trend_time = self
            .trend
            .backward(&cache.trend_cache, d_trend_hidden.view(), &mut grad.trend);

        let d_emb = match &cache.decomp {
            DecompCache::Gate { spec, share } => {
                let g_trend = irfft_adjoint(d_trend_time.view(), l);
                let mut d_spec = Planes::zeros(rows * d, spec.re.ncols());
                let dmask = &mut grad.mask.as_mut().expect("gated variant carries a mask").weights;
                for q in 0..rows * d {
                    let i = q % d;
                    for k in 0..spec.re.ncols() {
                        let sh = share[[k, i]];
                        let (gtr_re, gtr_im) = (g_trend.re[[q, k]], g_trend.im[[q, k]]);
                        let (gse_re, gse_im) = (d_season_spec.re[[q, k]], d_season_spec.im[[q, k]]);
                        d_spec.re[[q, k]] = gtr_re * sh + gse_re * (1.0 - sh);
                        d_spec.im[[q, k]] = gtr_im * sh + gse_im * (1.0 - sh);
                        let dshare = (gtr_re - gse_re) * spec.re[[q, k]] + (gtr_im - gse_im) * spec.im[[q, k]];
                        dmask[[k, i]] += dshare * sh * (1.0 - sh);
                    }
                }
                rfft_adjoint(&d_spec, l)
            }
            DecompCache::MovingAverage => {
                let g = rfft_adjoint(&d_season_spec, l);
                let through_avg = moving_average_adjoint((&d_trend_time - &g).view(), cfg.ma_window)?;
                g + through_avg
            }
            DecompCache::TopK { keep } => {
                let back = irfft_adjoint(d_trend_time.view(), l);
                let masked = Planes {
                    re: (&d_season_spec.re - &back.re) * keep,
                    im: (&d_season_spec.im - &back.im) * keep,
                };
                d_trend_time + rfft_adjoint(&masked, l)
            }
        };

        // embedding and instance normalization affine terms
        let mut dxn = Array2::<f64>::zeros((rows, l));
        for (q, drow) in d_emb.axis_iter(Axis(0)).enumerate() {
            let (r, i) = (q / d, q % d);
            grad.phi[i] += drow.dot(&cache.xn.row(r));
            dxn.row_mut(r).scaled_add(self.phi[i], &drow);
        }
        for (r, drow) in dxn.axis_iter(Axis(0)).enumerate() {
            let c = ch(r);
            grad.gamma[c] += drow.dot(&cache.xhat.row(r));
            grad.beta[c] += drow.sum();
        }
        Ok(grad)
    }

    /// Loss and parameter gradients for one batch without dropout.
    pub fn loss_and_grad(&self, x: ArrayView3<f64>, y: ArrayView3<f64>, loss: LossKind) -> Result<(f64, ModelParams)> {
        self.loss_and_grad_with(x, y, loss, None)
    }

    pub fn loss_and_grad_with(
        &self,
        x: ArrayView3<f64>,
        y: ArrayView3<f64>,
        loss: LossKind,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, ModelParams)> {
        let (y_hat, cache) = self.forward_train(x, rng)?;
        if y.dim() != y_hat.dim() {
            return Err(FrednError::dim(format!(
                "target {:?} vs prediction {:?}",
                y.dim(),
                y_hat.dim()
            )));
        }
        let (b, c, t) = y_hat.dim();
        let yh2 = y_hat
            .view()
            .into_shape_with_order((b * c, t))
            .expect("contiguous prediction");
        let y2 = y
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((b * c, t))
            .expect("contiguous target");
        let (value, g) = loss_and_gradient(loss, yh2, y2.view())?;
        let g3 = g.into_shape_with_order((b, c, t)).expect("contiguous gradient");
        Ok((value, self.backward(&cache, g3.view())?))
    }

    /// Loss only, without dropout.
    pub fn loss(&self, x: ArrayView3<f64>, y: ArrayView3<f64>, loss: LossKind) -> Result<f64> {
        let y_hat = self.forward(x)?;
        let (b, c, t) = y_hat.dim();
        if y.dim() != (b, c, t) {
            return Err(FrednError::dim(format!(
                "target {:?} vs prediction {:?}",
                y.dim(),
                (b, c, t)
            )));
        }
        let y2 = y
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((b * c, t))
            .expect("contiguous target");
        let yh2 = y_hat.into_shape_with_order((b * c, t)).expect("contiguous prediction");
        crate::losses::compute_loss(loss, yh2.view(), y2.view())
    }
}

/// `out[r, t] = b + sum_i w[i] * h[r * d + i, t]`.
fn collapse(lin: &Linear, h: &Array2<f64>, d: usize) -> Array2<f64> {
    let (n, tau) = h.dim();
    let h3 = h
        .view()
        .into_shape_with_order((n / d, d, tau))
        .expect("contiguous rows");
    let mut out = Array2::from_elem((n / d, tau), lin.bias[0]);
    for i in 0..d {
        out.scaled_add(lin.weight[[0, i]], &h3.index_axis(Axis(1), i));
    }
    out
}

fn collapse_backward(lin: &Linear, h: &Array2<f64>, dy: ArrayView2<f64>, d: usize, grad: &mut Linear) -> Array2<f64> {
    let (n, tau) = h.dim();
    let h3 = h
        .view()
        .into_shape_with_order((n / d, d, tau))
        .expect("contiguous rows");
    grad.bias[0] += dy.sum();
    let mut dh = Array3::zeros((n / d, d, tau));
    for i in 0..d {
        grad.weight[[0, i]] += (&h3.index_axis(Axis(1), i) * &dy).sum();
        dh.index_axis_mut(Axis(1), i).scaled_add(lin.weight[[0, i]], &dy);
    }
    dh.into_shape_with_order((n, tau)).expect("contiguous rows")
}
