//! Mini-batch SGD with momentum, data augmentation and loss curves.

use std::io::Write;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{backward_pass, build_model, forward_pass, ModelSpec, ModelState};
use crate::rng::Rng;
use crate::seed_path;
use crate::tensor::Tensor;

/// Random reflections followed by an upscale-and-centre-crop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub reflect_horizontal: bool,
    pub reflect_vertical: bool,
    /// Scale factor range, sampled uniformly.
    pub rescale_range: (f64, f64),
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            reflect_horizontal: true,
            reflect_vertical: true,
            rescale_range: (1.0, 2.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    /// 0 gives plain SGD.
    pub momentum: f64,
    pub seed: u64,
    pub augmentation: Option<AugmentConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 30,
            max_epochs: 30,
            learning_rate: 1e-4,
            momentum: 0.9,
            seed: 0,
            augmentation: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::config("batch size and epoch count must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("invalid learning rate {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if let Some(a) = &self.augmentation {
            let (lo, hi) = a.rescale_range;
            if !(lo >= 1.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::config(format!("invalid rescale range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// Bilinear resample of a CHW image by `factor` (`align_corners = false`,
/// new side `round(side * factor)`), then the centred window of the original
/// size. Offsets are `floor((new - old) / 2)`.
pub fn rescale_crop(img: &Tensor, factor: f64) -> Result<Tensor> {
    let s = img.shape();
    if s.len() != 3 {
        return Err(Error::dim(format!("expected a CHW image, got {s:?}")));
    }
    if !(factor >= 1.0 && factor.is_finite()) {
        return Err(Error::config(format!("rescale factor {factor} must be at least 1")));
    }
    let (c, h, w) = (s[0], s[1], s[2]);
    let nh = (h as f64 * factor).round() as usize;
    let nw = (w as f64 * factor).round() as usize;
    let (oy, ox) = ((nh - h) / 2, (nw - w) / 2);
    let axis = |dst: usize, old: usize, new: usize| -> (usize, usize, f64) {
        let src = ((dst as f64 + 0.5) * old as f64 / new as f64 - 0.5).clamp(0.0, (old - 1) as f64);
        let i0 = src.floor() as usize;
        let i1 = (i0 + 1).min(old - 1);
        (i0, i1, src - i0 as f64)
    };
    let rows: Vec<_> = (0..h).map(|i| axis(i + oy, h, nh)).collect();
    let cols: Vec<_> = (0..w).map(|j| axis(j + ox, w, nw)).collect();
    let src = img.data();
    let mut out = Vec::with_capacity(img.len());
    for ch in 0..c {
        let p = &src[ch * h * w..(ch + 1) * h * w];
        for &(y0, y1, fy) in &rows {
            for &(x0, x1, fx) in &cols {
                let top = p[y0 * w + x0] * (1.0 - fx) + p[y0 * w + x1] * fx;
                let bot = p[y1 * w + x0] * (1.0 - fx) + p[y1 * w + x1] * fx;
                out.push(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    Tensor::new(s.to_vec(), out)
}

/// Mirror of a CHW image; `horizontal` swaps left and right, otherwise top and bottom.
pub fn reflect(img: &Tensor, horizontal: bool) -> Tensor {
    let s = img.shape();
    let (h, w) = (s[1], s[2]);
    let src = img.data();
    let mut out = src.to_vec();
    for (plane, dst) in src.chunks(h * w).zip(out.chunks_mut(h * w)) {
        for i in 0..h {
            for j in 0..w {
                let (si, sj) = if horizontal { (i, w - 1 - j) } else { (h - 1 - i, j) };
                dst[i * w + j] = plane[si * w + sj];
            }
        }
    }
    Tensor::new(s.to_vec(), out).expect("same shape")
}

/// Independent 50% horizontal and vertical reflections, then a rescale by a
/// factor drawn from `cfg.rescale_range` with a centre crop back to size.
/// Always consumes three draws from `rng`.
pub fn augment(img: &Tensor, cfg: &AugmentConfig, rng: &mut Rng) -> Result<Tensor> {
    if img.rank() != 3 {
        return Err(Error::dim(format!("expected a CHW image, got {:?}", img.shape())));
    }
    let flip_h = rng.coin();
    let flip_v = rng.coin();
    let (lo, hi) = cfg.rescale_range;
    let factor = rng.uniform(lo, hi);
    let mut out = img.clone();
    if cfg.reflect_horizontal && flip_h {
        out = reflect(&out, true);
    }
    if cfg.reflect_vertical && flip_v {
        out = reflect(&out, false);
    }
    if factor > 1.0 {
        out = rescale_crop(&out, factor)?;
    }
    Ok(out)
}

/// One row of the loss curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Sample-weighted mean of the batch losses.
    pub mean_loss: f64,
    /// Accuracy on the (augmented) training batches as they were seen.
    pub train_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: ModelState,
    pub curve: Vec<EpochStats>,
}

/// Gathers the samples at `idx` into a batch, augmenting each if requested.
fn gather(data: &Dataset, idx: &[usize], aug: Option<(&AugmentConfig, &mut Rng)>) -> Result<Tensor> {
    let [c, h, w] = data.sample_shape();
    let plane = c * h * w;
    let mut out = Vec::with_capacity(idx.len() * plane);
    match aug {
        None => {
            for &i in idx {
                out.extend_from_slice(data.images().row(i));
            }
        }
        Some((cfg, rng)) => {
            for &i in idx {
                let img = Tensor::new(vec![c, h, w], data.images().row(i).to_vec())?;
                out.extend(augment(&img, cfg, rng)?.into_data());
            }
        }
    }
    Tensor::new(vec![idx.len(), c, h, w], out)
}

/// Trains a fresh model for `spec` on `data`.
///
/// Initial weights, per-epoch shuffles and augmentation draws all derive from
/// `cfg.seed`. Every learnable tensor, activation parameters included, takes
/// the same momentum step; activation constraints are applied after each step.
pub fn train_model(spec: &ModelSpec, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientData("training set is empty".into()));
    }
    if data.sample_shape().as_slice() != spec.input.as_slice() {
        return Err(Error::dim(format!(
            "samples are {:?}, model expects {:?}",
            data.sample_shape(),
            spec.input
        )));
    }
    if data.classes() > spec.classes {
        return Err(Error::config(format!(
            "data has {} classes, model only {}",
            data.classes(),
            spec.classes
        )));
    }
    let mut state = build_model(spec, &mut Rng::new(seed_path!(cfg.seed, "init")))?;
    state.apply_constraints();
    let mut velocity: Vec<Vec<f64>> = state
        .layers()
        .iter()
        .flat_map(|l| l.blocks())
        .map(|b| vec![0.0; b.len()])
        .collect();

    let n = data.len();
    let mut curve = Vec::with_capacity(cfg.max_epochs);
    for epoch in 0..cfg.max_epochs {
        let mut order: Vec<usize> = (0..n).collect();
        Rng::new(seed_path!(cfg.seed, "shuffle", epoch)).shuffle(&mut order);
        let mut aug_rng = Rng::new(seed_path!(cfg.seed, "augment", epoch));
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (step, idx) in order.chunks(cfg.batch_size).enumerate() {
            let x = gather(data, idx, cfg.augmentation.as_ref().map(|a| (a, &mut aug_rng)))?;
            let labels: Vec<usize> = idx.iter().map(|&i| data.labels()[i]).collect();
            let (probs, cache) = forward_pass(&state, &x)?;
            let back = backward_pass(&state, &cache, &labels)?;
            let grads = back.grads.flatten();
            if !back.loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                let layer = cache.first_non_finite().unwrap_or(spec.layers.len() - 1);
                return Err(Error::NonFiniteLoss {
                    epoch,
                    step,
                    layer,
                    layer_kind: spec.layers[layer].to_string(),
                });
            }
            loss_sum += back.loss * idx.len() as f64;
            correct += labels
                .iter()
                .enumerate()
                .filter(|&(i, &y)| argmax(probs.row(i)) == y)
                .count();

            let mut off = 0;
            for (block, vel) in state.layers_mut().iter_mut().flat_map(|l| l.blocks_mut()).zip(&mut velocity) {
                for ((p, v), g) in block.iter_mut().zip(vel.iter_mut()).zip(&grads[off..]) {
                    *v = cfg.momentum * *v - cfg.learning_rate * g;
                    *p += *v;
                }
                off += block.len();
            }
            state.apply_constraints();
        }
        curve.push(EpochStats {
            epoch,
            mean_loss: loss_sum / n as f64,
            train_acc: correct as f64 / n as f64,
        });
    }
    Ok(TrainOutcome { state, curve })
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Loss curve as CSV with header `epoch,mean_loss,train_acc`.
pub fn write_loss_csv<W: Write>(curve: &[EpochStats], mut w: W) -> Result<()> {
    writeln!(w, "epoch,mean_loss,train_acc")?;
    for e in curve {
        writeln!(w, "{},{},{}", e.epoch, e.mean_loss, e.train_acc)?;
    }
    Ok(())
}
