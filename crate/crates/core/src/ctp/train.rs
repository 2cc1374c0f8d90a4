use serde::{Deserialize, Serialize};

use super::lstm::{LstmModel, Scaler};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Input window length (`p + 1`).
    pub window: usize,
    pub hidden: usize,
    pub batch_size: usize,
    /// Learning rate at the last epoch relative to `learning_rate`; the rate
    /// follows a cosine curve between the two.
    pub final_lr_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 5e-3,
            clip_norm: 5.0,
            beta1: 0.9,
            beta2: 0.999,
            window: 7,
            hidden: 32,
            batch_size: 16,
            final_lr_fraction: 0.02,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.learning_rate;
        }
        let progress = epoch as f64 / (self.epochs - 1) as f64;
        let cosine = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
        self.learning_rate * (self.final_lr_fraction + (1.0 - self.final_lr_fraction) * cosine)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return bad(format!("clip norm must be positive, got {}", self.clip_norm));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("moment coefficients must lie in [0, 1)".into());
        }
        if self.window < 2 {
            return bad(format!("window must be at least 2, got {}", self.window));
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return bad(format!(
                "final learning-rate fraction must lie in (0, 1], got {}",
                self.final_lr_fraction
            ));
        }
        if self.hidden == 0 || self.batch_size == 0 {
            return bad("hidden size and batch size must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Entry 0 is the mean squared error over all windows before training;
    /// entry `e + 1` is the mean minibatch loss seen during epoch `e`.
    pub losses: Vec<f64>,
    /// The series had zero range and was scaled with a unit-range fallback.
    pub degenerate_scaler: bool,
}

impl TrainReport {
    pub fn initial_loss(&self) -> f64 {
        self.losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("at least one loss")
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, cfg: &TrainConfig) {
        const EPS: f64 = 1e-8;
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
        }
    }
}

/// Fits a one-step-ahead forecaster to `series`.
///
/// The series is min-max scaled to `[0, 1]` and cut into sliding windows of
/// `cfg.window` values, each predicting the following value. Training runs
/// minibatch Adam on the mean squared error with full backpropagation through
/// each window and global gradient-norm clipping.
pub fn train(series: &[f64], cfg: &TrainConfig) -> Result<(LstmModel, TrainReport)> {
    train_segments(&[series], cfg)
}

/// Like [`train`] over several independent stretches of data: the scaler
/// covers all of them and no window spans two segments.
pub fn train_segments(segments: &[&[f64]], cfg: &TrainConfig) -> Result<(LstmModel, TrainReport)> {
    cfg.validate()?;
    let all: Vec<f64> = segments.iter().flat_map(|s| s.iter().copied()).collect();
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("training series contains non-finite values".into()));
    }
    let (scaler, degenerate_scaler) = Scaler::fit(&all);

    // start index of every window lying inside one segment
    let scaled: Vec<f64> = all.iter().map(|&v| scaler.scale(v)).collect();
    let mut starts = Vec::new();
    let mut offset = 0;
    for seg in segments {
        if seg.len() > cfg.window {
            starts.extend(offset..offset + seg.len() - cfg.window);
        }
        offset += seg.len();
    }
    if starts.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no segment is longer than the window of {}",
            cfg.window
        )));
    }
    let n_windows = starts.len();
    let w = cfg.window;

    let mut model = LstmModel::init(cfg.hidden, w, cfg.seed);
    model.set_scaler(scaler);
    let n_params = model.params().len();

    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    let mut scratch = vec![0.0; n_params];
    let initial = starts
        .iter()
        .map(|&s| {
            let (y, _) = model.forward(&scaled[s..s + w]);
            (y - scaled[s + w]).powi(2)
        })
        .sum::<f64>()
        / n_windows as f64;
    losses.push(initial);

    let mut rng = Stream::new(derive_seed(cfg.seed, 1, 0));
    let mut adam = Adam::new(n_params);
    let mut order = starts;
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(epoch);
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            scratch.fill(0.0);
            let mut batch_loss = 0.0;
            for &s in batch {
                batch_loss += model.loss_and_grad(&scaled[s..s + w], scaled[s + w], &mut scratch);
            }
            let inv = 1.0 / batch.len() as f64;
            let norm = scratch.iter().map(|g| g * g).sum::<f64>().sqrt() * inv;
            if !(batch_loss.is_finite() && norm.is_finite()) {
                return Err(Error::Numeric(format!(
                    "loss diverged at epoch {epoch}, batch {b} (loss {batch_loss}, grad norm {norm})"
                )));
            }
            let scale = if norm > cfg.clip_norm {
                inv * cfg.clip_norm / norm
            } else {
                inv
            };
            scratch.iter_mut().for_each(|g| *g *= scale);
            adam.step(model.params_mut(), &scratch, lr, cfg);
            epoch_loss += batch_loss;
        }
        losses.push(epoch_loss / n_windows as f64);
    }

    Ok((
        model,
        TrainReport {
            losses,
            degenerate_scaler,
        },
    ))
}

/// Forecasts the value following `window` (raw units).
pub fn predict_next(model: &LstmModel, window: &[f64]) -> Result<f64> {
    if window.len() != model.window() {
        return Err(Error::SizeMismatch {
            what: "forecast window",
            expected: model.window(),
            got: window.len(),
        });
    }
    if window.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("forecast window contains non-finite values".into()));
    }
    let scaler = model.scaler();
    let scaled: Vec<f64> = window.iter().map(|&v| scaler.scale(v)).collect();
    let (y, _) = model.forward(&scaled);
    let out = scaler.unscale(y);
    if !out.is_finite() {
        return Err(Error::Numeric("forecast is not finite".into()));
    }
    Ok(out)
}

/// One-step-ahead forecasts for every index in `targets`, each using the
/// `window` observed values immediately before it.
pub fn rolling_forecast(model: &LstmModel, series: &[f64], targets: std::ops::Range<usize>) -> Result<Vec<f64>> {
    let w = model.window();
    if targets.start < w || targets.end > series.len() {
        return Err(Error::InvalidInput(format!(
            "forecast targets {targets:?} need {w} prior values within a series of length {}",
            series.len()
        )));
    }
    targets.map(|t| predict_next(model, &series[t - w..t])).collect()
}
