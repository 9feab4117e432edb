use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backward::backward;
use super::params::{init_params, ModelParams};
use crate::signal::FeatureWindow;
use crate::{Error, Result};

/// Decorrelates the shuffling stream from the init stream of the same seed.
const SHUFFLE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Supplied by the pipeline's top-level seed; not read from config files.
    #[serde(skip)]
    pub seed: u64,
    /// Coefficient on `||W_out||_F^2`.
    pub weight_decay: f64,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, epochs: 40, batch_size: 16, seed: 0, weight_decay: 1e-4, clip_norm: 5.0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Mean per-window loss of each epoch, measured during the epoch.
    pub epoch_losses: Vec<f64>,
}

struct Adam {
    m: ModelParams,
    v: ModelParams,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(d_in: usize, d_h: usize) -> Self {
        Self { m: ModelParams::zeros(d_in, d_h), v: ModelParams::zeros(d_in, d_h), t: 0 }
    }

    fn step(&mut self, params: &mut ModelParams, grad: &ModelParams, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let tensors = params.tensors_mut().into_iter().zip(self.m.tensors_mut()).zip(self.v.tensors_mut());
        for (((p, m), v), g) in tensors.zip(grad.tensors()) {
            for i in 0..p.len() {
                m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g[i];
                v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

/// Mini-batch Adam with global-norm clipping and seeded shuffling.
///
/// Per-window gradients are evaluated in parallel but summed in batch order,
/// so results are bit-identical for a fixed seed regardless of thread count.
pub fn train(windows: &[FeatureWindow], d_hidden: usize, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let first = windows.first().ok_or(Error::NoTrainingData)?;
    let d_in = first.dim();
    if let Some(bad) = windows.iter().find(|w| w.dim() != d_in) {
        return Err(Error::DimensionMismatch { expected: d_in, got: bad.dim() });
    }
    let mut params = init_params(d_in, d_hidden, cfg.seed);
    let mut adam = Adam::new(d_in, d_hidden);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<Result<(f64, ModelParams)>> = batch
                .par_iter()
                .map(|&i| backward(&windows[i], &params, cfg.weight_decay))
                .collect();
            let mut grad = ModelParams::zeros(d_in, d_hidden);
            for r in results {
                let (l, g) = r?;
                if !l.is_finite() {
                    return Err(Error::TrainingDiverged { epoch });
                }
                total += l;
                grad.add_scaled(&g, 1.0);
            }
            grad.scale(1.0 / batch.len() as f64);
            let gnorm = grad.norm_sq().sqrt();
            if !gnorm.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            if gnorm > cfg.clip_norm {
                grad.scale(cfg.clip_norm / gnorm);
            }
            adam.step(&mut params, &grad, cfg.learning_rate);
        }
        let mean = total / windows.len() as f64;
        if !mean.is_finite() || !params.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        epoch_losses.push(mean);
    }
    Ok(TrainOutcome { params, epoch_losses })
}
