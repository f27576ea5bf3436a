use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::flush;
use super::loss::{loss_and_gradient, Sample};
use super::network::{AdamConfig, ArchConfig, Layout, NetworkParams};
use crate::error::{Error, Result};
use crate::fairness::EnvyMode;
use crate::instance::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lambda: f64,
    pub envy_mode: EnvyMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, batch_size: 256, epochs: 1000, lambda: 1.0, envy_mode: EnvyMode::Ef, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Xavier-uniform kernels, zero biases.
pub fn xavier_init(arch: ArchConfig, seed: u64) -> NetworkParams {
    let layout = Layout::new(&arch);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = vec![0.0f32; layout.len];
    for (spec, w, _) in &layout.slots {
        let limit = (6.0 / (spec.fan_in() + spec.fan_out()) as f64).sqrt();
        for x in &mut weights[w.clone()] {
            *x = rng.random_range(-limit..limit) as f32;
        }
    }
    NetworkParams::from_weights(arch, 0.0, AdamConfig::default(), weights)
        .expect("layout-sized finite weights")
}

/// Adam state over a flat parameter vector.
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f32>,
    v: Vec<f32>,
    step: i32,
}

impl Adam {
    pub fn new(cfg: AdamConfig, len: usize) -> Self {
        Self { cfg, m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }

    pub fn update(&mut self, weights: &mut [f32], grad: &[f32]) {
        self.step += 1;
        let (b1, b2) = (self.cfg.beta1 as f32, self.cfg.beta2 as f32);
        let lr = self.cfg.learning_rate as f32;
        let eps = self.cfg.epsilon as f32;
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        for (((w, &g), m), v) in weights.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = flush(b1 * *m + (1.0 - b1) * g);
            *v = flush(b2 * *v + (1.0 - b2) * g * g);
            *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    }
}

/// Progress report handed to the training callback after every epoch.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
}

pub fn train(data: &[Instance], arch: ArchConfig, cfg: &TrainConfig) -> Result<NetworkParams> {
    train_with_progress(data, arch, cfg, |_| {})
}

/// Mini-batch Adam on the Lagrangian loss. Deterministic for a fixed seed.
pub fn train_with_progress(
    data: &[Instance],
    arch: ArchConfig,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(EpochStats),
) -> Result<NetworkParams> {
    arch.validate()?;
    cfg.validate()?;
    for inst in data {
        arch.check_input(inst.agents(), inst.items())?;
    }
    let mut params = xavier_init(arch, cfg.seed);
    params.lambda = cfg.lambda;
    params.adam.learning_rate = cfg.learning_rate;
    if cfg.epochs == 0 || data.is_empty() {
        return Ok(params);
    }
    let samples: Vec<Sample> = data.iter().cloned().map(Sample::new).collect();
    let mut adam = Adam::new(params.adam, params.weights().len());
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            batch.clear();
            batch.extend(idx.iter().map(|&i| &samples[i]));
            let (loss, grad) =
                loss_and_gradient(&params.arch, params.weights(), &batch, cfg.lambda, cfg.envy_mode)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, batch: b, loss });
            }
            adam.update(params.weights_mut(), &grad);
            total += loss as f64;
            batches += 1;
        }
        on_epoch(EpochStats { epoch, mean_loss: total / batches as f64 });
    }
    Ok(params)
}
