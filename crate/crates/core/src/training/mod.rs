//! Sparse-teacher-forced training with RAdam.

mod radam;
mod stf;

pub use radam::{radam_step, RadamState};
pub use stf::{forced_columns, mse_loss, reg_loss, stf_forward, StfForward};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{BlockShape, DynaMixModel};
use crate::seed;
use crate::systems::Corpus;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Forcing interval, counted from the first unrolled column.
    pub tau_force: usize,
    pub lambda_reg: f64,
    pub lr_start: f64,
    pub lr_end: f64,
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    pub context_length: usize,
    /// Columns of the context that are also unrolled (`Delta t`).
    pub overlap: usize,
    pub seed: u64,
    /// Optional global-norm gradient clip.
    pub grad_clip: Option<f64>,
    /// Exploration noise in the attention during training.
    pub exploration_noise: bool,
    /// Checkpoint period in epochs for callers that persist; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            tau_force: 10,
            lambda_reg: 0.01,
            lr_start: 2e-3,
            lr_end: 1e-5,
            epochs: 2000,
            batches_per_epoch: 50,
            batch_size: 16,
            context_length: 500,
            overlap: 50,
            seed: 0,
            grad_clip: None,
            exploration_noise: true,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.tau_force == 0 {
            return bad("tau_force must be at least 1");
        }
        if !(self.lambda_reg >= 0.0) {
            return bad("lambda_reg must be non-negative");
        }
        if !(self.lr_start > 0.0 && self.lr_end > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.lr_start < self.lr_end {
            return bad("lr_start must not be below lr_end");
        }
        if self.batches_per_epoch == 0 || self.batch_size == 0 {
            return bad("batches_per_epoch and batch_size must be positive");
        }
        if self.context_length == 0 {
            return bad("context_length must be positive");
        }
        if self.overlap > self.context_length {
            return bad("overlap must not exceed context_length");
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return bad("grad_clip must be positive");
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines (a TOML subset); unspecified keys keep defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("train config serializes")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Learning rate for `epoch`, decaying geometrically from `lr_start` to `lr_end`.
pub fn lr_at_epoch(config: &TrainConfig, epoch: usize) -> f64 {
    if config.epochs <= 1 {
        return config.lr_start;
    }
    let frac = epoch as f64 / (config.epochs - 1) as f64;
    config.lr_start * (config.lr_end / config.lr_start).powf(frac)
}

/// One gradient array per model parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub shapes: Vec<BlockShape>,
    pub blocks: Vec<Vec<f64>>,
}

impl GradientSet {
    fn from_model(grad: &DynaMixModel) -> Self {
        GradientSet { shapes: grad.block_shapes(), blocks: grad.blocks().iter().map(|b| b.to_vec()).collect() }
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.shapes.iter().position(|s| s.name == name).map(|i| self.blocks[i].as_slice())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.blocks.concat()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn norm(&self) -> f64 {
        self.blocks.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Position of a batch within training; seeds its exploration noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchId {
    pub epoch: usize,
    pub batch: usize,
}

/// Batch losses alongside the gradient of their sum.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    pub mse: f64,
    pub reg: f64,
    pub gradients: GradientSet,
}

impl BatchGradients {
    pub fn total(&self) -> f64 {
        self.mse + self.reg
    }
}

fn noise_seed(config: &TrainConfig, id: BatchId, k: usize) -> Option<u64> {
    config
        .exploration_noise
        .then(|| seed::derive(config.seed, "exploration", &[id.epoch as u64, id.batch as u64, k as u64]))
}

/// Batch-mean MSE plus regularizer, without gradients.
pub fn batch_loss(model: &DynaMixModel, batch: &[&Trajectory], config: &TrainConfig, id: BatchId) -> Result<(f64, f64)> {
    if batch.is_empty() {
        return Err(Error::arg("empty batch"));
    }
    let mut mse = 0.0;
    for (k, seq) in batch.iter().enumerate() {
        stf::check_sequence(model, seq, config)?;
        let u = stf::unroll(model, seq, config, noise_seed(config, id, k));
        mse += stf::unroll_mse(&u, seq, model.n());
    }
    Ok((mse / batch.len() as f64, reg_loss(model, config.lambda_reg)))
}

/// Gradient of the batch-mean MSE plus the regularizer.
///
/// Sequences are processed in parallel and reduced in batch order, so the
/// result does not depend on the thread count.
pub fn compute_gradients(
    model: &DynaMixModel,
    batch: &[&Trajectory],
    config: &TrainConfig,
    id: BatchId,
) -> Result<BatchGradients> {
    if batch.is_empty() {
        return Err(Error::arg("empty batch"));
    }
    for seq in batch {
        stf::check_sequence(model, seq, config)?;
    }
    let scale = 1.0 / batch.len() as f64;
    let per_seq: Vec<(f64, DynaMixModel)> = batch
        .par_iter()
        .enumerate()
        .map(|(k, seq)| {
            let u = stf::unroll(model, seq, config, noise_seed(config, id, k));
            let mut grad = model.zeros_like();
            stf::backward(model, seq, &u, scale, &mut grad);
            (stf::unroll_mse(&u, seq, model.n()), grad)
        })
        .collect();

    let mut total = model.zeros_like();
    let mut mse = 0.0;
    for (loss, grad) in &per_seq {
        mse += loss;
        for (dst, src) in total.blocks_mut().into_iter().zip(grad.blocks()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }
    mse *= scale;
    let reg = reg_loss(model, config.lambda_reg);
    let denom = 1.0 + model.gating.sigma.sum();
    total.gating.sigma.add_scalar_mut(-config.lambda_reg / (denom * denom));

    let gradients = GradientSet::from_model(&total);
    if !mse.is_finite() || !gradients.is_finite() {
        return Err(Error::TrainingDivergence { epoch: id.epoch, batch: id.batch });
    }
    Ok(BatchGradients { mse, reg, gradients })
}

/// Per-epoch training summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean batch MSE over the epoch.
    pub mse: f64,
    /// Mean regularizer over the epoch.
    pub reg: f64,
    pub lr: f64,
}

/// Receives progress from [`train`]; returning an error aborts training.
pub trait TrainObserver {
    fn on_epoch(&mut self, record: &EpochRecord, model: &DynaMixModel) -> Result<()>;
}

/// Observer that ignores every event.
pub struct NoopObserver;

impl TrainObserver for NoopObserver {
    fn on_epoch(&mut self, _: &EpochRecord, _: &DynaMixModel) -> Result<()> {
        Ok(())
    }
}

impl<F: FnMut(&EpochRecord, &DynaMixModel) -> Result<()>> TrainObserver for F {
    fn on_epoch(&mut self, record: &EpochRecord, model: &DynaMixModel) -> Result<()> {
        self(record, model)
    }
}

/// Sequence indices for every batch of `epoch`.
///
/// Indices are drawn without replacement from a fresh permutation; when an
/// epoch needs more sequences than the corpus holds, another permutation is
/// appended.
pub fn epoch_batches(corpus_len: usize, config: &TrainConfig, epoch: usize) -> Vec<Vec<usize>> {
    let needed = config.batches_per_epoch * config.batch_size;
    let mut order = Vec::with_capacity(needed);
    let mut round = 0u64;
    while order.len() < needed {
        let mut perm: Vec<usize> = (0..corpus_len).collect();
        perm.shuffle(&mut seed::rng(config.seed, "batches", &[epoch as u64, round]));
        order.extend(perm);
        round += 1;
    }
    order.truncate(needed);
    order.chunks(config.batch_size).map(<[usize]>::to_vec).collect()
}

fn clip(grads: &mut [f64], max_norm: f64) {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
}

/// Trains `model` in place and returns one record per epoch.
///
/// On divergence (non-finite loss, gradients, or parameters) the model is
/// restored to the latest parameters that produced a finite loss and
/// `Error::TrainingDivergence` is returned.
pub fn train(
    model: &mut DynaMixModel,
    corpus: &Corpus,
    config: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<Vec<EpochRecord>> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::arg("empty corpus"));
    }
    if corpus.dim() != model.n() {
        return Err(Error::arg(format!("corpus dimension {} does not match model n = {}", corpus.dim(), model.n())));
    }
    if corpus.seq_len() <= config.context_length {
        return Err(Error::arg(format!(
            "corpus sequences have {} columns, need more than the context length {}",
            corpus.seq_len(),
            config.context_length
        )));
    }
    let mut state = RadamState::new(model.num_params());
    // Latest parameters whose batch loss and gradients were finite.
    let mut last_good = model.clone();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = lr_at_epoch(config, epoch);
        let (mut mse_sum, mut reg_sum) = (0.0, 0.0);
        let batches = epoch_batches(corpus.len(), config, epoch);
        for (b, indices) in batches.iter().enumerate() {
            let id = BatchId { epoch, batch: b };
            let batch: Vec<&Trajectory> = indices.iter().map(|&i| &corpus.sequences[i]).collect();
            let result = match compute_gradients(model, &batch, config, id) {
                Ok(r) => r,
                Err(e @ Error::TrainingDivergence { .. }) => {
                    *model = last_good;
                    return Err(e);
                }
                Err(e) => return Err(e),
            };
            last_good.clone_from(model);
            let mut grads = result.gradients.flatten();
            if let Some(max_norm) = config.grad_clip {
                clip(&mut grads, max_norm);
            }
            let mut params = model.flatten();
            radam_step(&mut params, &grads, &mut state, lr);
            model.set_flat(&params)?;
            model.clamp_constrained();
            if !model.is_finite() {
                *model = last_good;
                return Err(Error::TrainingDivergence { epoch, batch: b });
            }
            mse_sum += result.mse;
            reg_sum += result.reg;
        }
        let nb = batches.len() as f64;
        let record = EpochRecord { epoch, mse: mse_sum / nb, reg: reg_sum / nb, lr };
        history.push(record);
        observer.on_epoch(&record, model)?;
    }
    Ok(history)
}
