use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::base::{sample_batch, PairSamplerConfig};
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::{EpochLog, EpochRow};
use crate::rng::{fnv1a64, sub_seed, RngStream};
use crate::scalar::Scalar;

use super::arch::ArchitectureSpec;
use super::model::Model;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Run the evaluation hook every this many epochs.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            lr: 0.01,
            momentum: 0.9,
            batch_size: 256,
            seed: 0,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be > 0", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} not in [0,1)", self.momentum)));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(format!("batch size {} < 2", self.batch_size)));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn init_seed(&self) -> u64 {
        sub_seed(self.seed, fnv1a64("train/init"))
    }
}

/// Called as `hook(epoch, model)`; returns AUROC per OOD set name.
pub type EvalHook<'a, T> = &'a mut dyn FnMut(usize, &Model<T>) -> Result<BTreeMap<String, f64>>;

/// Trains a fresh model on `(d_in, d_base)` batches.
///
/// Each epoch draws `⌈|d_in| / batch_size⌉` batches with [`sample_batch`];
/// `sampler_cfg` supplies sigma and prior, `cfg.batch_size` the batch size.
/// Initialization uses stream `"train/init"` and sampling `"train/sampler"`
/// under `cfg.seed`, so identical inputs give identical models and logs.
pub fn train<T: Scalar>(
    d_in: &Dataset<T>,
    d_base: &Dataset<T>,
    spec: &ArchitectureSpec,
    cfg: &TrainConfig,
    sampler_cfg: &PairSamplerConfig,
    mut eval_hook: Option<EvalHook<'_, T>>,
) -> Result<(Model<T>, EpochLog)> {
    cfg.validate()?;
    let sampler = PairSamplerConfig {
        batch_size: cfg.batch_size,
        ..*sampler_cfg
    };
    sampler.validate()?;
    for d in [d_in, d_base] {
        if d.shape() != spec.input {
            return Err(Error::Dimension(format!(
                "dataset '{}' has shape {}, architecture expects {}",
                d.name(),
                d.shape(),
                spec.input
            )));
        }
    }
    let mut model = Model::init(spec, cfg.init_seed())?;
    let mut rng = RngStream::for_component(cfg.seed, "train/sampler");
    let batches = d_in.len().div_ceil(cfg.batch_size);
    let (lr, momentum) = (T::of(cfg.lr), T::of(cfg.momentum));
    let mut log = EpochLog::default();
    for epoch in 1..=cfg.epochs {
        let mut total = 0.0;
        for b in 0..batches {
            let diverged = |detail: String| Error::Divergence {
                epoch,
                batch: b,
                detail,
            };
            let batch = sample_batch(d_in, d_base, &sampler, &mut rng)?;
            let (loss, grads) = model.loss_and_grad(&batch).map_err(|e| diverged(e.to_string()))?;
            if !loss.is_finite() {
                return Err(diverged(format!("loss is {loss}")));
            }
            model.sgd_momentum_step(&grads, lr, momentum)?;
            if model.params().iter().any(|p| p.iter().any(|v| !v.is_finite())) {
                return Err(diverged("parameters became non-finite".into()));
            }
            total += loss.as_f64();
        }
        let auroc = match eval_hook.as_mut() {
            Some(hook) if epoch % cfg.eval_every == 0 => hook(epoch, &model)?,
            _ => BTreeMap::new(),
        };
        log.push(EpochRow {
            epoch,
            mean_loss: total / batches as f64,
            auroc,
        })?;
    }
    Ok((model, log))
}

/// Fraction of `d_in` with logit ≥ 0 and of `d_base` with logit < 0, pooled.
pub fn accuracy<T: Scalar>(model: &Model<T>, d_in: &Dataset<T>, d_base: &Dataset<T>) -> Result<f64> {
    let mut correct = 0usize;
    for x in d_in.items() {
        correct += usize::from(model.forward_one(x)? >= T::zero());
    }
    for x in d_base.items() {
        correct += usize::from(model.forward_one(x)? < T::zero());
    }
    Ok(correct as f64 / (d_in.len() + d_base.len()) as f64)
}
