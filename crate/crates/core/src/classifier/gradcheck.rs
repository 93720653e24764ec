//! Central finite-difference check of [`Model::loss_and_grad`] in f64.

use crate::base::LabeledBatch;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::Tensor;

use super::arch::ArchitectureSpec;
use super::loss::bce_with_logit;
use super::model::Model;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub probes: usize,
    pub batch_size: usize,
    pub step: f64,
    /// Lower bound on the relative-error denominator, for near-zero gradients.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            probes: 20,
            batch_size: 4,
            step: 1e-5,
            floor: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub probes: usize,
    pub max_rel_err: f64,
    /// `(layer, flat parameter index)` of the worst probe.
    pub worst: (usize, usize),
    /// Layer kinds exercised by the architecture.
    pub layer_kinds: Vec<&'static str>,
}

/// Mean cross-entropy from forward passes only.
fn loss_only(model: &Model<f64>, batch: &LabeledBatch<f64>) -> Result<f64> {
    let mut total = 0.0;
    for (x, &y) in batch.inputs.iter().zip(&batch.labels) {
        total += bce_with_logit(model.forward_one(x)?, f64::from(y));
    }
    Ok(total / batch.len() as f64)
}

fn param_mut(model: &mut Model<f64>, layer: usize, idx: usize) -> &mut f64 {
    let p = &mut model.params_mut()[layer];
    let nw = p.weight.len();
    if idx < nw {
        &mut p.weight[idx]
    } else {
        &mut p.bias[idx - nw]
    }
}

/// Runs `cfg.probes` probes, each on a fresh random batch, random
/// parameters and one randomly chosen parameter coordinate.
///
/// Relative error is `|g − ĝ| / max(|g|, |ĝ|, floor)`.
pub fn gradient_check(spec: &ArchitectureSpec, cfg: &GradCheckConfig, seed: u64) -> Result<GradCheckReport> {
    spec.validate()?;
    if cfg.probes == 0 || cfg.batch_size == 0 || !(cfg.step > 0.0) {
        return Err(Error::Config("gradient check needs probes, batch and step > 0".into()));
    }
    let mut rng = RngStream::for_component(seed, "gradcheck");
    let mut model = Model::<f64>::init(spec, seed)?;
    let layers: Vec<usize> = (0..spec.layers.len())
        .filter(|&i| !model.params()[i].is_empty())
        .collect();
    let mut report = GradCheckReport {
        probes: 0,
        max_rel_err: 0.0,
        worst: (0, 0),
        layer_kinds: spec.layers.iter().map(|l| l.name()).collect(),
    };
    for probe in 0..cfg.probes {
        for p in model.params_mut() {
            p.iter_mut().for_each(|v| *v += 0.1 * rng.normal());
        }
        let inputs = (0..cfg.batch_size)
            .map(|_| Tensor::from_fn(spec.input, |_, _, _| rng.normal()))
            .collect::<Result<Vec<_>>>()?;
        let labels = (0..cfg.batch_size).map(|i| (i % 2) as u8).collect();
        let batch = LabeledBatch::new(inputs, labels)?;
        // Cycle through parameterized layers so each gets probed.
        let layer = layers[probe % layers.len()];
        let idx = rng.below(model.params()[layer].len());
        let (_, grads) = model.loss_and_grad(&batch)?;
        let analytic = *grads.layers[layer].iter().nth(idx).expect("index in range");
        let orig = *param_mut(&mut model, layer, idx);
        *param_mut(&mut model, layer, idx) = orig + cfg.step;
        let up = loss_only(&model, &batch)?;
        *param_mut(&mut model, layer, idx) = orig - cfg.step;
        let down = loss_only(&model, &batch)?;
        *param_mut(&mut model, layer, idx) = orig;
        let numeric = (up - down) / (2.0 * cfg.step);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(cfg.floor);
        if rel > report.max_rel_err || report.probes == 0 {
            report.max_rel_err = rel;
            report.worst = (layer, idx);
        }
        report.probes += 1;
    }
    Ok(report)
}
