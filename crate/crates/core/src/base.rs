//! Base-distribution datasets and balanced labeled minibatches.
//!
//! The base dataset always contains a full copy of the in-distribution data
//! so that the support of `p_base` covers the support of `p_in`.

use crate::datasets::{Dataset, DatasetTag};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::transforms::{add_noise_in_place, local_sample, CropGrid};

/// Minibatch of `(x, y)` pairs; `y = 1` for in-distribution, `0` for base.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledBatch<T> {
    pub inputs: Vec<Tensor<T>>,
    pub labels: Vec<u8>,
}

impl<T: Scalar> LabeledBatch<T> {
    pub fn new(inputs: Vec<Tensor<T>>, labels: Vec<u8>) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::Domain("labels must be 0 or 1".into()));
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairSamplerConfig {
    pub batch_size: usize,
    /// Spread noise standard deviation applied to every sampled input.
    pub sigma: f64,
    /// Probability of drawing from the in-distribution side.
    pub prior_p1: f64,
}

impl PairSamplerConfig {
    pub fn new(batch_size: usize, sigma: f64) -> Result<Self> {
        let cfg = Self {
            batch_size,
            sigma,
            prior_p1: 0.5,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_prior(mut self, prior_p1: f64) -> Result<Self> {
        self.prior_p1 = prior_p1;
        self.validate()?;
        Ok(self)
    }

    /// `prior_p1` may sit on the closed interval so degenerate priors can be
    /// exercised; training normally keeps it at 0.5.
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config(format!("batch size {} < 2", self.batch_size)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma {} must be finite and >= 0", self.sigma)));
        }
        if !(0.0..=1.0).contains(&self.prior_p1) {
            return Err(Error::Config(format!("prior {} not in [0,1]", self.prior_p1)));
        }
        Ok(())
    }
}

impl Default for PairSamplerConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            sigma: 0.1,
            prior_p1: 0.5,
        }
    }
}

/// `multiplier` passes of [`local_sample`] over `d_in`, followed by a copy of
/// `d_in` itself.
pub fn build_local_base<T: Scalar>(
    d_in: &Dataset<T>,
    grid: &CropGrid,
    multiplier: usize,
    rng: &mut RngStream,
) -> Result<Dataset<T>> {
    if multiplier == 0 {
        return Err(Error::Config("local base multiplier must be >= 1".into()));
    }
    let mut items = Vec::with_capacity((multiplier + 1) * d_in.len());
    for _ in 0..multiplier {
        for img in d_in.items() {
            items.push(local_sample(img, grid, rng)?);
        }
    }
    items.extend_from_slice(d_in.items());
    Dataset::new(format!("{}-local-base", d_in.name()), DatasetTag::BaseLocal, items)
}

/// `d_universal` followed by `d_in`. Shapes must agree; a channel mismatch
/// usually means the universal set still needs [`to_grayscale`].
///
/// [`to_grayscale`]: crate::datasets::to_grayscale
pub fn build_universal_base<T: Scalar>(d_universal: &Dataset<T>, d_in: &Dataset<T>) -> Result<Dataset<T>> {
    let (u, i) = (d_universal.shape(), d_in.shape());
    if u != i {
        let hint = if u.channels != i.channels && u.height == i.height && u.width == i.width {
            "; convert the universal set with to_grayscale first"
        } else {
            ""
        };
        return Err(Error::Dimension(format!(
            "universal set has shape {u}, in-distribution set {i}{hint}"
        )));
    }
    let mut items = Vec::with_capacity(d_universal.len() + d_in.len());
    items.extend_from_slice(d_universal.items());
    items.extend_from_slice(d_in.items());
    Dataset::new(
        format!("{}+{}", d_universal.name(), d_in.name()),
        DatasetTag::BaseUniversal,
        items,
    )
}

/// Draws `batch_size` slots: label `y ~ Bernoulli(prior_p1)`, an index
/// uniformly with replacement from the matching dataset, then spread noise on
/// every input. Labels and indices are drawn before any noise.
pub fn sample_batch<T: Scalar>(
    d_in: &Dataset<T>,
    d_base: &Dataset<T>,
    cfg: &PairSamplerConfig,
    rng: &mut RngStream,
) -> Result<LabeledBatch<T>> {
    cfg.validate()?;
    if d_in.shape() != d_base.shape() {
        return Err(Error::Dimension(format!(
            "in-distribution shape {} vs base shape {}",
            d_in.shape(),
            d_base.shape()
        )));
    }
    let mut labels = Vec::with_capacity(cfg.batch_size);
    let mut inputs = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.batch_size {
        let y = rng.bernoulli(cfg.prior_p1);
        let src = if y { d_in } else { d_base };
        inputs.push(src.get(rng.below(src.len())).clone());
        labels.push(u8::from(y));
    }
    for x in &mut inputs {
        add_noise_in_place(x, cfg.sigma, rng)?;
    }
    LabeledBatch::new(inputs, labels)
}
