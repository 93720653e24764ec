//! Dataset container, on-disk formats, and synthetic generators.

mod cifar;
mod idx;
mod raw;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

pub use cifar::{load_cifar10, parse_cifar10, CIFAR_RECORD_BYTES};
pub use idx::{encode_idx_images, load_idx, parse_idx, IDX_IMAGE_MAGIC};
pub use raw::{decode_raw, encode_raw, load_raw, save_raw, RAW_MAGIC, RAW_VERSION};

/// ITU-R BT.601 luma weights for R, G, B.
pub const GRAYSCALE_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Provenance of a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetTag {
    In,
    BaseLocal,
    BaseUniversal,
    OodTest,
    Synthetic,
}

impl fmt::Display for DatasetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetTag::In => "in",
            DatasetTag::BaseLocal => "base-local",
            DatasetTag::BaseUniversal => "base-universal",
            DatasetTag::OodTest => "ood-test",
            DatasetTag::Synthetic => "synthetic",
        })
    }
}

/// Non-empty, shape-homogeneous, ordered collection of tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    name: String,
    tag: DatasetTag,
    shape: Shape,
    items: Vec<Tensor<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(name: impl Into<String>, tag: DatasetTag, items: Vec<Tensor<T>>) -> Result<Self> {
        let name = name.into();
        let first = items
            .first()
            .ok_or_else(|| Error::Empty(format!("dataset '{name}' has no items")))?;
        let shape = first.shape();
        if let Some((i, t)) = items.iter().enumerate().find(|(_, t)| t.shape() != shape) {
            return Err(Error::Dimension(format!(
                "dataset '{name}': item {i} has shape {}, expected {shape}",
                t.shape()
            )));
        }
        Ok(Self {
            name,
            tag,
            shape,
            items,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tag(&self) -> DatasetTag {
        self.tag
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    /// Always false; kept for API symmetry with collections.
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Tensor<T>] {
        &self.items
    }

    pub fn get(&self, i: usize) -> &Tensor<T> {
        &self.items[i]
    }

    pub fn into_items(self) -> Vec<Tensor<T>> {
        self.items
    }

    pub fn with_tag(mut self, tag: DatasetTag) -> Self {
        self.tag = tag;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// First `n` items (all of them when `n >= len`).
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.clamp(1, self.items.len());
        Self {
            name: self.name.clone(),
            tag: self.tag,
            shape: self.shape,
            items: self.items[..n].to_vec(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            name: self.name.clone(),
            tag: self.tag,
            shape: self.shape,
            items: self.items.iter().map(Tensor::cast).collect(),
        }
    }
}

/// Outcome of [`to_grayscale`]; `already_grayscale` flags a no-op call.
#[derive(Clone, Debug)]
pub struct GrayscaleOutput<T> {
    pub dataset: Dataset<T>,
    pub already_grayscale: bool,
}

/// Converts a 3-channel dataset to luminance with [`GRAYSCALE_WEIGHTS`].
///
/// Each output pixel is clamped into `[min(r,g,b), max(r,g,b)]` so rounding
/// cannot push a convex combination outside its inputs.
pub fn to_grayscale<T: Scalar>(d: &Dataset<T>) -> Result<GrayscaleOutput<T>> {
    match d.shape().channels {
        1 => Ok(GrayscaleOutput {
            dataset: d.clone(),
            already_grayscale: true,
        }),
        3 => {
            let [wr, wg, wb] = GRAYSCALE_WEIGHTS.map(T::of);
            let s = d.shape();
            let out_shape = Shape::new(s.height, s.width, 1);
            let items = d
                .items()
                .iter()
                .map(|t| {
                    let data = t
                        .as_slice()
                        .chunks_exact(3)
                        .map(|px| {
                            let (r, g, b) = (px[0], px[1], px[2]);
                            let lo = r.min(g).min(b);
                            let hi = r.max(g).max(b);
                            (wr * r + wg * g + wb * b).max(lo).min(hi)
                        })
                        .collect();
                    Tensor::from_parts_unchecked(out_shape, data)
                })
                .collect();
            Ok(GrayscaleOutput {
                dataset: Dataset::new(d.name(), d.tag(), items)?,
                already_grayscale: false,
            })
        }
        c => Err(Error::Dimension(format!(
            "grayscale conversion needs 1 or 3 channels, got {c}"
        ))),
    }
}

/// Random partition into parts of `round(fraction * N)` and the remainder.
pub fn split<T: Scalar>(
    d: &Dataset<T>,
    fraction: f64,
    rng: &mut RngStream,
) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Range(format!("split fraction {fraction} not in (0,1)")));
    }
    let n = d.len();
    let first = (fraction * n as f64).round() as usize;
    if first == 0 || first == n {
        return Err(Error::Empty(format!(
            "split of {n} items at fraction {fraction} leaves an empty part"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.below(i + 1);
        perm.swap(i, j);
    }
    let take = |idx: &[usize]| idx.iter().map(|&i| d.items[i].clone()).collect::<Vec<_>>();
    Ok((
        Dataset::new(d.name(), d.tag(), take(&perm[..first]))?,
        Dataset::new(d.name(), d.tag(), take(&perm[first..]))?,
    ))
}

/// Diagonal Gaussian `N(mean, diag(variance))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct GaussianSpec<T> {
    pub mean: Vec<T>,
    pub variance: Vec<T>,
}

impl<T: Scalar> GaussianSpec<T> {
    pub fn new(mean: Vec<T>, variance: Vec<T>) -> Result<Self> {
        let spec = Self { mean, variance };
        spec.validate()?;
        Ok(spec)
    }

    /// `N(mean, var · I)`.
    pub fn isotropic(mean: Vec<T>, var: T) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, vec![var; d])
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.is_empty() {
            return Err(Error::Dimension("Gaussian has dimension 0".into()));
        }
        if self.mean.len() != self.variance.len() {
            return Err(Error::Dimension(format!(
                "Gaussian mean has dimension {}, variance {}",
                self.mean.len(),
                self.variance.len()
            )));
        }
        if let Some(v) = self.variance.iter().find(|v| !(**v > T::zero() && v.is_finite())) {
            return Err(Error::Domain(format!("Gaussian variance {v} must be positive")));
        }
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("Gaussian mean".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Same mean, variance increased by `sigma²` in every dimension.
    pub fn spread(&self, sigma: T) -> Self {
        Self {
            mean: self.mean.clone(),
            variance: self.variance.iter().map(|&v| v + sigma * sigma).collect(),
        }
    }
}

/// `n` i.i.d. draws from `spec`, as `1 × D × 1` tensors tagged synthetic.
pub fn gen_gaussian<T: Scalar>(
    spec: &GaussianSpec<T>,
    n: usize,
    rng: &mut RngStream,
) -> Result<Dataset<T>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Empty("gen_gaussian with n = 0".into()));
    }
    let stds: Vec<f64> = spec.variance.iter().map(|v| v.as_f64().sqrt()).collect();
    let items = (0..n)
        .map(|_| {
            let x = spec
                .mean
                .iter()
                .zip(&stds)
                .map(|(m, s)| T::of(m.as_f64() + s * rng.normal()))
                .collect();
            Tensor::vector(x)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new("gaussian", DatasetTag::Synthetic, items)
}
