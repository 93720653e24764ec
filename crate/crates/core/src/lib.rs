//! Unsupervised out-of-distribution detection by density ratio estimation.
//!
//! A binary classifier is trained to separate samples of an in-distribution
//! dataset from samples of a broader *base* dataset. Under a uniform class
//! prior its logit estimates `log p_in(x) / p_base(x)`, which serves as the
//! OOD score: higher means more in-distribution.
//!
//! The numerical code is generic over [`Scalar`] so the same network can be
//! trained in `f32` and gradient-checked in `f64`. The aliases at the crate
//! root fix the training precision.

pub mod base;
pub mod classifier;
pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod oracle;
pub mod rng;
pub mod scalar;
pub mod scoring;
pub mod tensor;
pub mod transforms;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use scalar::Scalar;

/// Image tensor at training precision.
pub type ImageTensor = tensor::Tensor<f32>;
/// Dataset at training precision.
pub type Dataset = datasets::Dataset<f32>;
/// Classifier at training precision.
pub type Model = classifier::Model<f32>;
/// Classifier at verification precision.
pub type Model64 = classifier::Model<f64>;
/// Labeled minibatch at training precision.
pub type LabeledBatch = base::LabeledBatch<f32>;
/// Score record at training precision.
pub type ScoreRecord = scoring::ScoreRecord<f32>;
/// Gaussian parameters used by the analytic oracle.
pub type GaussianSpec = datasets::GaussianSpec<f64>;
/// Oracle distribution pair.
pub type OraclePair = oracle::OraclePair<f64>;
