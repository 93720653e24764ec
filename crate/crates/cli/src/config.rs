//! JSON experiment configuration.
//!
//! Every field has a default, so a config file only needs the fields it
//! changes. Paths are resolved against the working directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use oodratio::classifier::{ArchitectureSpec, TrainConfig};
use oodratio::datasets::{load_cifar10, load_idx, load_raw, Dataset, DatasetTag, GaussianSpec};
use oodratio::oracle::GaussianMixture;
use oodratio::tensor::Shape;
use oodratio::RngStream;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// A diagonal Gaussian, or a weighted mixture of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Distribution {
    Mixture { components: Vec<Component> },
    Gaussian(GaussianSpec<f64>),
}

impl Distribution {
    pub fn gaussian(mean: Vec<f64>, variance: Vec<f64>) -> Self {
        Distribution::Gaussian(GaussianSpec { mean, variance })
    }

    pub fn to_mixture(&self) -> CliResult<GaussianMixture<f64>> {
        let m = match self {
            Distribution::Gaussian(g) => GaussianMixture::single(GaussianSpec::new(g.mean.clone(), g.variance.clone())?),
            Distribution::Mixture { components } => GaussianMixture::new(
                components
                    .iter()
                    .map(|c| Ok((c.weight, GaussianSpec::new(c.mean.clone(), c.variance.clone())?)))
                    .collect::<oodratio::Result<Vec<_>>>()?,
            ),
        };
        Ok(m?)
    }
}

/// Where a dataset comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "kebab-case")]
pub enum DatasetSource {
    Idx {
        path: PathBuf,
        #[serde(default)]
        count_limit: Option<usize>,
    },
    Cifar10 {
        paths: Vec<PathBuf>,
        #[serde(default)]
        count_limit: Option<usize>,
    },
    Raw {
        path: PathBuf,
        #[serde(default)]
        count_limit: Option<usize>,
    },
    /// `count` seeded draws; the stream is `data/<name>` under the root seed.
    Synthetic { distribution: Distribution, count: usize },
}

impl DatasetSource {
    pub fn load(&self, name: &str, tag: DatasetTag, seed: u64) -> CliResult<Dataset<f32>> {
        let d: Dataset<f32> = match self {
            DatasetSource::Idx { path, count_limit } => load_idx(path, *count_limit)?,
            DatasetSource::Cifar10 { paths, count_limit } => load_cifar10(paths, *count_limit)?,
            DatasetSource::Raw { path, count_limit } => {
                let d: Dataset<f32> = load_raw(path, tag)?;
                match count_limit {
                    Some(n) => d.truncated(*n),
                    None => d,
                }
            }
            DatasetSource::Synthetic { distribution, count } => {
                let mut rng = RngStream::for_component(seed, &format!("data/{name}"));
                distribution.to_mixture()?.sample(*count, &mut rng)?.cast()
            }
        };
        Ok(d.with_name(name).with_tag(tag))
    }

    fn check_paths(&self) -> CliResult<()> {
        let paths: Vec<&PathBuf> = match self {
            DatasetSource::Idx { path, .. } | DatasetSource::Raw { path, .. } => vec![path],
            DatasetSource::Cifar10 { paths, .. } => paths.iter().collect(),
            DatasetSource::Synthetic { .. } => vec![],
        };
        if let DatasetSource::Cifar10 { paths, .. } = self {
            if paths.is_empty() {
                return Err(CliError::Config("cifar10 source lists no batch files".into()));
            }
        }
        for p in paths {
            if !p.is_file() {
                return Err(CliError::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file not found"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedSource {
    pub name: String,
    pub source: DatasetSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ArchConfig {
    Mlp { hidden: Vec<usize> },
    SmallCnn { channels: Vec<usize>, dense_hidden: usize },
}

impl ArchConfig {
    /// Two 32-unit hidden layers for vectors; 8/16-channel CNN for images.
    pub fn default_for(input: Shape) -> Self {
        if input.is_vector() {
            ArchConfig::Mlp { hidden: vec![32, 32] }
        } else {
            ArchConfig::SmallCnn {
                channels: vec![8, 16],
                dense_hidden: 32,
            }
        }
    }

    pub fn build(&self, input: Shape) -> CliResult<ArchitectureSpec> {
        Ok(match self {
            ArchConfig::Mlp { hidden } => ArchitectureSpec::mlp(input, hidden)?,
            ArchConfig::SmallCnn { channels, dense_hidden } => {
                ArchitectureSpec::small_cnn(input, channels, *dense_hidden)?
            }
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseMode {
    #[default]
    Local,
    Universal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseConfig {
    pub mode: BaseMode,
    pub universal: Option<DatasetSource>,
    /// Crop sizes; the default grid for the image size when absent.
    pub crop_grid: Option<Vec<usize>>,
    pub multiplier: usize,
    /// A base file written by `build-base`, used instead of building inline.
    pub prebuilt: Option<PathBuf>,
}

impl Default for BaseConfig {
    fn default() -> Self {
        Self {
            mode: BaseMode::Local,
            universal: None,
            crop_grid: None,
            multiplier: 1,
            prebuilt: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Held-out ID data; without it `holdout_fraction` of the in-dataset is split off.
    pub id_test: Option<DatasetSource>,
    pub holdout_fraction: f64,
    pub ood_sets: Vec<NamedSource>,
    /// Evaluation sets are cut to their first `subset_size` items.
    pub subset_size: usize,
    pub bins: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            id_test: None,
            holdout_fraction: 0.1,
            ood_sets: Vec::new(),
            subset_size: 2000,
            bins: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed for every component stream; it overrides `train.seed`.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub in_dataset: Option<DatasetSource>,
    pub base: BaseConfig,
    pub sigma: f64,
    pub arch: Option<ArchConfig>,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            in_dataset: None,
            base: BaseConfig::default(),
            sigma: 0.1,
            arch: None,
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

fn check_name(name: &str, seen: &mut BTreeSet<String>) -> CliResult<()> {
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return Err(CliError::Config(format!(
            "set name '{name}' must be non-empty ASCII letters, digits, '-' or '_'"
        )));
    }
    if name == "id" || !seen.insert(name.to_string()) {
        return Err(CliError::Config(format!("set name '{name}' is reserved or duplicated")));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> CliResult<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(CliError::Config(format!("sigma {sigma} must be finite and >= 0")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Checks invariants and that every referenced file exists.
    pub fn validate(&self) -> CliResult<&DatasetSource> {
        let src = self
            .in_dataset
            .as_ref()
            .ok_or_else(|| CliError::Config("in_dataset is required".into()))?;
        check_sigma(self.sigma)?;
        self.train.validate()?;
        if self.base.mode == BaseMode::Universal && self.base.universal.is_none() && self.base.prebuilt.is_none() {
            return Err(CliError::Config("base.mode universal requires base.universal".into()));
        }
        if self.base.multiplier == 0 {
            return Err(CliError::Config("base.multiplier must be >= 1".into()));
        }
        let e = &self.eval;
        if !(e.holdout_fraction > 0.0 && e.holdout_fraction < 1.0) {
            return Err(CliError::Config(format!(
                "eval.holdout_fraction {} not in (0,1)",
                e.holdout_fraction
            )));
        }
        if e.subset_size == 0 || e.bins == 0 {
            return Err(CliError::Config("eval.subset_size and eval.bins must be >= 1".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &e.ood_sets {
            check_name(&s.name, &mut seen)?;
        }
        src.check_paths()?;
        for s in self.base.universal.iter().chain(&e.id_test).chain(e.ood_sets.iter().map(|s| &s.source)) {
            s.check_paths()?;
        }
        if let Some(p) = &self.base.prebuilt {
            DatasetSource::Raw {
                path: p.clone(),
                count_limit: None,
            }
            .check_paths()?;
        }
        Ok(src)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedDistribution {
    pub name: String,
    pub distribution: Distribution,
}

/// Synthetic run against the closed-form ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub p_in: Distribution,
    pub p_base: Distribution,
    pub sigma: f64,
    pub samples_per_side: usize,
    /// Draws per evaluation set.
    pub test_samples: usize,
    pub grid_points: usize,
    pub arch: Option<ArchConfig>,
    pub train: TrainConfig,
    /// AUROC sets scored against ID test draws; `p_base` draws named `base` when empty.
    pub ood_sets: Vec<NamedDistribution>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            p_in: Distribution::gaussian(vec![1.0], vec![1.0]),
            p_base: Distribution::gaussian(vec![-1.0], vec![1.0]),
            sigma: 0.1,
            samples_per_side: 10_000,
            test_samples: 2000,
            grid_points: 41,
            arch: None,
            train: TrainConfig::default(),
            ood_sets: Vec::new(),
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> CliResult<()> {
        check_sigma(self.sigma)?;
        self.train.validate()?;
        if self.samples_per_side == 0 || self.test_samples == 0 {
            return Err(CliError::Config("sample counts must be >= 1".into()));
        }
        if self.train.eval_every > self.train.epochs {
            return Err(CliError::Config("train.eval_every exceeds train.epochs".into()));
        }
        if self.grid_points < 2 {
            return Err(CliError::Config("grid_points must be >= 2".into()));
        }
        let (a, b) = (self.p_in.to_mixture()?, self.p_base.to_mixture()?);
        if a.dim() != b.dim() {
            return Err(CliError::Config(format!(
                "p_in has dimension {}, p_base {}",
                a.dim(),
                b.dim()
            )));
        }
        let mut seen = BTreeSet::new();
        for s in &self.ood_sets {
            check_name(&s.name, &mut seen)?;
            if s.distribution.to_mixture()?.dim() != a.dim() {
                return Err(CliError::Config(format!("ood set '{}' has the wrong dimension", s.name)));
            }
        }
        Ok(())
    }

    /// The configured OOD sets, or `p_base` itself under the name `base`.
    pub fn effective_ood_sets(&self) -> Vec<NamedDistribution> {
        if self.ood_sets.is_empty() {
            vec![NamedDistribution {
                name: "base".into(),
                distribution: self.p_base.clone(),
            }]
        } else {
            self.ood_sets.clone()
        }
    }
}

/// Reads a config file, or the defaults when `path` is `None`.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            serde_json::from_str(&text).map_err(|source| CliError::Json {
                path: p.to_path_buf(),
                source,
            })
        }
    }
}

/// Pretty JSON plus a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("config types serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        let o: OracleConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(o, OracleConfig::default());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sigmaa": 1}"#).is_err());
        assert!(serde_json::from_str::<OracleConfig>(r#"{"train": {"epoch": 3}}"#).is_err());
    }

    #[test]
    fn echoed_config_round_trips() {
        let mut c = ExperimentConfig::default();
        c.in_dataset = Some(DatasetSource::Idx {
            path: "a".into(),
            count_limit: Some(10),
        });
        c.arch = Some(ArchConfig::default_for(Shape::new(28, 28, 1)));
        c.eval.ood_sets.push(NamedSource {
            name: "g".into(),
            source: DatasetSource::Synthetic {
                distribution: Distribution::gaussian(vec![0.0], vec![1.0]),
                count: 5,
            },
        });
        let back: ExperimentConfig = serde_json::from_str(&to_json(&c)).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn universal_without_source_is_config_error() {
        let mut c = ExperimentConfig::default();
        c.in_dataset = Some(DatasetSource::Synthetic {
            distribution: Distribution::gaussian(vec![0.0], vec![1.0]),
            count: 5,
        });
        c.base.mode = BaseMode::Universal;
        let err = c.validate().unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }

    #[test]
    fn missing_file_is_reported_before_loading() {
        let mut c = ExperimentConfig::default();
        c.in_dataset = Some(DatasetSource::Idx {
            path: "/nonexistent/x-idx3-ubyte".into(),
            count_limit: None,
        });
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x-idx3-ubyte"), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn mixture_parses_either_form() {
        let g: Distribution = serde_json::from_str(r#"{"mean": [1.0], "variance": [2.0]}"#).unwrap();
        assert_eq!(g.to_mixture().unwrap().components().len(), 1);
        let m: Distribution = serde_json::from_str(
            r#"{"components": [{"weight": 0.5, "mean": [0], "variance": [1]},
                               {"weight": 0.5, "mean": [3], "variance": [1]}]}"#,
        )
        .unwrap();
        assert_eq!(m.to_mixture().unwrap().components().len(), 2);
        let bad: Distribution = serde_json::from_str(r#"{"mean": [1.0], "variance": [-2.0]}"#).unwrap();
        assert!(bad.to_mixture().is_err());
    }

    #[test]
    fn set_names_checked() {
        let mut seen = BTreeSet::new();
        assert!(check_name("fmnist", &mut seen).is_ok());
        assert!(check_name("fmnist", &mut seen).is_err());
        assert!(check_name("id", &mut seen).is_err());
        assert!(check_name("a/b", &mut seen).is_err());
    }
}
