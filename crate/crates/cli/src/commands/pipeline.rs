//! `build-base`, `train` and `score` over configured datasets.

use std::collections::BTreeMap;
use std::path::PathBuf;

use oodratio::base::{build_local_base, build_universal_base, PairSamplerConfig};
use oodratio::classifier::{load_checkpoint, save_checkpoint, train, Model};
use oodratio::datasets::{save_raw, split, to_grayscale, Dataset, DatasetTag};
use oodratio::evaluation::{epoch_auroc_hook, EpochLog};
use oodratio::scoring::{score_dataset, write_scores_csv, TestNoise};
use oodratio::tensor::Shape;
use oodratio::transforms::CropGrid;
use oodratio::RngStream;
use serde::Serialize;

use super::{write_output, write_text};
use crate::config::{to_json, ArchConfig, BaseMode, DatasetSource, ExperimentConfig};
use crate::error::{CliError, CliResult};

/// Written next to the base file by `build-base`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaseManifest {
    pub mode: BaseMode,
    pub shape: Shape,
    pub in_count: usize,
    pub base_count: usize,
    /// Crop-resize samples (local) or universal items.
    pub added_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplier: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crop_sizes: Option<Vec<usize>>,
    pub seed: u64,
    /// Generator identifier, see [`oodratio::rng::ALGORITHM_ID`].
    pub rng: &'static str,
}

/// Checked effective config: root seed copied into the training config.
fn resolve(mut cfg: ExperimentConfig) -> CliResult<ExperimentConfig> {
    cfg.train.seed = cfg.seed;
    cfg.validate()?;
    Ok(cfg)
}

/// Training part of the in-dataset and the ID evaluation set.
fn prepare_in(cfg: &ExperimentConfig) -> CliResult<(Dataset<f32>, Dataset<f32>)> {
    let src = cfg.validate()?;
    let d = src.load("in", DatasetTag::In, cfg.seed)?;
    let (train_in, id_test) = match &cfg.eval.id_test {
        Some(t) => (d, t.load("id", DatasetTag::In, cfg.seed)?),
        None => {
            let mut rng = RngStream::for_component(cfg.seed, "eval/holdout");
            let (a, b) = split(&d, 1.0 - cfg.eval.holdout_fraction, &mut rng)?;
            (a, b.with_name("id"))
        }
    };
    if train_in.shape() != id_test.shape() {
        return Err(oodratio::Error::Dimension(format!(
            "ID test shape {} differs from in-dataset shape {}",
            id_test.shape(),
            train_in.shape()
        ))
        .into());
    }
    Ok((train_in, id_test.truncated(cfg.eval.subset_size)))
}

fn construct_base(cfg: &ExperimentConfig, d_in: &Dataset<f32>) -> CliResult<(Dataset<f32>, BaseManifest)> {
    let s = d_in.shape();
    let mut manifest = BaseManifest {
        mode: cfg.base.mode,
        shape: s,
        in_count: d_in.len(),
        base_count: 0,
        added_count: 0,
        multiplier: None,
        crop_sizes: None,
        seed: cfg.seed,
        rng: oodratio::rng::ALGORITHM_ID,
    };
    let base = match cfg.base.mode {
        BaseMode::Local => {
            if s.is_vector() || s.height != s.width {
                return Err(CliError::Config(format!(
                    "local base needs square images, in-dataset has shape {s}"
                )));
            }
            let grid = match &cfg.base.crop_grid {
                Some(sizes) => CropGrid::new(s.height, sizes.clone())?,
                None => CropGrid::default_for(s.height)?,
            };
            let mut rng = RngStream::for_component(cfg.seed, "base/local");
            let base = build_local_base(d_in, &grid, cfg.base.multiplier, &mut rng)?;
            manifest.multiplier = Some(cfg.base.multiplier);
            manifest.crop_sizes = Some(grid.allowed_sizes().to_vec());
            base
        }
        BaseMode::Universal => {
            let src = cfg
                .base
                .universal
                .as_ref()
                .ok_or_else(|| CliError::Config("base.mode universal requires base.universal".into()))?;
            let mut uni = src.load("universal", DatasetTag::BaseUniversal, cfg.seed)?;
            if uni.shape().channels != s.channels && s.channels == 1 {
                uni = to_grayscale(&uni)?.dataset;
            }
            build_universal_base(&uni, d_in)?
        }
    };
    manifest.base_count = base.len();
    manifest.added_count = base.len() - d_in.len();
    Ok((base, manifest))
}

/// Builds the base dataset and writes `base.rdrt`, `manifest.json` and `config.json`.
pub fn cmd_build_base(cfg: ExperimentConfig) -> CliResult<BaseManifest> {
    let cfg = resolve(cfg)?;
    let (d_in, _) = prepare_in(&cfg)?;
    let (base, manifest) = construct_base(&cfg, &d_in)?;
    let out = &cfg.output_dir;
    write_text(out, "config.json", &to_json(&cfg))?;
    super::ensure_dir(out)?;
    save_raw(&base, out.join("base.rdrt"))?;
    write_text(out, "manifest.json", &to_json(&manifest))?;
    Ok(manifest)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub log: EpochLog,
    pub checkpoint: PathBuf,
}

fn load_ood_sets(cfg: &ExperimentConfig) -> CliResult<BTreeMap<String, Dataset<f32>>> {
    cfg.eval
        .ood_sets
        .iter()
        .map(|s| {
            let d = s.source.load(&s.name, DatasetTag::OodTest, cfg.seed)?;
            Ok((s.name.clone(), d.truncated(cfg.eval.subset_size)))
        })
        .collect()
}

/// Trains on `(D_in, D_base)` and writes `model.rdrm`, `auroc.csv`, `loss.csv`
/// and the effective `config.json`. Every dataset is loaded before training.
pub fn cmd_train(cfg: ExperimentConfig) -> CliResult<TrainOutcome> {
    let mut cfg = resolve(cfg)?;
    let (d_in, id_test) = prepare_in(&cfg)?;
    let base = match &cfg.base.prebuilt {
        Some(p) => DatasetSource::Raw {
            path: p.clone(),
            count_limit: None,
        }
        .load("base", DatasetTag::BaseLocal, cfg.seed)?,
        None => construct_base(&cfg, &d_in)?.0,
    };
    let oods = load_ood_sets(&cfg)?;
    let arch_cfg = cfg.arch.clone().unwrap_or_else(|| ArchConfig::default_for(d_in.shape()));
    let spec = arch_cfg.build(d_in.shape())?;
    cfg.arch = Some(arch_cfg);
    let out = cfg.output_dir.clone();
    write_text(&out, "config.json", &to_json(&cfg))?;

    let sampler = PairSamplerConfig::new(cfg.train.batch_size, cfg.sigma)?;
    let epochs = cfg.train.epochs;
    let mut hook = |epoch: usize, m: &Model<f32>| {
        let r = epoch_auroc_hook(m, &id_test, &oods)?;
        let parts: Vec<String> = r.iter().map(|(k, v)| format!("{k} {v:.4}")).collect();
        eprintln!("epoch {epoch}/{epochs}: {}", parts.join(", "));
        Ok(r)
    };
    let hook_ref: Option<oodratio::classifier::EvalHook<'_, f32>> =
        if oods.is_empty() { None } else { Some(&mut hook) };
    let (model, log) = train(&d_in, &base, &spec, &cfg.train, &sampler, hook_ref)?;

    let checkpoint = out.join("model.rdrm");
    save_checkpoint(&model, &checkpoint)?;
    write_output(&out, "auroc.csv", |b| log.write_auroc_csv(b))?;
    write_output(&out, "loss.csv", |b| log.write_loss_csv(b))?;
    Ok(TrainOutcome { log, checkpoint })
}

#[derive(Clone, Debug, Default)]
pub struct ScoreArgs {
    /// Defaults to `<output_dir>/model.rdrm`.
    pub checkpoint: Option<PathBuf>,
    /// A single file to score; without it the configured evaluation sets are scored.
    pub input: Option<DatasetSource>,
    pub split: Option<String>,
    pub noise_at_test: bool,
    /// Test-time noise level; defaults to the config's sigma.
    pub noise_sigma: Option<f64>,
    /// Output path for `input`; defaults to `<output_dir>/scores.csv`.
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct ScoreOutcome {
    pub files: Vec<PathBuf>,
}

/// Writes one scores CSV per scored set.
///
/// With `input` the file is written to `out` (default `scores.csv`);
/// otherwise the ID evaluation set and every OOD set go to
/// `scores_<split>.csv`. Test-time noise uses stream `score/noise/<split>`.
pub fn cmd_score(cfg: ExperimentConfig, args: &ScoreArgs) -> CliResult<ScoreOutcome> {
    let mut cfg = cfg;
    cfg.train.seed = cfg.seed;
    let out = cfg.output_dir.clone();
    let ckpt = args.checkpoint.clone().unwrap_or_else(|| out.join("model.rdrm"));
    let model = load_checkpoint(&ckpt)?;
    let sigma = args.noise_sigma.unwrap_or(cfg.sigma);
    if args.noise_at_test && !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(CliError::Config(format!("noise sigma {sigma} must be finite and >= 0")));
    }
    let mut jobs: Vec<(String, Dataset<f32>, PathBuf)> = Vec::new();
    if let Some(src) = &args.input {
        let split_name = args.split.clone().unwrap_or_else(|| "scores".to_string());
        let d = src.load(&split_name, DatasetTag::OodTest, cfg.seed)?;
        jobs.push((split_name, d, args.out.clone().unwrap_or_else(|| out.join("scores.csv"))));
    } else {
        let cfg = resolve(cfg.clone())?;
        let (_, id_test) = prepare_in(&cfg)?;
        jobs.push(("id".into(), id_test, out.join("scores_id.csv")));
        for (name, d) in load_ood_sets(&cfg)? {
            let path = out.join(format!("scores_{name}.csv"));
            jobs.push((name, d, path));
        }
    }
    let mut files = Vec::new();
    for (split_name, d, path) in jobs {
        let mut rng = RngStream::for_component(cfg.seed, &format!("score/noise/{split_name}"));
        let noise = args.noise_at_test.then_some(TestNoise { sigma, rng: &mut rng });
        let recs = score_dataset(&model, &d, &split_name, noise)?;
        let (dir, file) = split_path(&path);
        files.push(write_output(&dir, &file, |b| write_scores_csv(&recs, b))?);
    }
    Ok(ScoreOutcome { files })
}

pub(super) fn split_path(p: &std::path::Path) -> (PathBuf, String) {
    let dir = p.parent().map(PathBuf::from).unwrap_or_default();
    let dir = if dir.as_os_str().is_empty() { PathBuf::from(".") } else { dir };
    let file = p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    (dir, file)
}
