//! `oracle-check`: train on synthetic draws and compare with the closed form.

use std::collections::BTreeMap;

use oodratio::base::PairSamplerConfig;
use oodratio::classifier::{save_checkpoint, train, Model};
use oodratio::datasets::{Dataset, DatasetTag};
use oodratio::evaluation::{auroc, epoch_auroc_hook, sample_std};
use oodratio::oracle::{mean_abs_error, mixture_log_ratio, mixture_test_grid, write_oracle_report_csv, GaussianMixture};
use oodratio::scoring::{score_dataset, write_scores_csv};
use oodratio::tensor::{Shape, Tensor};
use oodratio::RngStream;
use serde::Serialize;

use super::{write_output, write_text};
use crate::config::{to_json, ArchConfig, OracleConfig};
use crate::error::CliResult;

/// Epochs at the end of training over which AUROC spread is measured.
pub const STABILITY_WINDOW: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SetSummary {
    pub final_auroc: f64,
    /// Sample std of per-epoch AUROC over the last [`STABILITY_WINDOW`] epochs.
    pub auroc_std_last20: f64,
    /// AUROC of the exact log ratio `log p_in − log p_base` on the same draws.
    pub bayes_auroc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleSummary {
    /// Mean `|estimated − analytic|` of the spread log ratio over the grid.
    pub mae: f64,
    pub grid_size: usize,
    pub epochs: usize,
    pub final_loss: f64,
    pub sets: BTreeMap<String, SetSummary>,
    pub rng: &'static str,
}

fn draw(m: &GaussianMixture<f64>, n: usize, seed: u64, stream: &str, name: &str) -> CliResult<Dataset<f32>> {
    let mut rng = RngStream::for_component(seed, stream);
    Ok(m.sample(n, &mut rng)?.cast::<f32>().with_name(name))
}

fn exact_scores(d: &Dataset<f32>, p_in: &GaussianMixture<f64>, p_base: &GaussianMixture<f64>) -> CliResult<Vec<f64>> {
    d.items()
        .iter()
        .map(|x| {
            let v: Vec<f64> = x.as_slice().iter().map(|&v| f64::from(v)).collect();
            Ok(mixture_log_ratio(&v, p_in, p_base, 0.0)?)
        })
        .collect()
}

/// Writes `oracle_report.csv`, `scores.csv`, `auroc.csv`, `loss.csv`,
/// `model.rdrm`, `summary.json` and the effective `config.json`.
pub fn cmd_oracle_check(cfg: OracleConfig) -> CliResult<OracleSummary> {
    let mut cfg = cfg;
    cfg.train.seed = cfg.seed;
    cfg.validate()?;
    let (p_in, p_base) = (cfg.p_in.to_mixture()?, cfg.p_base.to_mixture()?);
    let seed = cfg.seed;
    let d_in = draw(&p_in, cfg.samples_per_side, seed, "oracle/train-in", "in")?.with_tag(DatasetTag::In);
    let d_base = draw(&p_base, cfg.samples_per_side, seed, "oracle/train-base", "base")?
        .with_tag(DatasetTag::BaseUniversal);
    let id_test = draw(&p_in, cfg.test_samples, seed, "oracle/test-in", "id")?;
    let mut oods = BTreeMap::new();
    for s in cfg.effective_ood_sets() {
        let m = s.distribution.to_mixture()?;
        let d = draw(&m, cfg.test_samples, seed, &format!("oracle/ood/{}", s.name), &s.name)?
            .with_tag(DatasetTag::OodTest);
        oods.insert(s.name, d);
    }

    let input = Shape::vector(p_in.dim());
    let arch_cfg = cfg.arch.clone().unwrap_or_else(|| ArchConfig::default_for(input));
    let spec = arch_cfg.build(input)?;
    cfg.arch = Some(arch_cfg);
    let out = cfg.output_dir.clone();
    write_text(&out, "config.json", &to_json(&cfg))?;

    let sampler = PairSamplerConfig::new(cfg.train.batch_size, cfg.sigma)?;
    let mut hook = |_: usize, m: &Model<f32>| epoch_auroc_hook(m, &id_test, &oods);
    let (model, log) = train(&d_in, &d_base, &spec, &cfg.train, &sampler, Some(&mut hook))?;

    let grid = mixture_test_grid(&p_in, &p_base, cfg.grid_points)?;
    let mut analytic = Vec::with_capacity(grid.len());
    let mut estimated = Vec::with_capacity(grid.len());
    for x in &grid {
        analytic.push(mixture_log_ratio(x, &p_in, &p_base, cfg.sigma)?);
        let xf = Tensor::vector(x.iter().map(|&v| v as f32).collect())?;
        estimated.push(f64::from(model.forward_one(&xf)?));
    }
    let mae = mean_abs_error(&analytic, &estimated)?;

    let mut records = score_dataset(&model, &id_test, "id", None)?;
    let id_exact = exact_scores(&id_test, &p_in, &p_base)?;
    let mut sets = BTreeMap::new();
    for (name, d) in &oods {
        records.extend(score_dataset(&model, d, name, None)?);
        let series = log.auroc_series(name);
        let tail = &series[series.len().saturating_sub(STABILITY_WINDOW)..];
        sets.insert(
            name.clone(),
            SetSummary {
                final_auroc: series.last().copied().unwrap_or(f64::NAN),
                auroc_std_last20: sample_std(tail),
                bayes_auroc: auroc(&id_exact, &exact_scores(d, &p_in, &p_base)?)?,
            },
        );
    }
    let summary = OracleSummary {
        mae,
        grid_size: grid.len(),
        epochs: cfg.train.epochs,
        final_loss: log.rows().last().map_or(f64::NAN, |r| r.mean_loss),
        sets,
        rng: oodratio::rng::ALGORITHM_ID,
    };

    write_output(&out, "oracle_report.csv", |b| write_oracle_report_csv(&grid, &analytic, &estimated, b))?;
    write_output(&out, "scores.csv", |b| write_scores_csv(&records, b))?;
    write_output(&out, "auroc.csv", |b| log.write_auroc_csv(b))?;
    write_output(&out, "loss.csv", |b| log.write_loss_csv(b))?;
    save_checkpoint(&model, out.join("model.rdrm"))?;
    write_text(&out, "summary.json", &to_json(&summary))?;
    Ok(summary)
}
