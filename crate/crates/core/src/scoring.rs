//! Density-ratio scores and the threshold detector.
//!
//! The score of `x` is the raw classifier logit `z`: `e^z` is the posterior
//! odds `p(y=1|x) / p(y=0|x)`, which under a uniform prior equals the
//! (spread) density ratio `p̃_in(x) / p̃_base(x)`. Only rank order matters
//! downstream, so the ratio itself is never exponentiated.

use std::io::{self, Write};

use crate::classifier::Model;
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::transforms::add_noise_in_place;

pub const SCORES_CSV_HEADER: &str = "sample_id,split,log_ratio";

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRecord<T> {
    pub sample_id: usize,
    pub split: String,
    pub log_ratio: T,
}

/// `p1 / (1 − p1)`; the endpoints have no finite ratio, use the logit instead.
pub fn posterior_to_ratio<T: Scalar>(p1: T) -> Result<T> {
    if !(p1 > T::zero() && p1 < T::one()) {
        return Err(Error::Domain(format!("posterior {p1} not in (0,1)")));
    }
    Ok(p1 / (T::one() - p1))
}

pub fn log_ratio_score<T: Scalar>(model: &Model<T>, x: &Tensor<T>) -> Result<T> {
    model.forward_one(x)
}

/// Optional test-time noise: one seeded `N(0, sigma²)` draw per pixel.
pub struct TestNoise<'a> {
    pub sigma: f64,
    pub rng: &'a mut RngStream,
}

/// Scores every item in dataset order.
pub fn score_dataset<T: Scalar>(
    model: &Model<T>,
    d: &Dataset<T>,
    split: &str,
    mut noise: Option<TestNoise<'_>>,
) -> Result<Vec<ScoreRecord<T>>> {
    if d.shape() != model.input_shape() {
        return Err(Error::Dimension(format!(
            "dataset '{}' has shape {}, model expects input {}",
            d.name(),
            d.shape(),
            model.input_shape()
        )));
    }
    d.items()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let z = match noise.as_mut() {
                Some(n) => {
                    let mut xn = x.clone();
                    add_noise_in_place(&mut xn, n.sigma, n.rng)?;
                    log_ratio_score(model, &xn)?
                }
                None => log_ratio_score(model, x)?,
            };
            Ok(ScoreRecord {
                sample_id: i,
                split: split.to_string(),
                log_ratio: z,
            })
        })
        .collect()
}

/// `D_ε(x)`: 1 (in-distribution) iff `score ≥ epsilon`.
pub fn detect<T: Scalar>(score: T, epsilon: T) -> u8 {
    u8::from(score >= epsilon)
}

pub fn write_scores_csv<T: Scalar, W: Write>(records: &[ScoreRecord<T>], mut w: W) -> io::Result<()> {
    writeln!(w, "{SCORES_CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{},{},{}", r.sample_id, r.split, r.log_ratio)?;
    }
    Ok(())
}

/// Parses a scores CSV; malformed rows are reported with their 1-based line.
pub fn read_scores_csv(text: &str, context: &str) -> Result<Vec<ScoreRecord<f64>>> {
    let mut lines = text.lines().enumerate();
    let bad = |line: usize, detail: String| Error::Format {
        context: format!("{context}:{line}"),
        detail,
    };
    match lines.next() {
        Some((_, h)) if h.trim() == SCORES_CSV_HEADER => {}
        Some((_, h)) => return Err(bad(1, format!("expected header '{SCORES_CSV_HEADER}', found '{h}'"))),
        None => return Err(Error::Empty(format!("{context}: no header"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad(lineno, format!("expected 3 fields, found {}", fields.len())));
        }
        let sample_id = fields[0]
            .trim()
            .parse()
            .map_err(|e| bad(lineno, format!("sample_id '{}': {e}", fields[0])))?;
        let log_ratio: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|e| bad(lineno, format!("log_ratio '{}': {e}", fields[2])))?;
        if !log_ratio.is_finite() {
            return Err(bad(lineno, format!("log_ratio {log_ratio} is not finite")));
        }
        out.push(ScoreRecord {
            sample_id,
            split: fields[1].trim().to_string(),
            log_ratio,
        });
    }
    if out.is_empty() {
        return Err(Error::Empty(format!("{context}: no score rows")));
    }
    Ok(out)
}
