//! AUROC, score histograms and per-epoch evaluation logs.

use std::collections::BTreeMap;
use std::io::{self, Write};

use crate::classifier::Model;
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scoring::score_dataset;

/// Mann–Whitney AUROC with in-distribution as the positive class:
/// `P(id > ood) + ½·P(id = ood)`, via midranks in `O(n log n)`.
pub fn auroc<T: Scalar>(id_scores: &[T], ood_scores: &[T]) -> Result<f64> {
    if id_scores.is_empty() || ood_scores.is_empty() {
        return Err(Error::Empty("AUROC needs at least one ID and one OOD score".into()));
    }
    let mut all: Vec<(f64, bool)> = id_scores
        .iter()
        .map(|&s| (s.as_f64(), true))
        .chain(ood_scores.iter().map(|&s| (s.as_f64(), false)))
        .collect();
    if all.iter().any(|(s, _)| !s.is_finite()) {
        return Err(Error::NonFinite("AUROC input scores".into()));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut id_rank_sum = 0.0f64;
    let mut start = 0;
    while start < all.len() {
        let mut end = start + 1;
        while end < all.len() && all[end].0 == all[start].0 {
            end += 1;
        }
        // ranks start+1 ..= end share their mean
        let midrank = (start + 1 + end) as f64 / 2.0;
        let ids = all[start..end].iter().filter(|(_, is_id)| *is_id).count();
        id_rank_sum += midrank * ids as f64;
        start = end;
    }
    let n_id = id_scores.len() as f64;
    let n_ood = ood_scores.len() as f64;
    let u = id_rank_sum - n_id * (n_id + 1.0) / 2.0;
    Ok(u / (n_id * n_ood))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width histogram; bins are right-open except the last.
///
/// Without an explicit range the bins span `[min, max]` of the scores, widened
/// by ½ on both sides when all scores are equal. Out-of-range scores are not
/// counted.
pub fn histogram<T: Scalar>(scores: &[T], bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::Range("histogram needs at least one bin".into()));
    }
    let (lo, hi) = match range {
        Some((lo, hi)) => {
            if !(lo < hi) {
                return Err(Error::Range(format!("histogram range [{lo}, {hi}] is empty")));
            }
            (lo, hi)
        }
        None => {
            if scores.is_empty() {
                return Err(Error::Empty("histogram of no scores needs an explicit range".into()));
            }
            let lo = scores.iter().map(|s| s.as_f64()).fold(f64::INFINITY, f64::min);
            let hi = scores.iter().map(|s| s.as_f64()).fold(f64::NEG_INFINITY, f64::max);
            if lo < hi {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        }
    };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0usize; bins];
    for s in scores {
        let s = s.as_f64();
        if !(lo..=hi).contains(&s) {
            continue;
        }
        let mut b = (((s - lo) / width) as usize).min(bins - 1);
        // float division can land one bin off the edge it should respect
        while b > 0 && s < edges[b] {
            b -= 1;
        }
        while b + 1 < bins && s >= edges[b + 1] {
            b += 1;
        }
        counts[b] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub mean_loss: f64,
    /// AUROC per OOD set; empty for epochs without evaluation.
    pub auroc: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpochLog {
    rows: Vec<EpochRow>,
}

impl EpochLog {
    /// Appends a row; epochs must increase and AUROC values lie in `[0, 1]`.
    pub fn push(&mut self, row: EpochRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.epoch <= last.epoch {
                return Err(Error::Domain(format!(
                    "epoch {} logged after epoch {}",
                    row.epoch, last.epoch
                )));
            }
        }
        if let Some((k, v)) = row.auroc.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Range(format!("AUROC for '{k}' is {v}")));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[EpochRow] {
        &self.rows
    }

    /// AUROC of one OOD set over the evaluated epochs, in epoch order.
    pub fn auroc_series(&self, name: &str) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.auroc.get(name).copied()).collect()
    }

    pub fn write_auroc_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "epoch,ood_name,auroc")?;
        for r in &self.rows {
            for (name, v) in &r.auroc {
                writeln!(w, "{},{},{}", r.epoch, name, v)?;
            }
        }
        Ok(())
    }

    pub fn write_loss_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "epoch,mean_loss")?;
        for r in &self.rows {
            writeln!(w, "{},{}", r.epoch, r.mean_loss)?;
        }
        Ok(())
    }
}

pub fn write_histogram_csv<W: Write>(h: &Histogram, mut w: W) -> io::Result<()> {
    writeln!(w, "bin_lo,bin_hi,count")?;
    for (i, c) in h.counts.iter().enumerate() {
        writeln!(w, "{},{},{}", h.edges[i], h.edges[i + 1], c)?;
    }
    Ok(())
}

/// Scores the ID set and every OOD set with clean inputs and returns the
/// AUROC of ID against each OOD set.
pub fn epoch_auroc_hook<T: Scalar>(
    model: &Model<T>,
    id_eval: &Dataset<T>,
    ood_evals: &BTreeMap<String, Dataset<T>>,
) -> Result<BTreeMap<String, f64>> {
    let values = |d: &Dataset<T>| -> Result<Vec<T>> {
        Ok(score_dataset(model, d, d.name(), None)?
            .into_iter()
            .map(|r| r.log_ratio)
            .collect())
    };
    let id = values(id_eval)?;
    ood_evals
        .iter()
        .map(|(name, d)| Ok((name.clone(), auroc(&id, &values(d)?)?)))
        .collect()
}

/// Sample standard deviation (`n − 1` denominator); 0 for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::ArchitectureSpec;
    use crate::datasets::DatasetTag;
    use crate::rng::seeded_rng;
    use crate::tensor::{Shape, Tensor};
    use proptest::prelude::*;

    fn brute(id: &[f64], ood: &[f64]) -> f64 {
        let mut s = 0.0;
        for a in id {
            for b in ood {
                s += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
            }
        }
        s / (id.len() * ood.len()) as f64
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[2.0f64, 3.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(auroc(&[1.0f64], &[1.0]).unwrap(), 0.5);
        // pairs (3,2) (3,0) (1,0) win, (1,2) loses
        assert_eq!(auroc(&[3.0f64, 1.0], &[2.0, 0.0]).unwrap(), 0.75);
        assert!(auroc::<f64>(&[], &[1.0]).is_err());
        assert!(auroc::<f64>(&[1.0], &[]).is_err());
    }

    #[test]
    fn auroc_monotone_invariance_bit_exact() {
        let mut r = seeded_rng(3);
        let id: Vec<f64> = (0..150).map(|_| (r.normal() * 4.0).round() / 4.0 + 0.3).collect();
        let ood: Vec<f64> = (0..120).map(|_| (r.normal() * 4.0).round() / 4.0).collect();
        let base = auroc(&id, &ood).unwrap();
        let affine = |v: &[f64]| v.iter().map(|x| 2.0 * x + 1.0).collect::<Vec<_>>();
        let cube = |v: &[f64]| v.iter().map(|x| x * x * x).collect::<Vec<_>>();
        assert_eq!(base.to_bits(), auroc(&affine(&id), &affine(&ood)).unwrap().to_bits());
        assert_eq!(base.to_bits(), auroc(&cube(&id), &cube(&ood)).unwrap().to_bits());
    }

    #[test]
    fn negated_scores_complement_with_ties() {
        let mut r = seeded_rng(4);
        for _ in 0..100 {
            let id: Vec<f64> = (0..1 + r.below(40)).map(|_| r.below(6) as f64).collect();
            let ood: Vec<f64> = (0..1 + r.below(40)).map(|_| r.below(6) as f64).collect();
            let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
            let sum = auroc(&id, &ood).unwrap() + auroc(&neg(&id), &neg(&ood)).unwrap();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn auroc_equals_pairwise_count(
            id in proptest::collection::vec(-20i32..20, 1..200),
            ood in proptest::collection::vec(-20i32..20, 1..200),
        ) {
            let id: Vec<f64> = id.into_iter().map(|v| v as f64 / 4.0).collect();
            let ood: Vec<f64> = ood.into_iter().map(|v| v as f64 / 4.0).collect();
            prop_assert!((auroc(&id, &ood).unwrap() - brute(&id, &ood)).abs() <= 1e-12);
        }

        #[test]
        fn swapped_roles_sum_to_one(
            id in proptest::collection::vec(-1e3f64..1e3, 1..100),
            ood in proptest::collection::vec(-1e3f64..1e3, 1..100),
        ) {
            prop_assume!(id.iter().all(|a| ood.iter().all(|b| a != b)));
            let s = auroc(&id, &ood).unwrap() + auroc(&ood, &id).unwrap();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn histogram_examples() {
        assert_eq!(histogram(&[0.0f64, 0.0, 0.0], 1, None).unwrap().counts, vec![3]);
        let h = histogram(&[0.0f64, 1.0, 2.0, 3.0], 2, Some((0.0, 4.0))).unwrap();
        assert_eq!(h.counts, vec![2, 2]);
        assert_eq!(h.edges, vec![0.0, 2.0, 4.0]);
        assert!(histogram(&[1.0f64], 2, Some((1.0, 1.0))).is_err());
        assert!(histogram(&[1.0f64], 0, None).is_err());
    }

    #[test]
    fn histogram_last_bin_closed() {
        let h = histogram(&[0.0f64, 1.0, 2.0], 2, Some((0.0, 2.0))).unwrap();
        assert_eq!(h.counts, vec![1, 2]);
    }

    #[test]
    fn histogram_recount_oracle() {
        let mut r = seeded_rng(9);
        for trial in 0..1000 {
            let n = 1 + r.below(50);
            let scores: Vec<f64> = (0..n).map(|_| r.normal() * 3.0).collect();
            let bins = 1 + r.below(20);
            let (lo, hi) = (-2.0 - r.uniform(), 2.0 + r.uniform());
            let h = histogram(&scores, bins, Some((lo, hi))).unwrap();
            let in_range = scores.iter().filter(|s| (lo..=hi).contains(*s)).count();
            assert_eq!(h.counts.iter().sum::<usize>(), in_range, "trial {trial}");
            for (i, &c) in h.counts.iter().enumerate() {
                let last = i + 1 == bins;
                let recount = scores
                    .iter()
                    .filter(|&&s| s >= h.edges[i] && (s < h.edges[i + 1] || (last && s <= h.edges[i + 1])))
                    .count();
                assert_eq!(c, recount, "trial {trial} bin {i}");
            }
        }
    }

    #[test]
    fn epoch_log_invariants() {
        let mut log = EpochLog::default();
        log.push(EpochRow { epoch: 1, mean_loss: 0.5, auroc: BTreeMap::new() }).unwrap();
        assert!(log.push(EpochRow { epoch: 1, mean_loss: 0.5, auroc: BTreeMap::new() }).is_err());
        let bad = BTreeMap::from([("x".to_string(), 1.5)]);
        assert!(log.push(EpochRow { epoch: 2, mean_loss: 0.5, auroc: bad }).is_err());
        let ok = BTreeMap::from([("b".to_string(), 0.5), ("a".to_string(), 0.25)]);
        log.push(EpochRow { epoch: 2, mean_loss: 0.4, auroc: ok }).unwrap();
        let mut buf = Vec::new();
        log.write_auroc_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epoch,ood_name,auroc\n2,a,0.25\n2,b,0.5\n");
    }

    fn dataset(vals: &[f32], name: &str) -> Dataset<f32> {
        let items = vals.iter().map(|&v| Tensor::vector(vec![v, -v]).unwrap()).collect();
        Dataset::new(name, DatasetTag::OodTest, items).unwrap()
    }

    #[test]
    fn hook_with_zero_head_is_half() {
        let spec = ArchitectureSpec::mlp(Shape::vector(2), &[3]).unwrap();
        let mut m = Model::<f32>::init(&spec, 0).unwrap();
        let h = m.head_index();
        m.params_mut()[h].weight.iter_mut().for_each(|w| *w = 0.0);
        let id = dataset(&[0.1, 0.5, 0.9], "id");
        let oods = BTreeMap::from([("a".to_string(), dataset(&[3.0, -2.0], "a")), ("b".to_string(), dataset(&[7.0], "b"))]);
        let r = epoch_auroc_hook(&m, &id, &oods).unwrap();
        assert_eq!(r["a"], 0.5);
        assert_eq!(r["b"], 0.5);
    }

    #[test]
    fn hook_same_set_is_half() {
        let spec = ArchitectureSpec::mlp(Shape::vector(2), &[3]).unwrap();
        let m = Model::<f32>::init(&spec, 7).unwrap();
        let id = dataset(&[0.1, 0.5, 0.9, -1.0, 2.0], "id");
        let oods = BTreeMap::from([("same".to_string(), id.clone())]);
        assert_eq!(epoch_auroc_hook(&m, &id, &oods).unwrap()["same"], 0.5);
    }

    #[test]
    fn std_helper() {
        assert_eq!(sample_std(&[1.0]), 0.0);
        assert!((sample_std(&[1.0, 3.0]) - 2f64.sqrt()).abs() < 1e-15);
    }
}
