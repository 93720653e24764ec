//! `eval`: AUROC table and histograms from scores CSVs.

use std::path::{Path, PathBuf};

use oodratio::evaluation::{auroc, histogram, write_histogram_csv};
use oodratio::scoring::read_scores_csv;

use super::write_output;
use crate::error::{CliError, CliResult};

#[derive(Clone, Debug)]
pub struct EvalArgs {
    pub id: PathBuf,
    pub ood: Vec<PathBuf>,
    pub bins: usize,
    pub output_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOutcome {
    /// `(ood split, AUROC)` in input order.
    pub rows: Vec<(String, f64)>,
}

fn read(path: &Path) -> CliResult<Vec<(String, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(read_scores_csv(&text, &path.display().to_string())?
        .into_iter()
        .map(|r| (r.split, r.log_ratio))
        .collect())
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Groups rows by split, keeping first-appearance order.
fn by_split(rows: Vec<(String, f64)>) -> Vec<(String, Vec<f64>)> {
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for (s, v) in rows {
        match groups.iter_mut().find(|(name, _)| *name == s) {
            Some((_, vals)) => vals.push(v),
            None => groups.push((s, vec![v])),
        }
    }
    groups
}

/// AUROC of every ID score against each OOD split, plus `hist_<split>.csv`
/// files over one range spanning all inputs and `eval_auroc.csv`.
pub fn cmd_eval(args: &EvalArgs) -> CliResult<EvalOutcome> {
    if args.ood.is_empty() {
        return Err(CliError::Config("eval needs at least one --ood scores file".into()));
    }
    if args.bins == 0 {
        return Err(CliError::Config("--bins must be >= 1".into()));
    }
    let id_rows = read(&args.id)?;
    let id_split = id_rows[0].0.clone();
    let id: Vec<f64> = id_rows.into_iter().map(|(_, v)| v).collect();
    let mut oods = Vec::new();
    for p in &args.ood {
        oods.extend(by_split(read(p)?));
    }
    let mut rows = Vec::new();
    for (name, scores) in &oods {
        rows.push((name.clone(), auroc(&id, scores)?));
    }

    let all = id.iter().chain(oods.iter().flat_map(|(_, s)| s));
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = if lo < hi { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let out = &args.output_dir;
    for (name, scores) in std::iter::once((&id_split, &id)).chain(oods.iter().map(|(n, s)| (n, s))) {
        let h = histogram(scores, args.bins, Some(range))?;
        write_output(out, &format!("hist_{}.csv", file_safe(name)), |b| write_histogram_csv(&h, b))?;
    }
    write_output(out, "eval_auroc.csv", |b| {
        use std::io::Write;
        writeln!(b, "ood_name,auroc")?;
        for (n, a) in &rows {
            writeln!(b, "{n},{a}")?;
        }
        Ok(())
    })?;
    Ok(EvalOutcome { rows })
}
