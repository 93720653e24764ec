mod eval;
mod oracle_check;
mod pipeline;

use std::io::Write;
use std::path::{Path, PathBuf};

pub use eval::{cmd_eval, EvalArgs, EvalOutcome};
pub use oracle_check::{cmd_oracle_check, OracleSummary, SetSummary};
pub use pipeline::{cmd_build_base, cmd_score, cmd_train, BaseManifest, ScoreArgs, ScoreOutcome, TrainOutcome};

use crate::error::{CliError, CliResult};

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes `dir/name` from a closure over a byte buffer and returns the path.
fn write_output(
    dir: &Path,
    name: &str,
    fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
) -> CliResult<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    let mut buf = Vec::new();
    fill(&mut buf).map_err(|e| CliError::io(&path, e))?;
    let mut f = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    f.write_all(&buf).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<PathBuf> {
    write_output(dir, name, |b| b.write_all(text.as_bytes()))
}
