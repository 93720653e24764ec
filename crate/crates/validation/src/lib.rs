//! Shared pieces of the acceptance run: verdict lines and AUROC error bars.

use std::fmt;
use std::time::Duration;

/// Outcome of one acceptance criterion.
#[derive(Clone, Debug)]
pub struct Verdict {
    pub id: &'static str,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl Verdict {
    /// Passes only if `ok` holds and the run stayed within `budget`.
    pub fn new(id: &'static str, name: &'static str, ok: bool, detail: String, elapsed: Duration, budget: Duration) -> Self {
        Self {
            id,
            name,
            pass: ok && elapsed <= budget,
            detail,
            elapsed,
            budget,
        }
    }

    pub fn failed(id: &'static str, name: &'static str, detail: String) -> Self {
        Self {
            id,
            name,
            pass: false,
            detail,
            elapsed: Duration::ZERO,
            budget: Duration::ZERO,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<34} {}  {}  [{:.1}s / {:.0}s]",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs_f64()
        )
    }
}

/// Hanley–McNeil standard error of an AUROC `a` from `n_pos` and `n_neg` scores.
pub fn auroc_standard_error(a: f64, n_pos: usize, n_neg: usize) -> f64 {
    let (n1, n2) = (n_pos as f64, n_neg as f64);
    let q1 = a / (2.0 - a);
    let q2 = 2.0 * a * a / (1.0 + a);
    let var = (a * (1.0 - a) + (n1 - 1.0) * (q1 - a * a) + (n2 - 1.0) * (q2 - a * a)) / (n1 * n2);
    var.max(0.0).sqrt()
}
