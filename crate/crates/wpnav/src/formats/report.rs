//! Comparison tables as CSV.

use std::fmt::Write as _;

use wpnav_core::eval::ComparisonRow;

pub const HEADER: &str = "path,variant,random_start,MWMD,MCTD,completed_trials,diverged_trials,trials";

/// Cell text for a distance that has no eligible trials.
pub const DIVERGED: &str = "Diverged";

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_else(|| DIVERGED.into())
}

pub fn to_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.path_id,
            r.variant,
            if r.random_start { "Yes" } else { "No" },
            cell(r.mwmd),
            cell(r.mctd),
            r.completed_trials,
            r.diverged_trials,
            r.trials
        )
        .expect("String write");
    }
    out
}
