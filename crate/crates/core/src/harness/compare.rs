use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::trace::{read_trace_csv, RunTrace};

use super::Manifest;

pub const SUMMARY_HEADER: [&str; 6] = [
    "method",
    "estimator",
    "final_mean",
    "final_std",
    "auc_log",
    "epochs_to_1e-2",
];

/// Smallest residual used inside the log.
const LOG_FLOOR: f64 = 1e-300;
const TARGET: f64 = 1e-2;

/// Per-method statistics over every seed and instance.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub estimator: String,
    pub runs: usize,
    pub final_mean: f64,
    /// Population standard deviation, so a single run gives 0.
    pub final_std: f64,
    /// Mean over runs of `∫ log₁₀ r(e) de` by the trapezoid rule.
    pub auc_log: f64,
    /// Mean over runs of the first epoch with `r ≤ 1e-2`; infinite when some
    /// run never gets there.
    pub epochs_to_target: f64,
}

fn auc_log(t: &RunTrace) -> f64 {
    t.rows
        .windows(2)
        .map(|w| {
            let a = w[0].rel_residual.max(LOG_FLOOR).log10();
            let b = w[1].rel_residual.max(LOG_FLOOR).log10();
            0.5 * (a + b) * (w[1].epochs - w[0].epochs)
        })
        .fold(0.0, |acc, v| acc + v)
}

fn epochs_to_target(t: &RunTrace) -> f64 {
    t.rows
        .iter()
        .find(|r| r.rel_residual <= TARGET)
        .map_or(f64::INFINITY, |r| r.epochs)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc + x) / v.len() as f64
}

/// Groups traces by their `method` column in order of first appearance.
pub fn summarize(traces: &[RunTrace]) -> Vec<SummaryRow> {
    let mut groups: Vec<(String, String, Vec<&RunTrace>)> = Vec::new();
    for t in traces {
        match groups.iter_mut().find(|g| g.0 == t.meta.method) {
            Some(g) => g.2.push(t),
            None => groups.push((t.meta.method.clone(), t.meta.estimator.clone(), vec![t])),
        }
    }
    groups
        .into_iter()
        .map(|(method, estimator, ts)| {
            let finals: Vec<f64> = ts
                .iter()
                .map(|t| t.final_residual().unwrap_or(1.0))
                .collect();
            let m = mean(&finals);
            let var = finals.iter().map(|f| (f - m) * (f - m)).sum::<f64>() / finals.len() as f64;
            let aucs: Vec<f64> = ts.iter().map(|t| auc_log(t)).collect();
            let hits: Vec<f64> = ts.iter().map(|t| epochs_to_target(t)).collect();
            SummaryRow {
                method,
                estimator,
                runs: ts.len(),
                final_mean: m,
                final_std: var.sqrt(),
                auc_log: mean(&aucs),
                epochs_to_target: mean(&hits),
            }
        })
        .collect()
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.estimator.clone(),
            r.final_mean.to_string(),
            r.final_std.to_string(),
            r.auc_log.to_string(),
            r.epochs_to_target.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width text form of the summary.
pub fn format_table(rows: &[SummaryRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.method.len())
        .max()
        .unwrap_or(6)
        .max(6);
    let mut s = format!(
        "{:<width$}  {:<10}  {:>4}  {:>22}  {:>10}  {:>14}\n",
        "method", "estimator", "runs", "final (mean ± std)", "auc_log", "epochs_to_1e-2"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<width$}  {:<10}  {:>4}  {:>10.3e} ± {:<9.2e}  {:>10.3}  {:>14.1}",
            r.method, r.estimator, r.runs, r.final_mean, r.final_std, r.auc_log, r.epochs_to_target
        );
    }
    s
}

/// Reads every trace of a manifest, writes `summary.csv` next to it and
/// returns the rows with their text table.
pub fn compare_manifest(manifest_path: &Path) -> Result<(Vec<SummaryRow>, String)> {
    let manifest = Manifest::read(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let traces = manifest
        .runs
        .iter()
        .map(|r| read_trace_csv(&dir.join(&r.file)))
        .collect::<Result<Vec<_>>>()?;
    let rows = summarize(&traces);
    write_summary_csv(&rows, &dir.join("summary.csv"))?;
    let table = format_table(&rows);
    Ok((rows, table))
}
