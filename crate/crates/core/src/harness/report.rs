//! Time-to-threshold comparison across runs.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use super::artifacts::{self, MetricsRow};
use crate::error::{Error, Result};

/// One run's metric series, labelled.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportInput {
    pub label: String,
    /// Runs are comparable only when these agree.
    pub reference_key: String,
    pub metrics: Vec<MetricsRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdRow {
    pub label: String,
    pub threshold: f64,
    /// First evaluation with `W₂ ≤ threshold`; `None` when never reached.
    pub first_iter: Option<u64>,
    pub first_wall_ns: Option<u64>,
}

/// Loads `summary.txt` and `metrics.csv` from a run directory.
pub fn load_run(dir: &Path) -> Result<ReportInput> {
    let summary = artifacts::read_summary(artifacts::open(&dir.join(artifacts::SUMMARY_FILE))?)?;
    let metrics = artifacts::read_metrics(artifacts::open(&dir.join(artifacts::METRICS_FILE))?)?;
    if summary.get("digest") != Some(&metrics.digest) {
        return Err(Error::Format(format!("{}: summary and metrics digests differ", dir.display())));
    }
    let reference_key = summary
        .get("reference_key")
        .cloned()
        .ok_or_else(|| Error::Format(format!("{}: summary has no reference_key", dir.display())))?;
    let label = match (summary.get("scheme"), summary.get("workers")) {
        (Some(s), Some(w)) => format!("{s}-p{w}"),
        _ => dir.display().to_string(),
    };
    Ok(ReportInput {
        label,
        reference_key,
        metrics: metrics.rows,
    })
}

/// Smallest threshold every run reaches: the largest per-run minimum W₂.
pub fn common_threshold(runs: &[ReportInput]) -> Option<f64> {
    runs.iter()
        .map(|r| r.metrics.iter().map(|m| m.w2).fold(f64::INFINITY, f64::min))
        .filter(|v| v.is_finite())
        .reduce(f64::max)
}

/// Time-to-threshold table, one row per run and threshold.
pub fn compare_report(runs: &[ReportInput], thresholds: &[f64]) -> Result<Vec<ThresholdRow>> {
    if runs.len() < 2 {
        return Err(Error::invalid("a comparison needs at least two runs"));
    }
    if runs.iter().any(|r| r.reference_key != runs[0].reference_key) {
        return Err(Error::Config("runs use different potentials or references".into()));
    }
    if thresholds.is_empty() {
        return Err(Error::invalid("no thresholds given"));
    }
    let mut out = Vec::new();
    for &t in thresholds {
        for r in runs {
            let hit = r.metrics.iter().find(|m| m.w2 <= t);
            out.push(ThresholdRow {
                label: r.label.clone(),
                threshold: t,
                first_iter: hit.map(|m| m.iter),
                first_wall_ns: hit.map(|m| m.wall_ns),
            });
        }
    }
    Ok(out)
}

fn na<T: ToString>(v: Option<T>) -> String {
    v.map_or("NA".into(), |x| x.to_string())
}

pub fn write_thresholds<W: Write>(w: W, rows: &[ThresholdRow]) -> Result<()> {
    let mut cw = csv::Writer::from_writer(w);
    cw.write_record(["label", "threshold", "first_iter", "first_wall_ns"])?;
    for r in rows {
        cw.write_record([r.label.clone(), r.threshold.to_string(), na(r.first_iter), na(r.first_wall_ns)])?;
    }
    cw.flush().map_err(|e| Error::io("<report>", e))?;
    Ok(())
}

/// The W₂ series of every run on a shared iteration axis, and separately on
/// each run's own wall-clock axis (long format).
pub fn write_aligned<W: Write>(w: W, runs: &[ReportInput]) -> Result<()> {
    let iters: BTreeSet<u64> = runs.iter().flat_map(|r| r.metrics.iter().map(|m| m.iter)).collect();
    let lookup: Vec<BTreeMap<u64, &MetricsRow>> = runs
        .iter()
        .map(|r| r.metrics.iter().map(|m| (m.iter, m)).collect())
        .collect();
    let mut cw = csv::Writer::from_writer(w);
    let mut header = vec!["iter".to_string()];
    for r in runs {
        header.push(format!("w2_{}", r.label));
        header.push(format!("wall_ns_{}", r.label));
    }
    cw.write_record(&header)?;
    for k in iters {
        let mut row = vec![k.to_string()];
        for l in &lookup {
            let m = l.get(&k);
            row.push(na(m.map(|m| m.w2)));
            row.push(na(m.map(|m| m.wall_ns)));
        }
        cw.write_record(&row)?;
    }
    cw.flush().map_err(|e| Error::io("<report>", e))?;
    Ok(())
}
