//! CSV artifacts. Every file starts with a `# digest=<hex>` line naming the
//! configuration that produced it; `NA` marks a missing value.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const STALENESS_FILE: &str = "staleness.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const RECORD_FILE: &str = "record.bin";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub iter: u64,
    pub wall_ns: u64,
    pub w2: f64,
    pub kl: Option<f64>,
    pub objective: f64,
    /// Mean and max staleness of the updates since the previous row.
    pub delay_mean: f64,
    pub delay_max: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub iter: u64,
    pub x0: f64,
    pub x1: Option<f64>,
}

/// Parsed CSV with its digest.
#[derive(Clone, Debug, PartialEq)]
pub struct Table<T> {
    pub digest: String,
    pub rows: Vec<T>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or("NA".into(), |x| x.to_string())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, what: &str) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad `{what}` field in row {:?}", rec)))
}

fn opt_field(rec: &csv::StringRecord, i: usize, what: &str) -> Result<Option<f64>> {
    match rec.get(i) {
        Some("NA") => Ok(None),
        _ => field(rec, i, what).map(Some),
    }
}

fn write_table<W: Write>(mut w: W, digest: &str, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let io = |e| Error::io("<artifact csv>", e);
    writeln!(w, "# digest={digest}").map_err(io)?;
    let mut cw = csv::Writer::from_writer(w);
    cw.write_record(header)?;
    for r in rows {
        cw.write_record(&r)?;
    }
    cw.flush().map_err(io)?;
    Ok(())
}

fn read_table<R: Read>(r: R, header: &[&str]) -> Result<(String, Vec<csv::StringRecord>)> {
    let mut br = BufReader::new(r);
    let mut first = String::new();
    br.read_line(&mut first).map_err(|e| Error::io("<artifact csv>", e))?;
    let digest = first
        .trim_end()
        .strip_prefix("# digest=")
        .ok_or_else(|| Error::Format("missing `# digest=` line".into()))?
        .to_string();
    let mut cr = csv::Reader::from_reader(br);
    let got = cr.headers()?.clone();
    if got.iter().collect::<Vec<_>>() != header {
        return Err(Error::Format(format!("unexpected header {:?}", got)));
    }
    let rows = cr.records().collect::<std::result::Result<Vec<_>, _>>()?;
    for r in &rows {
        if r.len() != header.len() {
            return Err(Error::Format(format!("row {:?} has the wrong width", r)));
        }
    }
    Ok((digest, rows))
}

const METRICS_HEADER: &[&str] = &["iter", "wall_ns", "w2", "kl", "objective", "delay_mean", "delay_max"];

pub fn write_metrics<W: Write>(w: W, digest: &str, rows: &[MetricsRow]) -> Result<()> {
    write_table(
        w,
        digest,
        METRICS_HEADER,
        rows.iter().map(|r| {
            vec![
                r.iter.to_string(),
                r.wall_ns.to_string(),
                r.w2.to_string(),
                opt(r.kl),
                r.objective.to_string(),
                r.delay_mean.to_string(),
                r.delay_max.to_string(),
            ]
        }),
    )
}

pub fn read_metrics<R: Read>(r: R) -> Result<Table<MetricsRow>> {
    let (digest, recs) = read_table(r, METRICS_HEADER)?;
    let rows = recs
        .iter()
        .map(|r| {
            Ok(MetricsRow {
                iter: field(r, 0, "iter")?,
                wall_ns: field(r, 1, "wall_ns")?,
                w2: field(r, 2, "w2")?,
                kl: opt_field(r, 3, "kl")?,
                objective: field(r, 4, "objective")?,
                delay_mean: field(r, 5, "delay_mean")?,
                delay_max: field(r, 6, "delay_max")?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Table { digest, rows })
}

const TRAJECTORY_HEADER: &[&str] = &["iter", "x0", "x1"];

pub fn write_trajectory<W: Write>(w: W, digest: &str, rows: &[TrajectoryRow]) -> Result<()> {
    write_table(
        w,
        digest,
        TRAJECTORY_HEADER,
        rows.iter().map(|r| vec![r.iter.to_string(), r.x0.to_string(), opt(r.x1)]),
    )
}

pub fn read_trajectory<R: Read>(r: R) -> Result<Table<TrajectoryRow>> {
    let (digest, recs) = read_table(r, TRAJECTORY_HEADER)?;
    let rows = recs
        .iter()
        .map(|r| {
            Ok(TrajectoryRow {
                iter: field(r, 0, "iter")?,
                x0: field(r, 1, "x0")?,
                x1: opt_field(r, 2, "x1")?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Table { digest, rows })
}

const STALENESS_HEADER: &[&str] = &["delay", "count"];

/// Histogram rows `(delay, count)`.
pub fn write_staleness<W: Write>(w: W, digest: &str, histogram: &[u64]) -> Result<()> {
    write_table(
        w,
        digest,
        STALENESS_HEADER,
        histogram
            .iter()
            .enumerate()
            .map(|(d, c)| vec![d.to_string(), c.to_string()]),
    )
}

pub fn read_staleness<R: Read>(r: R) -> Result<Table<u64>> {
    let (digest, recs) = read_table(r, STALENESS_HEADER)?;
    let mut rows = Vec::with_capacity(recs.len());
    for (i, r) in recs.iter().enumerate() {
        let d: usize = field(r, 0, "delay")?;
        if d != i {
            return Err(Error::Format(format!("staleness rows out of order at delay {d}")));
        }
        rows.push(field(r, 1, "count")?);
    }
    Ok(Table { digest, rows })
}

/// `key=value` lines, sorted by key.
pub fn write_summary<W: Write>(mut w: W, summary: &BTreeMap<String, String>) -> Result<()> {
    let io = |e| Error::io("<summary>", e);
    for (k, v) in summary {
        writeln!(w, "{k}={v}").map_err(io)?;
    }
    Ok(())
}

pub fn read_summary<R: Read>(r: R) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for line in BufReader::new(r).lines() {
        let line = line.map_err(|e| Error::io("<summary>", e))?;
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("summary line `{line}` has no `=`")))?;
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub(crate) fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}
