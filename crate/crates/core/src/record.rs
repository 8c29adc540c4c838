//! Run records: the ordered event log of a sampling run.
//!
//! A record keeps one [`StepEvent`] per applied update, the iterates after
//! every `stride` updates, and optionally the stale point each gradient was
//! evaluated at. `iterates[j]` is the chain state after `(j + 1) * stride`
//! updates; the starting point is stored separately as `x0`.
//!
//! # CSV layout
//!
//! Metadata comes first as `# key=value` lines (`format`, `scheme`, `dim`,
//! `seed`, `digest`, `tau_max`, `stride`, `tracking`, `stale_points`, `x0`), then a header
//! row and one row per event:
//!
//! ```text
//! step,delay,delay_min,worker_id,version_at_read,version_at_apply,wall_ns,x0..x{d-1},xhat0..xhat{d-1}
//! ```
//!
//! The `x*` cells are empty on events after which no iterate was kept, and
//! the `xhat*` cells are empty when stale points were not tracked.
//!
//! # Binary frame
//!
//! All integers and floats little-endian, floats as IEEE-754 binary64:
//!
//! ```text
//! magic      8 bytes  "ASGLDREC"
//! version    u32      1
//! dim        u32      d
//! events     u64      n
//! seed       u64
//! stride     u64
//! scheme     u8       0 sim, 1 sync, 2 wcon, 3 wicon
//! flags      u8       bit0 tracking, bit1 stale points present, bit2 tau_max present
//! reserved   u16
//! tau_max    u32
//! digest_len u32, then digest_len bytes of UTF-8
//! x0         d × f64
//! events     n × 48 bytes: step u64, delay u32, delay_min u32, worker u32,
//!            reserved u32, version_at_read u64, version_at_apply u64, wall_ns u64
//! iterates   u64 count, then count × d × f64
//! stale      n × d × f64 (only when flag bit1 is set)
//! ```

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::potentials::ParamVector;

const MAGIC: &[u8; 8] = b"ASGLDREC";
const FORMAT_VERSION: u32 = 1;
const CSV_FORMAT: &str = "asgld-record-v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Sim,
    Sync,
    WCon,
    WIcon,
}

impl Scheme {
    fn code(self) -> u8 {
        match self {
            Scheme::Sim => 0,
            Scheme::Sync => 1,
            Scheme::WCon => 2,
            Scheme::WIcon => 3,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            0 => Scheme::Sim,
            1 => Scheme::Sync,
            2 => Scheme::WCon,
            3 => Scheme::WIcon,
            _ => return Err(Error::Format(format!("unknown scheme code {c}"))),
        })
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Sim => "sim",
            Scheme::Sync => "sync",
            Scheme::WCon => "wcon",
            Scheme::WIcon => "wicon",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sim" => Ok(Scheme::Sim),
            "sync" => Ok(Scheme::Sync),
            "wcon" => Ok(Scheme::WCon),
            "wicon" => Ok(Scheme::WIcon),
            _ => Err(Error::Config(format!("unknown scheme `{s}`"))),
        }
    }
}

/// One applied update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepEvent {
    /// Position in the global update order (0-based).
    pub step: u64,
    /// Staleness in applied updates; the largest per-coordinate staleness
    /// for inconsistent reads.
    pub delay: u32,
    /// Smallest per-coordinate staleness; equals `delay` for whole-vector reads.
    pub delay_min: u32,
    pub worker: u32,
    pub version_read: u64,
    pub version_apply: u64,
    /// Nanoseconds since the run started; 0 when timing is off.
    pub wall_ns: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub scheme: Scheme,
    pub dim: usize,
    pub seed: u64,
    /// Digest of the configuration that produced the run.
    pub digest: String,
    /// Declared staleness bound, when the run enforced or simulated one.
    pub tau_max: Option<u32>,
    pub stride: usize,
    /// Whether `delay`/`version_*` fields carry measured staleness.
    pub tracking: bool,
    pub x0: ParamVector,
    pub events: Vec<StepEvent>,
    pub iterates: Vec<ParamVector>,
    /// Stale point behind each event's gradient.
    pub resolved: Option<Vec<ParamVector>>,
}

impl RunRecord {
    pub fn new(scheme: Scheme, x0: ParamVector, seed: u64, stride: usize) -> Self {
        Self {
            scheme,
            dim: x0.len(),
            seed,
            digest: String::new(),
            tau_max: None,
            stride: stride.max(1),
            tracking: true,
            x0,
            events: Vec::new(),
            iterates: Vec::new(),
            resolved: None,
        }
    }

    pub fn n_steps(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Number of applied updates at which `iterates[j]` was taken.
    pub fn iterate_step(&self, j: usize) -> u64 {
        ((j + 1) * self.stride) as u64
    }

    pub fn final_iterate(&self) -> &[f64] {
        self.iterates.last().unwrap_or(&self.x0)
    }

    /// Chain state after `k` updates, if it was kept.
    pub fn state_at(&self, k: u64) -> Option<&[f64]> {
        if k == 0 {
            return Some(&self.x0);
        }
        let s = self.stride as u64;
        if k % s != 0 {
            return None;
        }
        self.iterates.get((k / s - 1) as usize).map(|v| v.as_slice())
    }

    pub(crate) fn push_iterate_if_due(&mut self, applied: u64, x: &[f64]) {
        if applied % self.stride as u64 == 0 {
            self.iterates.push(x.to_vec());
        }
    }

    // ---- CSV ----

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<record csv>", e);
        writeln!(w, "# format={CSV_FORMAT}").map_err(io)?;
        writeln!(w, "# scheme={}", self.scheme).map_err(io)?;
        writeln!(w, "# dim={}", self.dim).map_err(io)?;
        writeln!(w, "# seed={}", self.seed).map_err(io)?;
        writeln!(w, "# digest={}", self.digest).map_err(io)?;
        match self.tau_max {
            Some(t) => writeln!(w, "# tau_max={t}").map_err(io)?,
            None => writeln!(w, "# tau_max=none").map_err(io)?,
        }
        writeln!(w, "# stride={}", self.stride).map_err(io)?;
        writeln!(w, "# tracking={}", self.tracking).map_err(io)?;
        writeln!(w, "# stale_points={}", self.resolved.is_some()).map_err(io)?;
        writeln!(w, "# x0={}", join_floats(&self.x0)).map_err(io)?;

        let mut cw = csv::Writer::from_writer(w);
        let mut header: Vec<String> = [
            "step",
            "delay",
            "delay_min",
            "worker_id",
            "version_at_read",
            "version_at_apply",
            "wall_ns",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend((0..self.dim).map(|i| format!("x{i}")));
        header.extend((0..self.dim).map(|i| format!("xhat{i}")));
        cw.write_record(&header)?;

        let stride = self.stride as u64;
        for (k, e) in self.events.iter().enumerate() {
            let mut row = vec![
                e.step.to_string(),
                e.delay.to_string(),
                e.delay_min.to_string(),
                e.worker.to_string(),
                e.version_read.to_string(),
                e.version_apply.to_string(),
                e.wall_ns.to_string(),
            ];
            let applied = k as u64 + 1;
            match (applied % stride == 0).then(|| self.iterates.get((applied / stride - 1) as usize)) {
                Some(Some(x)) => row.extend(x.iter().map(|v| v.to_string())),
                _ => row.extend(std::iter::repeat_n(String::new(), self.dim)),
            }
            match &self.resolved {
                Some(r) => row.extend(r[k].iter().map(|v| v.to_string())),
                None => row.extend(std::iter::repeat_n(String::new(), self.dim)),
            }
            cw.write_record(&row)?;
        }
        cw.flush().map_err(io)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)
            .map_err(|e| Error::io("<record csv>", e))?;
        let mut meta = std::collections::HashMap::new();
        let mut body_start = 0;
        for line in text.split_inclusive('\n') {
            match line.strip_prefix("# ") {
                Some(kv) => {
                    let (k, v) = kv
                        .trim_end()
                        .split_once('=')
                        .ok_or_else(|| Error::Format(format!("bad metadata line `{line}`")))?;
                    meta.insert(k.to_string(), v.to_string());
                    body_start += line.len();
                }
                None => break,
            }
        }
        let get = |k: &str| {
            meta.get(k)
                .cloned()
                .ok_or_else(|| Error::Format(format!("missing metadata `{k}`")))
        };
        if get("format")? != CSV_FORMAT {
            return Err(Error::Format("unsupported record format".into()));
        }
        let dim: usize = parse_num(&get("dim")?)?;
        let stride: usize = parse_num(&get("stride")?)?;
        let tau = get("tau_max")?;
        let x0 = split_floats(&get("x0")?)?;
        if x0.len() != dim {
            return Err(Error::Format("x0 length disagrees with dim".into()));
        }
        let mut rec = RunRecord {
            scheme: get("scheme")?.parse()?,
            dim,
            seed: parse_num(&get("seed")?)?,
            digest: get("digest")?,
            tau_max: if tau == "none" { None } else { Some(parse_num(&tau)?) },
            stride,
            tracking: get("tracking")? == "true",
            x0,
            events: Vec::new(),
            iterates: Vec::new(),
            resolved: None,
        };

        let mut resolved = Vec::new();
        let any_resolved = get("stale_points")? == "true";
        let mut cr = csv::Reader::from_reader(text[body_start..].as_bytes());
        for row in cr.records() {
            let row = row?;
            if row.len() != 7 + 2 * dim {
                return Err(Error::Format(format!("row has {} fields", row.len())));
            }
            rec.events.push(StepEvent {
                step: parse_num(&row[0])?,
                delay: parse_num(&row[1])?,
                delay_min: parse_num(&row[2])?,
                worker: parse_num(&row[3])?,
                version_read: parse_num(&row[4])?,
                version_apply: parse_num(&row[5])?,
                wall_ns: parse_num(&row[6])?,
            });
            if !row[7].is_empty() {
                rec.iterates.push(parse_cells(&row, 7, dim)?);
            }
            if !row[7 + dim].is_empty() {
                resolved.push(parse_cells(&row, 7 + dim, dim)?);
            }
        }
        if any_resolved {
            if resolved.len() != rec.events.len() {
                return Err(Error::Format("stale points missing on some rows".into()));
            }
            rec.resolved = Some(resolved);
        }
        Ok(rec)
    }

    // ---- binary ----

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf: Vec<u8> = Vec::with_capacity(64 + self.events.len() * 48);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.events.len() as u64).to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        buf.extend_from_slice(&(self.stride as u64).to_le_bytes());
        buf.push(self.scheme.code());
        let flags = u8::from(self.tracking)
            | (u8::from(self.resolved.is_some()) << 1)
            | (u8::from(self.tau_max.is_some()) << 2);
        buf.push(flags);
        buf.extend_from_slice(&0u16.to_le_bytes());
        buf.extend_from_slice(&self.tau_max.unwrap_or(0).to_le_bytes());
        buf.extend_from_slice(&(self.digest.len() as u32).to_le_bytes());
        buf.extend_from_slice(self.digest.as_bytes());
        push_floats(&mut buf, &self.x0);
        for e in &self.events {
            buf.extend_from_slice(&e.step.to_le_bytes());
            buf.extend_from_slice(&e.delay.to_le_bytes());
            buf.extend_from_slice(&e.delay_min.to_le_bytes());
            buf.extend_from_slice(&e.worker.to_le_bytes());
            buf.extend_from_slice(&0u32.to_le_bytes());
            buf.extend_from_slice(&e.version_read.to_le_bytes());
            buf.extend_from_slice(&e.version_apply.to_le_bytes());
            buf.extend_from_slice(&e.wall_ns.to_le_bytes());
        }
        buf.extend_from_slice(&(self.iterates.len() as u64).to_le_bytes());
        for x in &self.iterates {
            push_floats(&mut buf, x);
        }
        if let Some(res) = &self.resolved {
            for x in res {
                push_floats(&mut buf, x);
            }
        }
        w.write_all(&buf).map_err(|e| Error::io("<record binary>", e))
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::io("<record binary>", e))?;
        let mut c = Cursor { bytes: &bytes, pos: 0 };
        if c.take(8)? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        if c.u32()? != FORMAT_VERSION {
            return Err(Error::Format("unsupported frame version".into()));
        }
        let dim = c.u32()? as usize;
        let n = c.u64()? as usize;
        let seed = c.u64()?;
        let stride = c.u64()? as usize;
        let scheme = Scheme::from_code(c.take(1)?[0])?;
        let flags = c.take(1)?[0];
        c.take(2)?;
        let tau = c.u32()?;
        let dlen = c.u32()? as usize;
        let digest = String::from_utf8(c.take(dlen)?.to_vec())
            .map_err(|_| Error::Format("digest is not UTF-8".into()))?;
        let x0 = c.floats(dim)?;
        let mut events = Vec::with_capacity(n);
        for _ in 0..n {
            let step = c.u64()?;
            let delay = c.u32()?;
            let delay_min = c.u32()?;
            let worker = c.u32()?;
            c.u32()?;
            events.push(StepEvent {
                step,
                delay,
                delay_min,
                worker,
                version_read: c.u64()?,
                version_apply: c.u64()?,
                wall_ns: c.u64()?,
            });
        }
        let n_it = c.u64()? as usize;
        let iterates = (0..n_it).map(|_| c.floats(dim)).collect::<Result<Vec<_>>>()?;
        let resolved = if flags & 2 != 0 {
            Some((0..n).map(|_| c.floats(dim)).collect::<Result<Vec<_>>>()?)
        } else {
            None
        };
        if c.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after record".into()));
        }
        Ok(RunRecord {
            scheme,
            dim,
            seed,
            digest,
            tau_max: (flags & 4 != 0).then_some(tau),
            stride,
            tracking: flags & 1 != 0,
            x0,
            events,
            iterates,
            resolved,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let w = std::io::BufWriter::new(f);
        if path.extension().is_some_and(|e| e == "csv") {
            self.write_csv(w)
        } else {
            self.write_binary(w)
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let r = std::io::BufReader::new(f);
        if path.extension().is_some_and(|e| e == "csv") {
            Self::read_csv(r)
        } else {
            Self::read_binary(r)
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("record truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn floats(&mut self, d: usize) -> Result<Vec<f64>> {
        (0..d)
            .map(|_| Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap())))
            .collect()
    }
}

fn push_floats(buf: &mut Vec<u8>, xs: &[f64]) {
    for v in xs {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn join_floats(xs: &[f64]) -> String {
    xs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub(crate) fn split_floats(s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|t| parse_num(t.trim())).collect()
}

fn parse_num<T: FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Format(format!("cannot parse `{s}`")))
}

fn parse_cells(row: &csv::StringRecord, start: usize, d: usize) -> Result<Vec<f64>> {
    (start..start + d).map(|i| parse_num(&row[i])).collect()
}
