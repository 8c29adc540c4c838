//! Experiment configuration.
//!
//! A config file is flat `key = value` text. `#` starts a comment, blank
//! lines are ignored, and unknown or repeated keys are errors. Lists are
//! comma separated.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `potential` | `regression` | `quadratic`, `regression` or `rica` |
//! | `scheme` | `sim` | `sim`, `sync`, `wcon`, `wicon` |
//! | `workers` | `1` | worker threads for the threaded schemes |
//! | `seed` | `0` | master seed |
//! | `sigma` | per potential | diffusion temperature |
//! | `gamma` | per potential | constant step size, or first step of a schedule |
//! | `gamma_decay` | `0` | step `k` is `gamma / (1 + k/gamma_offset)^gamma_decay` |
//! | `gamma_offset` | `1` | see above |
//! | `batch` | per potential | `full` or a minibatch size |
//! | `max_iters` | `50000` | update budget |
//! | `wall_budget_ms` | none | optional wall-clock budget for threaded schemes |
//! | `plateau_window` | `500` | iterations without relative W₂ improvement before stopping; `0` disables |
//! | `plateau_tol` | `1e-4` | relative improvement that counts |
//! | `metric_every` | `250` | metric cadence in iterations |
//! | `w2_window` | `500` | trailing iterates (and reference points) per W₂ evaluation |
//! | `kl_bins` | `8` | bins per axis for the histogram KL (only for dim ≤ 6) |
//! | `kl_width` | `4` | grid half-width in Laplace standard deviations |
//! | `delay` | `none` | sim only: `none`, `fixed:T` or `uniform:T` |
//! | `read` | `consistent` | sim only: `consistent` or `inconsistent` |
//! | `tau_cap` | none | wcon only: staleness cap |
//! | `sync_noise` | `per_worker` | sync only: `per_worker` or `per_round` |
//! | `snapshot` | `seqlock` | wcon only: `seqlock` or `blocking` |
//! | `wall_clock` | sim: `false`, else `true` | stamp events with elapsed nanoseconds |
//! | `mode_tol` | `1e-7` | gradient-norm tolerance of the mode search |
//! | `mode_max_iters` | `100000`, rica: `2000` | iteration limit of the mode search |
//! | `hessian_floor` | none | clip Hessian eigenvalues at the mode to at least this value before building the Laplace reference |
//! | `x0` | zeros | starting point (list) |
//! | `out` | `out` | output directory |
//! | `save_record` | `true` | also write the full run record (`record.bin`) |
//! | `quadratic.diag` | `1,4` | diagonal of `A` |
//! | `quadratic.matrix` | none | full row-major `A`, overrides the diagonal |
//! | `quadratic.b` | zeros | linear term |
//! | `regression.n_samples` | `100000` | data set size |
//! | `regression.noise_std` | `0.1` | observation noise |
//! | `regression.coeffs` | random | true coefficients (5 values) |
//! | `regression.mode` | `frozen` | `frozen` or `streaming` |
//! | `rica.data` | required | CIFAR-10 binary batch file |
//! | `rica.lambda` | `0.4` | sparsity weight |
//! | `rica.patch` | `4` | patch side; the filter matrix is `patch² × patch²` |
//! | `rica.n_patches` | `10000` | patches sampled from the images |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec::{NoiseAggregation, SnapshotMode};
use crate::langevin::{Sequence, StepSchedule};
use crate::potentials::{BatchSpec, DataMode};
use crate::record::Scheme;
use crate::sim::{DelayLaw, DelayModel, ReadMode};

#[derive(Clone, Debug, PartialEq)]
pub enum PotentialConfig {
    Quadratic {
        /// Row-major `A`.
        a: Vec<f64>,
        dim: usize,
        b: Vec<f64>,
    },
    Regression {
        n_samples: usize,
        noise_std: f64,
        coeffs: Option<Vec<f64>>,
        mode: DataMode,
    },
    Rica {
        data: PathBuf,
        lambda: f64,
        patch: usize,
        n_patches: usize,
    },
}

impl PotentialConfig {
    pub fn name(&self) -> &'static str {
        match self {
            PotentialConfig::Quadratic { .. } => "quadratic",
            PotentialConfig::Regression { .. } => "regression",
            PotentialConfig::Rica { .. } => "rica",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub potential: PotentialConfig,
    pub scheme: Scheme,
    pub workers: usize,
    pub seed: u64,
    pub sigma: f64,
    pub gamma: f64,
    pub gamma_decay: f64,
    pub gamma_offset: f64,
    pub batch: BatchSpec,
    pub max_iters: u64,
    pub wall_budget: Option<Duration>,
    pub plateau_window: u64,
    pub plateau_tol: f64,
    pub metric_every: u64,
    pub w2_window: usize,
    pub kl_bins: usize,
    pub kl_width: f64,
    pub delay: DelayModel,
    pub tau_cap: Option<u32>,
    pub sync_noise: NoiseAggregation,
    pub snapshot: SnapshotMode,
    pub wall_clock: bool,
    pub mode_tol: f64,
    pub mode_max_iters: u64,
    pub hessian_floor: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub out: PathBuf,
    pub save_record: bool,
}

const KEYS: &[&str] = &[
    "potential",
    "scheme",
    "workers",
    "seed",
    "sigma",
    "gamma",
    "gamma_decay",
    "gamma_offset",
    "batch",
    "max_iters",
    "wall_budget_ms",
    "plateau_window",
    "plateau_tol",
    "metric_every",
    "w2_window",
    "kl_bins",
    "kl_width",
    "delay",
    "read",
    "tau_cap",
    "sync_noise",
    "snapshot",
    "wall_clock",
    "mode_tol",
    "mode_max_iters",
    "hessian_floor",
    "x0",
    "out",
    "save_record",
    "quadratic.diag",
    "quadratic.matrix",
    "quadratic.b",
    "regression.n_samples",
    "regression.noise_std",
    "regression.coeffs",
    "regression.mode",
    "rica.data",
    "rica.lambda",
    "rica.patch",
    "rica.n_patches",
];

/// Raw key/value pairs, validated against the known keys.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key `{k}`", n + 1)));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: key `{k}` given twice", n + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets or replaces a key (command-line overrides).
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.entries.insert(key.to_string(), value.into());
        Ok(())
    }

    fn get(&self, k: &str) -> Option<&str> {
        self.entries.get(k).map(|s| s.as_str())
    }
}

fn bad(k: &str, v: &str) -> Error {
    Error::Config(format!("invalid value `{v}` for `{k}`"))
}

fn num<T: std::str::FromStr>(raw: &RawConfig, k: &str, default: T) -> Result<T> {
    match raw.get(k) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| bad(k, v)),
    }
}

fn opt_num<T: std::str::FromStr>(raw: &RawConfig, k: &str) -> Result<Option<T>> {
    match raw.get(k) {
        None | Some("none") => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|_| bad(k, v)),
    }
}

fn list(raw: &RawConfig, k: &str) -> Result<Option<Vec<f64>>> {
    match raw.get(k) {
        None => Ok(None),
        Some(v) => v
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad(k, v)))
            .collect::<Result<Vec<_>>>()
            .map(Some),
    }
}

fn flag(raw: &RawConfig, k: &str, default: bool) -> Result<bool> {
    match raw.get(k) {
        None => Ok(default),
        Some("true") | Some("1") | Some("yes") => Ok(true),
        Some("false") | Some("0") | Some("no") => Ok(false),
        Some(v) => Err(bad(k, v)),
    }
}

fn positive(k: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("`{k}` must be positive")))
    }
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let kind = raw.get("potential").unwrap_or("regression");
        let potential = match kind {
            "quadratic" => {
                let b_list = list(raw, "quadratic.b")?;
                let (a, dim) = match list(raw, "quadratic.matrix")? {
                    Some(m) => {
                        let dim = (m.len() as f64).sqrt().round() as usize;
                        if dim * dim != m.len() || dim == 0 {
                            return Err(Error::Config("`quadratic.matrix` is not square".into()));
                        }
                        (m, dim)
                    }
                    None => {
                        let diag = list(raw, "quadratic.diag")?.unwrap_or_else(|| vec![1.0, 4.0]);
                        let dim = diag.len();
                        let mut a = vec![0.0; dim * dim];
                        for (i, v) in diag.iter().enumerate() {
                            a[i * dim + i] = *v;
                        }
                        (a, dim)
                    }
                };
                let b = b_list.unwrap_or_else(|| vec![0.0; dim]);
                if b.len() != dim {
                    return Err(Error::Config("`quadratic.b` length differs from the dimension".into()));
                }
                PotentialConfig::Quadratic { a, dim, b }
            }
            "regression" => PotentialConfig::Regression {
                n_samples: num(raw, "regression.n_samples", 100_000)?,
                noise_std: num(raw, "regression.noise_std", 0.1)?,
                coeffs: match raw.get("regression.coeffs") {
                    None | Some("random") => None,
                    Some(_) => list(raw, "regression.coeffs")?,
                },
                mode: match raw.get("regression.mode").unwrap_or("frozen") {
                    "frozen" => DataMode::Frozen,
                    "streaming" => DataMode::Streaming,
                    v => return Err(bad("regression.mode", v)),
                },
            },
            "rica" => PotentialConfig::Rica {
                data: raw
                    .get("rica.data")
                    .map(PathBuf::from)
                    .ok_or_else(|| Error::Config("`rica.data` is required for the rica potential".into()))?,
                lambda: positive("rica.lambda", num(raw, "rica.lambda", crate::potentials::DEFAULT_RICA_LAMBDA)?)?,
                patch: num(raw, "rica.patch", 4)?,
                n_patches: num(raw, "rica.n_patches", 10_000)?,
            },
            v => return Err(bad("potential", v)),
        };

        // per-potential defaults; regression and RICA follow the published
        // protocols, reading the per-step gradient noise N(0, v) as σ = vγ/2
        let (d_sigma, d_gamma, d_batch, d_mode_iters) = match &potential {
            PotentialConfig::Quadratic { .. } => (1.0, 0.005, BatchSpec::Full, 100_000),
            PotentialConfig::Regression { .. } => (0.1 * 0.01 / 2.0, 0.01, BatchSpec::Minibatch(100_000), 100_000),
            // the ℓ₁ term keeps the gradient norm from ever reaching the tolerance
            PotentialConfig::Rica { .. } => (0.01 * 0.002 / 2.0, 0.002, BatchSpec::Minibatch(1000), 2000),
        };

        let scheme: Scheme = raw
            .get("scheme")
            .unwrap_or("sim")
            .parse()
            .map_err(|_| bad("scheme", raw.get("scheme").unwrap_or("")))?;
        let batch = match raw.get("batch") {
            None => d_batch,
            Some("full") => BatchSpec::Full,
            Some(v) => match v.parse::<usize>() {
                Ok(k) if k > 0 => BatchSpec::Minibatch(k),
                _ => return Err(bad("batch", v)),
            },
        };
        let read = match raw.get("read").unwrap_or("consistent") {
            "consistent" => ReadMode::Consistent,
            "inconsistent" => ReadMode::Inconsistent,
            v => return Err(bad("read", v)),
        };
        let delay = match raw.get("delay").unwrap_or("none") {
            "none" => DelayModel::none(),
            v => {
                let (kind, t) = v.split_once(':').ok_or_else(|| bad("delay", v))?;
                let t: u32 = t.trim().parse().map_err(|_| bad("delay", v))?;
                match kind.trim() {
                    "fixed" => DelayModel {
                        mode: read,
                        tau_max: t,
                        law: DelayLaw::Fixed(t),
                    },
                    "uniform" => DelayModel::uniform(read, t),
                    _ => return Err(bad("delay", v)),
                }
            }
        };
        let delay = DelayModel { mode: read, ..delay };

        let cfg = Self {
            potential,
            scheme,
            workers: num(raw, "workers", 1)?,
            seed: num(raw, "seed", 0)?,
            sigma: positive("sigma", num(raw, "sigma", d_sigma)?)?,
            gamma: positive("gamma", num(raw, "gamma", d_gamma)?)?,
            gamma_decay: num(raw, "gamma_decay", 0.0)?,
            gamma_offset: positive("gamma_offset", num(raw, "gamma_offset", 1.0)?)?,
            batch,
            max_iters: num(raw, "max_iters", 50_000)?,
            wall_budget: opt_num::<u64>(raw, "wall_budget_ms")?.map(Duration::from_millis),
            plateau_window: num(raw, "plateau_window", 500)?,
            plateau_tol: num(raw, "plateau_tol", 1e-4)?,
            metric_every: num(raw, "metric_every", 250)?,
            w2_window: num(raw, "w2_window", 500)?,
            kl_bins: num(raw, "kl_bins", 8)?,
            kl_width: positive("kl_width", num(raw, "kl_width", 4.0)?)?,
            delay,
            tau_cap: opt_num(raw, "tau_cap")?,
            sync_noise: match raw.get("sync_noise").unwrap_or("per_worker") {
                "per_worker" => NoiseAggregation::PerWorker,
                "per_round" => NoiseAggregation::PerRound,
                v => return Err(bad("sync_noise", v)),
            },
            snapshot: match raw.get("snapshot").unwrap_or("seqlock") {
                "seqlock" => SnapshotMode::Seqlock,
                "blocking" => SnapshotMode::Blocking,
                v => return Err(bad("snapshot", v)),
            },
            wall_clock: flag(raw, "wall_clock", scheme != Scheme::Sim)?,
            mode_tol: num(raw, "mode_tol", 1e-7)?,
            mode_max_iters: num(raw, "mode_max_iters", d_mode_iters)?,
            hessian_floor: match opt_num::<f64>(raw, "hessian_floor")? {
                Some(v) => Some(positive("hessian_floor", v)?),
                None => None,
            },
            x0: list(raw, "x0")?,
            out: PathBuf::from(raw.get("out").unwrap_or("out")),
            save_record: flag(raw, "save_record", true)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_raw(&RawConfig::load(path)?)
    }

    fn validate(&self) -> Result<()> {
        let cfg_err = |m: &str| Err(Error::Config(m.to_string()));
        if self.workers == 0 {
            return cfg_err("`workers` must be at least 1");
        }
        if self.max_iters == 0 {
            return cfg_err("`max_iters` must be at least 1");
        }
        if self.metric_every == 0 || self.w2_window == 0 {
            return cfg_err("`metric_every` and `w2_window` must be at least 1");
        }
        if self.kl_bins == 0 {
            return cfg_err("`kl_bins` must be at least 1");
        }
        if self.mode_tol <= 0.0 {
            return cfg_err("`mode_tol` must be positive");
        }
        if self.plateau_tol < 0.0 {
            return cfg_err("`plateau_tol` must be nonnegative");
        }
        if self.gamma_decay < 0.0 {
            return cfg_err("`gamma_decay` must be nonnegative");
        }
        if self.scheme != Scheme::Sim && self.delay != DelayModel::none() {
            return cfg_err("`delay` only applies to the sim scheme");
        }
        if self.scheme == Scheme::Sim && self.workers != 1 {
            return cfg_err("the sim scheme runs a single chain; set `workers = 1`");
        }
        match &self.potential {
            PotentialConfig::Regression { n_samples, noise_std, coeffs, .. } => {
                if *n_samples == 0 || !(*noise_std >= 0.0) {
                    return cfg_err("regression needs n_samples ≥ 1 and noise_std ≥ 0");
                }
                if coeffs.as_ref().is_some_and(|c| c.len() != crate::potentials::N_FEATURES) {
                    return cfg_err("`regression.coeffs` needs 5 values");
                }
            }
            PotentialConfig::Rica { patch, n_patches, .. } => {
                if *patch == 0 || *patch > 32 || *n_patches == 0 {
                    return cfg_err("rica needs 1 ≤ patch ≤ 32 and n_patches ≥ 1");
                }
            }
            PotentialConfig::Quadratic { .. } => {}
        }
        Ok(())
    }

    pub fn schedule(&self) -> StepSchedule {
        if self.gamma_decay == 0.0 {
            return StepSchedule::constant(self.gamma);
        }
        StepSchedule {
            gamma: Sequence::Power {
                scale: self.gamma * self.gamma_offset.powf(self.gamma_decay),
                offset: self.gamma_offset,
                exponent: self.gamma_decay,
            },
            lambda: Sequence::Constant(1.0),
        }
    }

    /// Every setting in a fixed order, one `key=value` per line.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        match &self.potential {
            PotentialConfig::Quadratic { a, b, .. } => {
                put("potential", "quadratic".into());
                put("quadratic.matrix", join(a));
                put("quadratic.b", join(b));
            }
            PotentialConfig::Regression { n_samples, noise_std, coeffs, mode } => {
                put("potential", "regression".into());
                put("regression.n_samples", n_samples.to_string());
                put("regression.noise_std", format!("{noise_std:?}"));
                put(
                    "regression.coeffs",
                    coeffs.as_deref().map_or("random".into(), join),
                );
                put(
                    "regression.mode",
                    match mode {
                        DataMode::Frozen => "frozen",
                        DataMode::Streaming => "streaming",
                    }
                    .into(),
                );
            }
            PotentialConfig::Rica { data, lambda, patch, n_patches } => {
                put("potential", "rica".into());
                put("rica.data", data.display().to_string());
                put("rica.lambda", format!("{lambda:?}"));
                put("rica.patch", patch.to_string());
                put("rica.n_patches", n_patches.to_string());
            }
        }
        put("scheme", self.scheme.to_string());
        put("workers", self.workers.to_string());
        put("seed", self.seed.to_string());
        put("sigma", format!("{:?}", self.sigma));
        put("gamma", format!("{:?}", self.gamma));
        put("gamma_decay", format!("{:?}", self.gamma_decay));
        put("gamma_offset", format!("{:?}", self.gamma_offset));
        put(
            "batch",
            match self.batch {
                BatchSpec::Full => "full".into(),
                BatchSpec::Minibatch(k) => k.to_string(),
            },
        );
        put("max_iters", self.max_iters.to_string());
        put(
            "wall_budget_ms",
            self.wall_budget.map_or("none".into(), |d| d.as_millis().to_string()),
        );
        put("plateau_window", self.plateau_window.to_string());
        put("plateau_tol", format!("{:?}", self.plateau_tol));
        put("metric_every", self.metric_every.to_string());
        put("w2_window", self.w2_window.to_string());
        put("kl_bins", self.kl_bins.to_string());
        put("kl_width", format!("{:?}", self.kl_width));
        put(
            "delay",
            match &self.delay.law {
                _ if self.delay == DelayModel::none() => "none".into(),
                DelayLaw::Fixed(t) => format!("fixed:{t}"),
                DelayLaw::Uniform => format!("uniform:{}", self.delay.tau_max),
                DelayLaw::Recorded(_) => "recorded".into(),
            },
        );
        put(
            "read",
            match self.delay.mode {
                ReadMode::Consistent => "consistent",
                ReadMode::Inconsistent => "inconsistent",
            }
            .into(),
        );
        put("tau_cap", self.tau_cap.map_or("none".into(), |t| t.to_string()));
        put("sync_noise", format!("{:?}", self.sync_noise));
        put("snapshot", format!("{:?}", self.snapshot));
        put("wall_clock", self.wall_clock.to_string());
        put("mode_tol", format!("{:?}", self.mode_tol));
        put("mode_max_iters", self.mode_max_iters.to_string());
        put("hessian_floor", self.hessian_floor.map_or("none".into(), |v| format!("{v:?}")));
        put("x0", self.x0.as_deref().map_or("zeros".into(), join));
        put("save_record", self.save_record.to_string());
        s
    }

    /// SHA-256 of [`canonical`](Self::canonical), hex encoded. The output
    /// directory is not part of the digest.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_regression_protocol() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c.potential.name(), "regression");
        assert_eq!(c.gamma, 0.01);
        assert_eq!(c.max_iters, 50_000);
        assert_eq!(c.plateau_window, 500);
        assert_eq!(c.batch, BatchSpec::Minibatch(100_000));
        assert!(!c.wall_clock);
    }

    #[test]
    fn rica_defaults() {
        let c = ExperimentConfig::parse("potential = rica\nrica.data = x.bin\nscheme = wcon\nworkers = 2").unwrap();
        assert_eq!(c.gamma, 0.002);
        assert_eq!(c.batch, BatchSpec::Minibatch(1000));
        assert!(matches!(c.potential, PotentialConfig::Rica { lambda, .. } if lambda == 0.4));
        assert!(c.wall_clock);
        assert!(ExperimentConfig::parse("potential = rica").is_err());
    }

    #[test]
    fn unknown_and_repeated_keys_are_errors() {
        assert!(matches!(ExperimentConfig::parse("gama = 0.1"), Err(Error::Config(_))));
        assert!(ExperimentConfig::parse("gamma = 0.1\ngamma = 0.2").is_err());
        assert!(ExperimentConfig::parse("gamma").is_err());
        assert!(ExperimentConfig::parse("gamma = fast").is_err());
        assert!(ExperimentConfig::parse("mode_tol = 0").is_err());
    }

    #[test]
    fn comments_and_overrides() {
        let mut raw = RawConfig::parse("# header\npotential = quadratic # inline\n\nquadratic.diag = 1, 2, 3\n").unwrap();
        raw.set("seed", "9").unwrap();
        assert!(raw.set("bogus", "1").is_err());
        let c = ExperimentConfig::from_raw(&raw).unwrap();
        assert_eq!(c.seed, 9);
        match c.potential {
            PotentialConfig::Quadratic { dim, ref a, .. } => {
                assert_eq!(dim, 3);
                assert_eq!(a[4], 2.0);
            }
            _ => panic!("wrong potential"),
        }
    }

    #[test]
    fn delay_specs() {
        let c = ExperimentConfig::parse("delay = uniform:8\nread = inconsistent").unwrap();
        assert_eq!(c.delay, DelayModel::uniform(ReadMode::Inconsistent, 8));
        let c = ExperimentConfig::parse("delay = fixed:3").unwrap();
        assert_eq!(c.delay, DelayModel::fixed(3));
        assert!(ExperimentConfig::parse("delay = sometimes:3").is_err());
        assert!(ExperimentConfig::parse("delay = fixed:3\nscheme = sync").is_err());
    }

    #[test]
    fn digest_tracks_settings_but_not_output_dir() {
        let a = ExperimentConfig::parse("seed = 1\nout = a").unwrap();
        let b = ExperimentConfig::parse("seed = 1\nout = b").unwrap();
        let c = ExperimentConfig::parse("seed = 2").unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn decaying_schedule() {
        let c = ExperimentConfig::parse("gamma = 0.1\ngamma_decay = 1\ngamma_offset = 10").unwrap();
        let s = c.schedule();
        assert!((s.gamma_at(0) - 0.1).abs() < 1e-15);
        assert!((s.gamma_at(10) - 0.05).abs() < 1e-15);
    }
}
