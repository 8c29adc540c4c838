//! Multi-threaded shared-memory executors.
//!
//! * [`run_sync`]: barrier rounds; an updater applies every worker's
//!   contribution for the round in worker order.
//! * [`run_wcon`]: workers read consistent snapshots and apply delayed
//!   updates under an exclusive write lock.
//! * [`run_wicon`]: lock-free, per-coordinate atomic reads and writes.
//!
//! Worker `w` draws noise and minibatches from its own substreams of the
//! master seed; worker 0 uses the same streams as the simulator, so every
//! scheme with one worker reproduces the undelayed simulated chain bit for
//! bit.

use std::time::{Duration, Instant};

use crate::error::{check_dim, Error, Result};
use crate::potentials::{BatchSpec, ParamVector};
use crate::record::{RunRecord, Scheme, StepEvent};

mod staleness;
mod store;
mod sync;
mod wcon;
mod wicon;

pub use staleness::{measure_staleness, StalenessSummary};
pub use store::SnapshotMode;
pub use sync::run_sync;
pub use wcon::run_wcon;
pub use wicon::{run_wicon, run_wicon_traced, CoordinateHistory};

/// How Sync rounds inject noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NoiseAggregation {
    /// Every worker adds its own `√(2σγ)·z`, so a round carries `P` noise
    /// draws.
    #[default]
    PerWorker,
    /// Only worker 0's draw is used; one noise term per round.
    PerRound,
}

#[derive(Clone, Debug)]
pub struct WorkerConfig {
    pub workers: usize,
    pub seed: u64,
    pub x0: ParamVector,
    pub batch: BatchSpec,
    /// Total number of applied updates (Sync: rounds).
    pub max_updates: u64,
    /// Optional wall-clock budget; the run stops at whichever limit comes first.
    pub wall_budget: Option<Duration>,
    pub stride: usize,
    /// Keep the point each gradient was evaluated at.
    pub track_stale_points: bool,
    pub wall_clock: bool,
    pub noise: NoiseAggregation,
    pub snapshot: SnapshotMode,
}

impl WorkerConfig {
    pub fn new(workers: usize, x0: ParamVector, seed: u64, max_updates: u64) -> Self {
        Self {
            workers,
            seed,
            x0,
            batch: BatchSpec::Full,
            max_updates,
            wall_budget: None,
            stride: 1,
            track_stale_points: false,
            wall_clock: true,
            noise: NoiseAggregation::PerWorker,
            snapshot: SnapshotMode::Seqlock,
        }
    }

    pub(crate) fn validate(&self, dim: usize) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::invalid("worker count must be at least 1"));
        }
        check_dim(dim, self.x0.len())?;
        self.batch.validate()?;
        if self.max_updates == 0 {
            return Err(Error::invalid("update budget must be at least 1"));
        }
        Ok(())
    }
}

/// Shared run clock.
#[derive(Clone, Copy)]
pub(crate) struct Clock {
    start: Instant,
    stamp: bool,
    budget: Option<Duration>,
}

impl Clock {
    pub(crate) fn new(cfg: &WorkerConfig) -> Self {
        Self {
            start: Instant::now(),
            stamp: cfg.wall_clock,
            budget: cfg.wall_budget,
        }
    }

    pub(crate) fn ns(&self) -> u64 {
        if self.stamp {
            self.start.elapsed().as_nanos() as u64
        } else {
            0
        }
    }

    pub(crate) fn expired(&self) -> bool {
        self.budget.is_some_and(|b| self.start.elapsed() >= b)
    }
}

/// Events and stale points produced by one worker.
#[derive(Default)]
pub(crate) struct WorkerLog {
    pub(crate) events: Vec<StepEvent>,
    pub(crate) resolved: Vec<ParamVector>,
    /// `(update count, state)` pairs taken by this worker.
    pub(crate) iterates: Vec<(u64, ParamVector)>,
}

/// Merges per-worker logs into one record ordered by version.
pub(crate) fn assemble(
    scheme: Scheme,
    cfg: &WorkerConfig,
    logs: Vec<WorkerLog>,
    mut iterates: Vec<(u64, ParamVector)>,
) -> RunRecord {
    let mut rec = RunRecord::new(scheme, cfg.x0.clone(), cfg.seed, cfg.stride);
    let track = cfg.track_stale_points;
    let mut rows: Vec<(StepEvent, Option<ParamVector>)> = Vec::new();
    for log in logs {
        iterates.extend(log.iterates);
        let mut res = log.resolved.into_iter();
        for e in log.events {
            rows.push((e, if track { res.next() } else { None }));
        }
    }
    rows.sort_by_key(|(e, _)| e.version_apply);
    iterates.sort_by_key(|(k, _)| *k);
    if track {
        rec.resolved = Some(Vec::with_capacity(rows.len()));
    }
    for (e, r) in rows {
        rec.events.push(e);
        if let (Some(all), Some(r)) = (rec.resolved.as_mut(), r) {
            all.push(r);
        }
    }
    rec.iterates = iterates.into_iter().map(|(_, x)| x).collect();
    rec
}
