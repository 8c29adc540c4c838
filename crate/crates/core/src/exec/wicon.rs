use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;

use super::store::CoordinateStore;
use super::{assemble, Clock, WorkerConfig, WorkerLog};
use crate::error::Result;
use crate::langevin::{noise_scale, NoiseParams, StepSchedule};
use crate::potentials::Potential;
use crate::record::{RunRecord, Scheme, StepEvent};
use crate::rng;

/// Every value ever held by each coordinate, starting with `x0[i]`.
/// Only filled when stale points are tracked.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoordinateHistory {
    pub values: Vec<Vec<f64>>,
}

impl CoordinateHistory {
    /// Whether every coordinate of `x` is a value that coordinate once held.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.values)
            .all(|(v, hist)| hist.iter().any(|h| h.to_bits() == v.to_bits()))
    }
}

/// Lock-free updates with per-coordinate atomics and no cross-coordinate
/// consistency.
pub fn run_wicon(
    p: &dyn Potential,
    s: &StepSchedule,
    noise: NoiseParams,
    cfg: &WorkerConfig,
) -> Result<RunRecord> {
    run_wicon_traced(p, s, noise, cfg).map(|(r, _)| r)
}

/// As [`run_wicon`], also returning the per-coordinate write history.
///
/// Update `t` (its ticket) reads coordinate `i` after `c_i` completed writes
/// to it, so its staleness lies between `t − max c_i` and `t − min c_i`.
/// Kept iterates are read by the worker right after its own write and need
/// not be states the store ever held at one instant; the final iterate is
/// exact.
pub fn run_wicon_traced(
    p: &dyn Potential,
    s: &StepSchedule,
    noise: NoiseParams,
    cfg: &WorkerConfig,
) -> Result<(RunRecord, CoordinateHistory)> {
    let d = p.dim();
    cfg.validate(d)?;
    let noise = NoiseParams::new(noise.sigma)?;
    let clock = Clock::new(cfg);
    let store = CoordinateStore::new(&cfg.x0);
    let claimed = AtomicU64::new(0);
    let stride = cfg.stride.max(1) as u64;
    let trace = cfg.track_stale_points;

    let results: Vec<(WorkerLog, Vec<Vec<f64>>)> = thread::scope(|sc| {
        let handles: Vec<_> = (0..cfg.workers)
            .map(|w| {
                let (store, claimed) = (&store, &claimed);
                sc.spawn(move || {
                    let mut log = WorkerLog::default();
                    let mut written = vec![Vec::new(); if trace { d } else { 0 }];
                    let mut noise_rng = rng::noise_stream(cfg.seed, w);
                    let mut batch_rng = rng::batch_stream(cfg.seed, w);
                    let mut xhat = vec![0.0; d];
                    let mut counts = vec![0u64; d];
                    let mut g = vec![0.0; d];
                    let mut z = vec![0.0; d];
                    loop {
                        if claimed.fetch_add(1, Ordering::AcqRel) >= cfg.max_updates
                            || clock.expired()
                        {
                            break;
                        }
                        store.read(&mut xhat, &mut counts);
                        p.stoch_grad_into(&xhat, cfg.batch, &mut batch_rng, &mut g);
                        rng::fill_standard_normal(&mut noise_rng, &mut z);

                        let t = store.ticket();
                        let gamma = s.gamma_at(t + 1);
                        let scale = noise_scale(gamma, noise.sigma);
                        for i in 0..d {
                            let v = store.update(i, g[i], gamma, scale, z[i]);
                            if trace {
                                written[i].push(v);
                            }
                        }

                        let hi = counts.iter().copied().max().unwrap_or(0);
                        let lo = counts.iter().copied().min().unwrap_or(0);
                        log.events.push(StepEvent {
                            step: t,
                            delay: (t - lo) as u32,
                            delay_min: (t - hi) as u32,
                            worker: w as u32,
                            version_read: lo,
                            version_apply: t,
                            wall_ns: clock.ns(),
                        });
                        if trace {
                            log.resolved.push(xhat.clone());
                        }
                        if (t + 1) % stride == 0 {
                            let mut now = vec![0.0; d];
                            store.read(&mut now, &mut counts);
                            log.iterates.push((t + 1, now));
                        }
                    }
                    (log, written)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });

    let mut history = CoordinateHistory {
        values: cfg.x0.iter().map(|v| vec![*v]).collect(),
    };
    let mut logs = Vec::with_capacity(results.len());
    for (log, written) in results {
        for (i, vals) in written.into_iter().enumerate() {
            history.values[i].extend(vals);
        }
        logs.push(log);
    }
    if !trace {
        history.values.clear();
    }
    let mut rec = assemble(Scheme::WIcon, cfg, logs, Vec::new());
    let applied = rec.events.len() as u64;
    let final_state = store.into_vec();
    if applied > 0 && applied % stride == 0 {
        if let Some(last) = rec.iterates.last_mut() {
            *last = final_state;
        }
    }
    Ok((rec, history))
}
