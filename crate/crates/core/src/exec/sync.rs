use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Barrier, Mutex, RwLock};
use std::thread;

use super::{Clock, NoiseAggregation, WorkerConfig};
use crate::error::Result;
use crate::langevin::{apply_step, noise_scale, NoiseParams, StepSchedule};
use crate::potentials::Potential;
use crate::record::{RunRecord, Scheme, StepEvent};
use crate::rng;

struct Slot {
    g: Vec<f64>,
    z: Vec<f64>,
}

/// Barrier-synchronised rounds. Each round every worker evaluates a
/// stochastic gradient at the same iterate and draws its noise; the updater
/// then applies `x ← x − Σ_p (γ g_p − √(2σγ) z_p)`, adding contributions in
/// worker order. The result does not depend on thread scheduling.
pub fn run_sync(
    p: &dyn Potential,
    s: &StepSchedule,
    noise: NoiseParams,
    cfg: &WorkerConfig,
) -> Result<RunRecord> {
    let d = p.dim();
    cfg.validate(d)?;
    let noise = NoiseParams::new(noise.sigma)?;
    let workers = cfg.workers;
    let clock = Clock::new(cfg);

    let x = RwLock::new(cfg.x0.clone());
    let slots: Vec<Mutex<Slot>> = (0..workers)
        .map(|_| {
            Mutex::new(Slot {
                g: vec![0.0; d],
                z: vec![0.0; d],
            })
        })
        .collect();
    let barrier = Barrier::new(workers + 1);
    let stop = AtomicBool::new(false);

    let mut rec = RunRecord::new(Scheme::Sync, cfg.x0.clone(), cfg.seed, cfg.stride);
    rec.tau_max = Some(0);
    if cfg.track_stale_points {
        rec.resolved = Some(Vec::new());
    }

    thread::scope(|sc| {
        for w in 0..workers {
            let (x, slots, barrier, stop) = (&x, &slots, &barrier, &stop);
            sc.spawn(move || {
                let mut noise_rng = rng::noise_stream(cfg.seed, w);
                let mut batch_rng = rng::batch_stream(cfg.seed, w);
                let draws_noise = w == 0 || cfg.noise == NoiseAggregation::PerWorker;
                loop {
                    barrier.wait();
                    if stop.load(Ordering::Acquire) {
                        break;
                    }
                    {
                        let mut slot = slots[w].lock().unwrap_or_else(|e| e.into_inner());
                        let Slot { g, z } = &mut *slot;
                        let cur = x.read().unwrap_or_else(|e| e.into_inner());
                        p.stoch_grad_into(&cur, cfg.batch, &mut batch_rng, g);
                        if draws_noise {
                            rng::fill_standard_normal(&mut noise_rng, z);
                        }
                    }
                    barrier.wait();
                }
            });
        }

        for k in 0..cfg.max_updates {
            if clock.expired() {
                break;
            }
            barrier.wait();
            barrier.wait();
            let mut cur = x.write().unwrap_or_else(|e| e.into_inner());
            if let Some(res) = rec.resolved.as_mut() {
                res.push(cur.clone());
            }
            let gamma = s.gamma_at(k + 1);
            let scale = noise_scale(gamma, noise.sigma);
            for (w, slot) in slots.iter().enumerate() {
                let slot = slot.lock().unwrap_or_else(|e| e.into_inner());
                let sw = if w == 0 || cfg.noise == NoiseAggregation::PerWorker {
                    scale
                } else {
                    0.0
                };
                apply_step(&mut cur, &slot.g, gamma, sw, &slot.z);
            }
            rec.events.push(StepEvent {
                step: k,
                delay: 0,
                delay_min: 0,
                worker: 0,
                version_read: k,
                version_apply: k,
                wall_ns: clock.ns(),
            });
            rec.push_iterate_if_due(k + 1, &cur);
        }
        stop.store(true, Ordering::Release);
        barrier.wait();
    });
    Ok(rec)
}
