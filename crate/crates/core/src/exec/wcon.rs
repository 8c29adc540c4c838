use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;

use super::store::SnapshotStore;
use super::{assemble, Clock, WorkerConfig, WorkerLog};
use crate::error::Result;
use crate::langevin::{noise_scale, NoiseParams, StepSchedule};
use crate::potentials::{ParamVector, Potential};
use crate::record::{RunRecord, Scheme, StepEvent};
use crate::rng;

/// Consistent reads, delayed gradients. Each update reads a whole-vector
/// snapshot, evaluates the stochastic gradient there and applies the step
/// to the current state under an exclusive lock; its staleness is the
/// number of updates applied in between.
///
/// With `tau_cap`, an update that would exceed the cap re-reads the state
/// while holding the lock and recomputes its gradient, so it is applied
/// with staleness 0.
pub fn run_wcon(
    p: &dyn Potential,
    s: &StepSchedule,
    noise: NoiseParams,
    cfg: &WorkerConfig,
    tau_cap: Option<u32>,
) -> Result<RunRecord> {
    let d = p.dim();
    cfg.validate(d)?;
    let noise = NoiseParams::new(noise.sigma)?;
    let clock = Clock::new(cfg);
    let store = SnapshotStore::new(&cfg.x0, cfg.snapshot);
    let claimed = AtomicU64::new(0);
    let stride = cfg.stride.max(1) as u64;
    // states after every stride-th update, written under the store lock
    let kept: Mutex<Vec<(u64, ParamVector)>> = Mutex::new(Vec::new());

    let logs: Vec<WorkerLog> = thread::scope(|sc| {
        let handles: Vec<_> = (0..cfg.workers)
            .map(|w| {
                let (store, claimed, kept) = (&store, &claimed, &kept);
                sc.spawn(move || {
                    let mut log = WorkerLog::default();
                    let mut noise_rng = rng::noise_stream(cfg.seed, w);
                    let mut batch_rng = rng::batch_stream(cfg.seed, w);
                    let mut xhat = vec![0.0; d];
                    let mut g = vec![0.0; d];
                    let mut z = vec![0.0; d];
                    let mut after = vec![0.0; d];
                    loop {
                        if claimed.fetch_add(1, Ordering::AcqRel) >= cfg.max_updates
                            || clock.expired()
                        {
                            break;
                        }
                        let mut v_read = store.snapshot(&mut xhat);
                        p.stoch_grad_into(&xhat, cfg.batch, &mut batch_rng, &mut g);
                        rng::fill_standard_normal(&mut noise_rng, &mut z);

                        let mut guard = store.lock();
                        let v = guard.version();
                        if tau_cap.is_some_and(|cap| v - v_read > cap as u64) {
                            guard.read(&mut xhat);
                            v_read = v;
                            p.stoch_grad_into(&xhat, cfg.batch, &mut batch_rng, &mut g);
                        }
                        let gamma = s.gamma_at(v + 1);
                        let applied = guard.apply(&g, gamma, noise_scale(gamma, noise.sigma), &z);
                        if applied % stride == 0 {
                            guard.read(&mut after);
                            kept.lock()
                                .unwrap_or_else(|e| e.into_inner())
                                .push((applied, after.clone()));
                        }
                        drop(guard);

                        let delay = (v - v_read) as u32;
                        log.events.push(StepEvent {
                            step: v,
                            delay,
                            delay_min: delay,
                            worker: w as u32,
                            version_read: v_read,
                            version_apply: v,
                            wall_ns: clock.ns(),
                        });
                        if cfg.track_stale_points {
                            log.resolved.push(xhat.clone());
                        }
                    }
                    log
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });

    let kept = kept.into_inner().unwrap_or_else(|e| e.into_inner());
    let mut rec = assemble(Scheme::WCon, cfg, logs, kept);
    rec.tau_max = tau_cap;
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{measure_staleness, SnapshotMode};
    use crate::potentials::{make_quadratic, QuadraticSpec};
    use crate::sim::{simulate, DelayModel, SimConfig};

    fn quad10() -> crate::potentials::QuadraticPotential {
        let diag: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        make_quadratic(QuadraticSpec::diagonal(&diag)).unwrap()
    }

    #[test]
    fn one_worker_is_sequential_sgld() {
        let q = quad10();
        let s = StepSchedule::constant(0.1);
        let cfg = WorkerConfig::new(1, vec![1.0; 10], 5, 400);
        let rec = run_wcon(&q, &s, NoiseParams { sigma: 0.3 }, &cfg, None).unwrap();
        let sim = simulate(
            &q,
            &s,
            NoiseParams { sigma: 0.3 },
            &DelayModel::none(),
            &SimConfig::new(400, vec![1.0; 10], 5),
        )
        .unwrap();
        assert_eq!(rec.iterates, sim.iterates);
        assert!(rec.events.iter().all(|e| e.delay == 0));
    }

    fn snapshots_are_historical(rec: &RunRecord) -> bool {
        let res = rec.resolved.as_ref().unwrap();
        rec.events
            .iter()
            .zip(res)
            .all(|(e, x)| rec.state_at(e.version_read) == Some(x.as_slice()))
    }

    #[test]
    fn many_workers_conserve_updates_and_read_real_states() {
        let q = quad10();
        let s = StepSchedule::constant(0.05);
        for mode in [SnapshotMode::Seqlock, SnapshotMode::Blocking] {
            let mut cfg = WorkerConfig::new(8, vec![1.0; 10], 17, 4000);
            cfg.track_stale_points = true;
            cfg.snapshot = mode;
            let rec = run_wcon(&q, &s, NoiseParams { sigma: 0.1 }, &cfg, None).unwrap();
            assert_eq!(rec.events.len(), 4000);
            assert_eq!(rec.iterates.len(), 4000);
            let versions: Vec<u64> = rec.events.iter().map(|e| e.version_apply).collect();
            assert_eq!(versions, (0..4000).collect::<Vec<_>>());
            assert!(snapshots_are_historical(&rec));
        }
    }

    #[test]
    fn cap_bounds_observed_staleness() {
        let q = quad10();
        let s = StepSchedule::constant(0.05);
        for cap in [0u32, 1, 3] {
            let mut cfg = WorkerConfig::new(4, vec![1.0; 10], 2, 3000);
            cfg.track_stale_points = true;
            let rec = run_wcon(&q, &s, NoiseParams { sigma: 0.1 }, &cfg, Some(cap)).unwrap();
            let st = measure_staleness(&rec).unwrap();
            assert!(st.max <= cap as usize);
            assert!(snapshots_are_historical(&rec));
        }
    }

    #[test]
    fn zero_workers_is_an_error() {
        let q = quad10();
        let cfg = WorkerConfig::new(0, vec![0.0; 10], 0, 10);
        assert!(run_wcon(&q, &StepSchedule::constant(0.1), NoiseParams { sigma: 1.0 }, &cfg, None).is_err());
    }
}
