//! Deterministic single-threaded simulation of delayed-gradient Langevin
//! dynamics.
//!
//! Step `k` (0-based) computes `x_{k+1} = x_k − γ_{k+1}∇U(x̂_k) + √(2σγ_{k+1}) z_k`
//! where `x̂_k` is resolved from a ring buffer of the last `τ + 1` iterates.
//! During warm-up a delay larger than `k` is clipped to `k`, so the stale
//! point is always a real past iterate.
//!
//! Noise, minibatch and delay draws come from separate streams of the master
//! seed; changing the delay model never changes the noise sequence.

use std::time::Instant;

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::langevin::{apply_step, noise_scale, validate_schedule, NoiseParams, StepSchedule};
use crate::potentials::{BatchSpec, ParamVector, Potential};
use crate::record::{RunRecord, Scheme, StepEvent};
use crate::rng::{self, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReadMode {
    /// The stale point is one whole past iterate.
    Consistent,
    /// Each coordinate comes from its own past iterate.
    Inconsistent,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DelayLaw {
    Fixed(u32),
    /// Uniform on `0..=tau_max`.
    Uniform,
    /// Replayed in order and cycled; inconsistent reads consume `d` entries
    /// per step.
    Recorded(Vec<u32>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DelayModel {
    pub mode: ReadMode,
    pub tau_max: u32,
    pub law: DelayLaw,
}

impl DelayModel {
    pub fn none() -> Self {
        Self::fixed(0)
    }

    pub fn fixed(tau: u32) -> Self {
        Self {
            mode: ReadMode::Consistent,
            tau_max: tau,
            law: DelayLaw::Fixed(tau),
        }
    }

    pub fn uniform(mode: ReadMode, tau_max: u32) -> Self {
        Self {
            mode,
            tau_max,
            law: DelayLaw::Uniform,
        }
    }

    pub fn recorded(mode: ReadMode, tau_max: u32, delays: Vec<u32>) -> Self {
        Self {
            mode,
            tau_max,
            law: DelayLaw::Recorded(delays),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.law {
            DelayLaw::Fixed(t) if *t > self.tau_max => Err(Error::invalid(format!(
                "fixed delay {t} exceeds tau_max {}",
                self.tau_max
            ))),
            DelayLaw::Recorded(v) if v.is_empty() => Err(Error::Empty("recorded delay sequence")),
            DelayLaw::Recorded(v) if v.iter().any(|&t| t > self.tau_max) => Err(Error::invalid(
                "recorded delay exceeds tau_max".to_string(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub n_iters: u64,
    pub x0: ParamVector,
    pub seed: u64,
    pub batch: BatchSpec,
    pub stride: usize,
    /// Keep the stale point of every step (needed by `check_delay_assumption`).
    pub track_stale_points: bool,
    /// Refuse schedules that violate the step-size hypotheses.
    pub theory_mode: bool,
    /// Stamp events with monotonic-clock times; off keeps records bit-identical.
    pub wall_clock: bool,
}

impl SimConfig {
    pub fn new(n_iters: u64, x0: ParamVector, seed: u64) -> Self {
        Self {
            n_iters,
            x0,
            seed,
            batch: BatchSpec::Full,
            stride: 1,
            track_stale_points: false,
            theory_mode: false,
            wall_clock: false,
        }
    }
}

/// Stepwise simulator; `simulate` drives it to completion.
pub struct Simulator<'a> {
    potential: &'a dyn Potential,
    schedule: StepSchedule,
    sigma: f64,
    model: DelayModel,
    batch: BatchSpec,
    ring: Vec<ParamVector>,
    k: u64,
    noise_rng: RngStream,
    batch_rng: RngStream,
    delay_rng: RngStream,
    recorded_pos: usize,
    stale: ParamVector,
    grad: ParamVector,
    z: ParamVector,
    offsets: Vec<u32>,
    record: RunRecord,
    start: Option<Instant>,
}

impl<'a> Simulator<'a> {
    pub fn new(
        potential: &'a dyn Potential,
        schedule: &StepSchedule,
        noise: NoiseParams,
        model: &DelayModel,
        cfg: &SimConfig,
    ) -> Result<Self> {
        let d = potential.dim();
        check_dim(d, cfg.x0.len())?;
        model.validate()?;
        let batch = cfg.batch.validate()?;
        NoiseParams::new(noise.sigma)?;
        if cfg.theory_mode {
            let c = potential.constants();
            if !validate_schedule(schedule, c.m, c.lipschitz, cfg.n_iters.clamp(1, 1_000_000)) {
                return Err(Error::invalid(
                    "step schedule violates the step-size hypotheses for this potential",
                ));
            }
        }
        let depth = model.tau_max as usize + 1;
        let mut record = RunRecord::new(Scheme::Sim, cfg.x0.clone(), cfg.seed, cfg.stride);
        record.tau_max = Some(model.tau_max);
        if cfg.track_stale_points {
            record.resolved = Some(Vec::new());
        }
        let mut ring = vec![vec![0.0; d]; depth];
        ring[0].copy_from_slice(&cfg.x0);
        Ok(Self {
            potential,
            schedule: schedule.clone(),
            sigma: noise.sigma,
            model: model.clone(),
            batch,
            ring,
            k: 0,
            noise_rng: rng::noise_stream(cfg.seed, 0),
            batch_rng: rng::batch_stream(cfg.seed, 0),
            delay_rng: rng::delay_stream(cfg.seed),
            recorded_pos: 0,
            stale: vec![0.0; d],
            grad: vec![0.0; d],
            z: vec![0.0; d],
            offsets: vec![0; d],
            record,
            start: cfg.wall_clock.then(Instant::now),
        })
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.k
    }

    pub fn current(&self) -> &[f64] {
        &self.ring[self.slot(self.k)]
    }

    pub fn record(&self) -> &RunRecord {
        &self.record
    }

    pub fn into_record(self) -> RunRecord {
        self.record
    }

    fn slot(&self, k: u64) -> usize {
        (k % self.ring.len() as u64) as usize
    }

    fn draw_delay(&mut self) -> u32 {
        match &self.model.law {
            DelayLaw::Fixed(t) => *t,
            DelayLaw::Uniform => self.delay_rng.random_range(0..=self.model.tau_max),
            DelayLaw::Recorded(seq) => {
                let t = seq[self.recorded_pos % seq.len()];
                self.recorded_pos += 1;
                t
            }
        }
    }

    pub fn step(&mut self) {
        let k = self.k;
        let d = self.stale.len();
        let clip = |t: u32| (t as u64).min(k) as u32;

        let (delay, delay_min) = match self.model.mode {
            ReadMode::Consistent => {
                let t = clip(self.draw_delay());
                let src = self.slot(k - t as u64);
                self.stale.copy_from_slice(&self.ring[src]);
                (t, t)
            }
            ReadMode::Inconsistent => {
                for i in 0..d {
                    self.offsets[i] = clip(self.draw_delay());
                }
                for i in 0..d {
                    let src = self.slot(k - self.offsets[i] as u64);
                    self.stale[i] = self.ring[src][i];
                }
                let hi = *self.offsets.iter().max().unwrap_or(&0);
                let lo = *self.offsets.iter().min().unwrap_or(&0);
                (hi, lo)
            }
        };

        self.potential
            .stoch_grad_into(&self.stale, self.batch, &mut self.batch_rng, &mut self.grad);
        rng::fill_standard_normal(&mut self.noise_rng, &mut self.z);
        let gamma = self.schedule.gamma_at(k + 1);
        let scale = noise_scale(gamma, self.sigma);

        let (cur, next) = (self.slot(k), self.slot(k + 1));
        if cur == next {
            apply_step(&mut self.ring[cur], &self.grad, gamma, scale, &self.z);
        } else {
            let src = self.ring[cur].clone();
            let dst = &mut self.ring[next];
            dst.copy_from_slice(&src);
            apply_step(dst, &self.grad, gamma, scale, &self.z);
        }
        self.k += 1;

        let wall_ns = self.start.map_or(0, |s| s.elapsed().as_nanos() as u64);
        self.record.events.push(StepEvent {
            step: k,
            delay,
            delay_min,
            worker: 0,
            version_read: k - delay as u64,
            version_apply: k,
            wall_ns,
        });
        if let Some(res) = self.record.resolved.as_mut() {
            res.push(self.stale.clone());
        }
        let next = self.slot(self.k);
        let x = std::mem::take(&mut self.ring[next]);
        self.record.push_iterate_if_due(self.k, &x);
        self.ring[next] = x;
    }

    /// Runs until `k` updates have been applied in total.
    pub fn run_until(&mut self, k: u64) {
        while self.k < k {
            self.step();
        }
    }
}

pub fn simulate(
    p: &dyn Potential,
    schedule: &StepSchedule,
    noise: NoiseParams,
    model: &DelayModel,
    cfg: &SimConfig,
) -> Result<RunRecord> {
    if cfg.n_iters == 0 {
        return Err(Error::invalid("n_iters must be at least 1"));
    }
    let mut sim = Simulator::new(p, schedule, noise, model, cfg)?;
    sim.run_until(cfg.n_iters);
    Ok(sim.into_record())
}

/// Counts of observed delays; `counts[t]` is the number of steps with delay `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DelayHistogram {
    pub counts: Vec<u64>,
    pub total: u64,
}

impl DelayHistogram {
    pub fn frequency(&self, t: usize) -> f64 {
        self.counts.get(t).copied().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn max_delay(&self) -> usize {
        self.counts.iter().rposition(|&c| c > 0).unwrap_or(0)
    }
}

pub fn delay_histogram(r: &RunRecord) -> Result<DelayHistogram> {
    delay_histogram_after(r, 0)
}

/// Histogram over the events after the first `skip` (e.g. the warm-up).
pub fn delay_histogram_after(r: &RunRecord, skip: usize) -> Result<DelayHistogram> {
    let events = r.events.get(skip..).unwrap_or(&[]);
    if events.is_empty() {
        return Err(Error::Empty("run record has no events"));
    }
    let hi = events.iter().map(|e| e.delay).max().unwrap_or(0) as usize;
    let mut counts = vec![0u64; hi + 1];
    for e in events {
        counts[e.delay as usize] += 1;
    }
    Ok(DelayHistogram {
        counts,
        total: events.len() as u64,
    })
}

/// Replays a record against the read discipline of `model`: every stale
/// point must be one stored past iterate within the delay window
/// (consistent reads), or be assembled coordinate-wise from stored past
/// iterates within the window (inconsistent reads).
pub fn check_delay_assumption(r: &RunRecord, model: &DelayModel) -> bool {
    let Some(resolved) = &r.resolved else {
        return false;
    };
    if r.stride != 1 || resolved.len() != r.events.len() || r.iterates.len() != r.events.len() {
        return false;
    }
    let tau = model.tau_max as u64;
    let state = |j: u64| -> &[f64] {
        if j == 0 {
            &r.x0
        } else {
            &r.iterates[j as usize - 1]
        }
    };
    for (k, (e, xhat)) in r.events.iter().zip(resolved).enumerate() {
        let k = k as u64;
        if e.delay as u64 > tau || e.delay as u64 > k {
            return false;
        }
        let window = k.saturating_sub(tau)..=k;
        let ok = match model.mode {
            ReadMode::Consistent => state(k - e.delay as u64) == xhat.as_slice(),
            ReadMode::Inconsistent => xhat
                .iter()
                .enumerate()
                .all(|(i, v)| window.clone().any(|j| state(j)[i] == *v)),
        };
        if !ok {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::langevin::em_step;
    use crate::potentials::{dist, eval_grad, make_quadratic, QuadraticSpec};

    fn quad(diag: &[f64]) -> crate::potentials::QuadraticPotential {
        make_quadratic(QuadraticSpec::diagonal(diag)).unwrap()
    }

    #[test]
    fn zero_delay_matches_sequential_em_steps() {
        let q = quad(&[1.0, 3.0]);
        let s = StepSchedule::constant(0.05);
        let noise = NoiseParams { sigma: 0.7 };
        let cfg = SimConfig::new(200, vec![1.0, -2.0], 9);
        let rec = simulate(&q, &s, noise, &DelayModel::none(), &cfg).unwrap();

        let mut z_rng = rng::noise_stream(9, 0);
        let mut x = vec![1.0, -2.0];
        for k in 0..200 {
            let g = eval_grad(&q, &x).unwrap();
            let z = rng::standard_normal_vec(&mut z_rng, 2);
            x = em_step(&x, &g, 0.05, 0.7, &z).unwrap();
            assert_eq!(rec.iterates[k], x);
        }
    }

    #[test]
    fn fixed_delay_recursion_unrolled_by_hand() {
        let q = quad(&[1.0, 1.0]);
        let s = StepSchedule::constant(0.1);
        let cfg = SimConfig::new(4, vec![1.0, 0.0], 0);
        let rec = simulate(&q, &s, NoiseParams { sigma: 0.0 }, &DelayModel::fixed(2), &cfg).unwrap();
        let x = |j: usize| if j == 0 { rec.x0[0] } else { rec.iterates[j - 1][0] };
        // warm-up: both of the first two steps read the starting point
        assert_eq!(x(1), 1.0 - 0.1 * 1.0);
        assert_eq!(x(2), x(1) - 0.1 * x(0));
        assert_eq!(x(3), x(2) - 0.1 * x(1 - 1));
        assert_eq!(x(4), x(3) - 0.1 * x(2 - 1));
        assert!((x(3) - 0.7).abs() < 1e-15);
        assert!((x(4) - 0.61).abs() < 1e-15);
        let delays: Vec<u32> = rec.events.iter().map(|e| e.delay).collect();
        assert_eq!(delays, vec![0, 1, 2, 2]);
    }

    #[test]
    fn replays_are_bit_identical() {
        let q = quad(&[1.0, 2.0, 0.5]);
        let dm = DelayModel::recorded(ReadMode::Consistent, 3, vec![0, 3, 1, 2, 2]);
        let s = StepSchedule::constant(0.02);
        let mut cfg = SimConfig::new(500, vec![0.5; 3], 77);
        cfg.track_stale_points = true;
        let a = simulate(&q, &s, NoiseParams { sigma: 1.0 }, &dm, &cfg).unwrap();
        let b = simulate(&q, &s, NoiseParams { sigma: 1.0 }, &dm, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_sequence_is_independent_of_delay_model() {
        // with a zero gradient the trajectory is the pure noise path
        let q = quad(&[1e-300, 1e-300]);
        let s = StepSchedule::constant(0.01);
        let cfg = SimConfig::new(50, vec![0.0; 2], 5);
        let a = simulate(&q, &s, NoiseParams { sigma: 1.0 }, &DelayModel::none(), &cfg).unwrap();
        let b = simulate(
            &q,
            &s,
            NoiseParams { sigma: 1.0 },
            &DelayModel::uniform(ReadMode::Inconsistent, 6),
            &cfg,
        )
        .unwrap();
        assert_eq!(a.iterates, b.iterates);
    }

    #[test]
    fn histogram_of_fixed_delay_after_warmup() {
        let q = quad(&[1.0]);
        let cfg = SimConfig::new(103, vec![1.0], 1);
        let rec = simulate(
            &q,
            &StepSchedule::constant(0.01),
            NoiseParams { sigma: 0.1 },
            &DelayModel::fixed(3),
            &cfg,
        )
        .unwrap();
        let h = delay_histogram_after(&rec, 3).unwrap();
        assert_eq!(h.total, 100);
        assert_eq!(h.counts, vec![0, 0, 0, 100]);
        let all = delay_histogram(&rec).unwrap();
        assert_eq!(all.counts, vec![1, 1, 1, 100]);
    }

    #[test]
    fn uniform_histogram_is_multinomial() {
        let q = quad(&[1.0]);
        let n = 100_000u64;
        let cfg = SimConfig::new(n + 4, vec![0.0], 21);
        let rec = simulate(
            &q,
            &StepSchedule::constant(0.01),
            NoiseParams { sigma: 0.1 },
            &DelayModel::uniform(ReadMode::Consistent, 4),
            &cfg,
        )
        .unwrap();
        let h = delay_histogram_after(&rec, 4).unwrap();
        assert_eq!(h.total, n);
        let sd = (0.2 * 0.8 / n as f64).sqrt();
        for t in 0..5 {
            assert!((h.frequency(t) - 0.2).abs() <= 3.0 * sd, "bin {t}: {}", h.frequency(t));
        }
    }

    #[test]
    fn empty_record_has_no_histogram() {
        let r = RunRecord::new(Scheme::Sim, vec![0.0], 0, 1);
        assert!(delay_histogram(&r).is_err());
    }

    fn tracked(dm: &DelayModel, n: u64) -> RunRecord {
        let q = quad(&[1.0, 2.0, 3.0, 0.5]);
        let mut cfg = SimConfig::new(n, vec![1.0, -1.0, 0.5, 2.0], 3);
        cfg.track_stale_points = true;
        simulate(&q, &StepSchedule::constant(0.05), NoiseParams { sigma: 0.5 }, dm, &cfg).unwrap()
    }

    #[test]
    fn simulated_runs_satisfy_their_delay_model() {
        let con = DelayModel::uniform(ReadMode::Consistent, 5);
        assert!(check_delay_assumption(&tracked(&con, 300), &con));
        let inc = DelayModel::uniform(ReadMode::Inconsistent, 5);
        assert!(check_delay_assumption(&tracked(&inc, 300), &inc));
    }

    #[test]
    fn tampered_delay_is_detected() {
        let dm = DelayModel::fixed(3);
        let mut rec = tracked(&dm, 50);
        rec.events[20].delay = 4;
        assert!(!check_delay_assumption(&rec, &dm));
    }

    #[test]
    fn inconsistent_reads_fail_the_consistent_rule() {
        let inc = DelayModel::uniform(ReadMode::Inconsistent, 5);
        let rec = tracked(&inc, 300);
        assert!(rec.events.iter().any(|e| e.delay != e.delay_min));
        let as_consistent = DelayModel::uniform(ReadMode::Consistent, 5);
        assert!(!check_delay_assumption(&rec, &as_consistent));
    }

    #[test]
    fn untracked_record_fails_check() {
        let q = quad(&[1.0]);
        let rec = simulate(
            &q,
            &StepSchedule::constant(0.1),
            NoiseParams { sigma: 0.0 },
            &DelayModel::none(),
            &SimConfig::new(5, vec![1.0], 0),
        )
        .unwrap();
        assert!(!check_delay_assumption(&rec, &DelayModel::none()));
    }

    #[test]
    fn geometric_convergence_without_noise_or_delay() {
        let q = make_quadratic(QuadraticSpec::diagonal(&[0.5, 2.0]).with_b(&[1.0, 1.0])).unwrap();
        let gamma = 0.2;
        let x0 = vec![4.0, -4.0];
        let rec = simulate(
            &q,
            &StepSchedule::constant(gamma),
            NoiseParams { sigma: 0.0 },
            &DelayModel::none(),
            &SimConfig::new(100, x0.clone(), 0),
        )
        .unwrap();
        let d0 = dist(&x0, q.minimizer());
        for (k, x) in rec.iterates.iter().enumerate() {
            let bound = (1.0 - gamma * 0.5f64).powi(k as i32 + 1) * d0;
            assert!(dist(x, q.minimizer()) <= bound + 1e-12);
        }
    }

    #[test]
    fn bounded_delays_stay_stable() {
        let q = make_quadratic(QuadraticSpec::diagonal(&[1.0, 2.0]).with_b(&[0.5, -0.5])).unwrap();
        let gamma: f64 = 0.02;
        let tau = (1.0 / (4.0 * gamma * 2.0)).floor() as u32;
        let rec = simulate(
            &q,
            &StepSchedule::constant(gamma),
            NoiseParams { sigma: 0.0 },
            &DelayModel::fixed(tau),
            &SimConfig::new(5000, vec![3.0, 3.0], 0),
        )
        .unwrap();
        let start = dist(&rec.x0, q.minimizer());
        assert!(rec.iterates.iter().all(|x| dist(x, q.minimizer()) <= 2.0 * start));
        assert!(dist(rec.final_iterate(), q.minimizer()) < 1e-8);
    }

    #[test]
    fn rejects_bad_inputs() {
        let q = quad(&[1.0, 1.0]);
        let s = StepSchedule::constant(0.1);
        let n = NoiseParams { sigma: 1.0 };
        assert!(simulate(&q, &s, n, &DelayModel::none(), &SimConfig::new(5, vec![0.0], 0)).is_err());
        assert!(simulate(&q, &s, n, &DelayModel::none(), &SimConfig::new(0, vec![0.0; 2], 0)).is_err());
        let bad = DelayModel {
            mode: ReadMode::Consistent,
            tau_max: 1,
            law: DelayLaw::Fixed(2),
        };
        assert!(simulate(&q, &s, n, &bad, &SimConfig::new(5, vec![0.0; 2], 0)).is_err());
        let mut cfg = SimConfig::new(5, vec![0.0; 2], 0);
        cfg.theory_mode = true;
        assert!(simulate(&q, &StepSchedule::constant(0.3), n, &DelayModel::none(), &cfg).is_err());
    }
}
