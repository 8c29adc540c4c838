//! Acceptance checks. Runs as a plain binary (no libtest harness) and prints
//! one PASS/FAIL line per criterion; exits non-zero if any criterion fails.

use std::time::Instant;

use async_sgld::exec::{measure_staleness, run_sync, run_wcon, WorkerConfig};
use async_sgld::harness::{execute, ExperimentConfig, MetricsRow};
use async_sgld::langevin::{NoiseParams, StepSchedule};
use async_sgld::metrics::{
    kl_histogram, laplace_reference, moments, trailing_cloud, w2_assignment, w2_empirical, w2_gaussian,
    GaussianMeasure, GridSpec, SampleCloud,
};
use async_sgld::potentials::{
    eval_stoch_grad, make_quadratic, make_regression, BatchSpec, Potential, QuadraticSpec, RegressionSpec,
};
use async_sgld::record::RunRecord;
use async_sgld::rng::{self, RngStream};
use async_sgld::sim::{simulate, DelayModel, SimConfig};
use async_sgld::theory::{bias_bound, gamma_eps_kl, n_eps_kl, theorem_bound_rhs, TheoryParams};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn normal_cloud(rng: &mut RngStream, n: usize, mean: &[f64]) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            rng::standard_normal_vec(rng, mean.len())
                .iter()
                .zip(mean)
                .map(|(z, m)| z + m)
                .collect()
        })
        .collect()
}

fn gaussian_stationarity() -> Outcome {
    let t = Instant::now();
    let q = make_quadratic(QuadraticSpec::diagonal(&[1.0, 4.0]).with_b(&[1.0, -2.0])).unwrap();
    let cfg = SimConfig::new(200_000, vec![0.0, 0.0], 1);
    let r = simulate(
        &q,
        &StepSchedule::constant(0.005),
        NoiseParams { sigma: 1.0 },
        &DelayModel::none(),
        &cfg,
    )
    .unwrap();
    let (mean, cov) = moments(&trailing_cloud(&r, 100_000).unwrap());
    let (tmean, tcov) = q.stationary_gaussian(1.0);
    let cov_err = (&cov - &tcov).norm() / tcov.norm();
    let mean_err = (&mean - &tmean).norm();
    let secs = t.elapsed().as_secs_f64();
    outcome(
        cov_err <= 0.10 && mean_err <= 0.05 && secs < 10.0,
        // Autocorrelation along the slow axis (ρ = 1 − γ) leaves the
        // 1e5-sample mean with a sampling sd near 0.063, so the 0.05 mean
        // bound holds for only about half of all seeds.
        format!(
            "cov rel err {cov_err:.4} (≤ 0.10), mean err {mean_err:.4} (≤ 0.05; estimator sd ≈ 0.063), {secs:.2}s (< 10s)"
        ),
    )
}

fn w2_oracle() -> Outcome {
    let t = Instant::now();
    let mut r = rng::stream(2, 0);
    let a = SampleCloud::uniform(normal_cloud(&mut r, 2000, &[0.0; 3])).unwrap();
    let b = SampleCloud::uniform(normal_cloud(&mut r, 2000, &[1.0, 0.0, 0.0])).unwrap();
    let w = w2_empirical(&a, &b).unwrap();
    let exact = w2_gaussian(
        &GaussianMeasure::isotropic(&[0.0; 3], 1.0).unwrap(),
        &GaussianMeasure::isotropic(&[1.0, 0.0, 0.0], 1.0).unwrap(),
    )
    .unwrap();
    let rel = (w - exact).abs() / exact;
    let secs = t.elapsed().as_secs_f64();
    outcome(
        rel <= 0.15 && secs < 30.0,
        format!("W2 {w:.4} vs {exact} (rel err {rel:.4} ≤ 0.15), {secs:.2}s (< 30s)"),
    )
}

fn kl_oracle() -> Outcome {
    let mut r = rng::stream(3, 0);
    let s = SampleCloud::uniform(normal_cloud(&mut r, 100_000, &[0.0])).unwrap();
    let g = GridSpec::cube(1, -6.0, 6.0, 64).unwrap();
    let kl = kl_histogram(&s, |x| -x[0] * x[0] / 2.0, &g).unwrap();
    outcome(kl <= 0.01, format!("KL {kl:.5} (≤ 0.01)"))
}

fn delay_robustness() -> Outcome {
    // A = cI, b = 0; chains start at the mode, so W2(δ_x0, π)² = σd/c.
    let (c, d, sigma, eps) = (0.2, 4usize, 0.5, 0.05);
    let q = make_quadratic(QuadraticSpec::diagonal(&[c; 4])).unwrap();
    let tp = TheoryParams {
        m: c,
        l: c,
        d: d as f64,
        sigma,
        // three times the stationary RMS gradient norm
        g: 3.0 * (c * sigma * d as f64).sqrt(),
        tau: 16,
        eps,
        w2_0: (sigma * d as f64 / c).sqrt(),
    };
    let gamma = gamma_eps_kl(&tp).unwrap().gamma;
    let n = n_eps_kl(&tp, gamma).unwrap();
    let chains = 600;
    let stride = 100;
    let sd = (sigma / c).sqrt();
    let grid = GridSpec::cube(d, -3.3 * sd, 3.3 * sd, 5).unwrap();
    let mut reference_rng = rng::aux_stream(4);
    let reference = laplace_reference(&q, &[0.0; 4], sigma, chains, &mut reference_rng).unwrap();

    let mut kls = Vec::new();
    let mut w2s = Vec::new();
    for tau in [0u32, 4, 16] {
        let mut trailing = Vec::new();
        let mut finals = Vec::new();
        for chain in 0..chains {
            let mut cfg = SimConfig::new(n, vec![0.0; d], 1000 * tau as u64 + chain as u64);
            cfg.stride = stride;
            let r = simulate(
                &q,
                &StepSchedule::constant(gamma),
                NoiseParams { sigma },
                &DelayModel::fixed(tau),
                &cfg,
            )
            .unwrap();
            let half = r.iterates.len() / 2;
            trailing.extend_from_slice(&r.iterates[half..]);
            finals.push(r.final_iterate().to_vec());
        }
        let cloud = SampleCloud::uniform(trailing).unwrap();
        kls.push(kl_histogram(&cloud, |x| -q.value(x) / sigma, &grid).unwrap());
        w2s.push(w2_assignment(&finals, reference.points()).unwrap());
    }
    let ratio = w2s.iter().cloned().fold(0.0, f64::max) / w2s.iter().cloned().fold(f64::INFINITY, f64::min);
    outcome(
        kls.iter().all(|&k| k <= eps) && ratio <= 2.0,
        format!(
            "gamma {gamma:.3e}, n {n}; KL at tau 0/4/16 = {:.4}/{:.4}/{:.4} (≤ {eps}); final W2 {:.3}/{:.3}/{:.3}, max/min {ratio:.3} (≤ 2)",
            kls[0], kls[1], kls[2], w2s[0], w2s[1], w2s[2]
        ),
    )
}

/// Single-threaded replay of a Sync run from the per-worker streams.
fn sync_oracle(p: &dyn Potential, gamma: f64, sigma: f64, cfg: &WorkerConfig) -> Vec<Vec<f64>> {
    let mut noise: Vec<_> = (0..cfg.workers).map(|w| rng::noise_stream(cfg.seed, w)).collect();
    let mut batch: Vec<_> = (0..cfg.workers).map(|w| rng::batch_stream(cfg.seed, w)).collect();
    let scale = (2.0 * sigma * gamma).sqrt();
    let mut x = cfg.x0.clone();
    let mut out = Vec::new();
    for _ in 0..cfg.max_updates {
        let draws: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.workers)
            .map(|w| {
                let g = eval_stoch_grad(p, &x, cfg.batch, &mut batch[w]).unwrap();
                (g, rng::standard_normal_vec(&mut noise[w], x.len()))
            })
            .collect();
        for (g, z) in &draws {
            for i in 0..x.len() {
                x[i] = x[i] - gamma * g[i] + scale * z[i];
            }
        }
        out.push(x.clone());
    }
    out
}

fn sync_determinism() -> Outcome {
    let spec = RegressionSpec::new(vec![1.0, -0.5, 0.3, 0.2, 0.1], 1000, 0.1);
    let p = make_regression(&spec, &mut rng::stream(5, 0)).unwrap();
    let (gamma, sigma) = (0.02, 0.01);
    let mut notes = Vec::new();
    let mut ok = true;
    for workers in [2, 4] {
        let mut cfg = WorkerConfig::new(workers, vec![0.0; 5], 17, 2000);
        cfg.batch = BatchSpec::Minibatch(32);
        cfg.wall_clock = false;
        let s = StepSchedule::constant(gamma);
        let a = run_sync(&p, &s, NoiseParams { sigma }, &cfg).unwrap();
        let b = run_sync(&p, &s, NoiseParams { sigma }, &cfg).unwrap();
        let oracle_match = a.iterates == sync_oracle(&p, gamma, sigma, &cfg);
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.write_binary(&mut ba).unwrap();
        b.write_binary(&mut bb).unwrap();
        let identical = ba == bb;
        ok &= oracle_match && identical;
        notes.push(format!("P={workers}: oracle {oracle_match}, byte-identical repeat {identical}"));
    }
    outcome(ok, notes.join("; "))
}

fn staleness_soundness() -> Outcome {
    let q = make_quadratic(QuadraticSpec::diagonal(&[1.0, 2.0, 3.0, 4.0])).unwrap();
    let mut cfg = WorkerConfig::new(8, vec![1.0; 4], 6, 100_000);
    cfg.track_stale_points = true;
    let r = run_wcon(&q, &StepSchedule::constant(0.01), NoiseParams { sigma: 0.5 }, &cfg, Some(8)).unwrap();
    let st = measure_staleness(&r).unwrap();
    let matched = snapshots_match_history(&r);
    outcome(
        st.max <= 8 && matched && r.events.len() == 100_000,
        format!(
            "{} updates, max staleness {} (≤ 8), mean {:.3}; snapshots match shadow history: {matched}",
            r.events.len(),
            st.max,
            st.mean
        ),
    )
}

fn snapshots_match_history(r: &RunRecord) -> bool {
    let Some(res) = &r.resolved else {
        return false;
    };
    res.len() == r.events.len()
        && r.events
            .iter()
            .zip(res)
            .all(|(e, x)| r.state_at(e.version_read) == Some(x.as_slice()))
}

fn theory_formulas() -> Outcome {
    let mut r = rng::stream(7, 0);
    let mut notes = Vec::new();
    let mut ok = true;

    let tp = TheoryParams {
        m: 0.5,
        l: 1.0,
        d: 2.0,
        sigma: 1.0,
        g: 2.0,
        tau: 3,
        eps: 0.1,
        w2_0: 1.0,
    };
    let g6 = gamma_eps_kl(&tp).unwrap().components[5];
    ok &= g6 == 1.0 / 12.0;
    notes.push(format!("gamma6 = {g6}"));

    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let m = r.random_range(0.01..2.0);
        let tp = TheoryParams {
            m,
            l: m + r.random_range(0.0..5.0),
            d: r.random_range(1..100) as f64,
            sigma: r.random_range(0.01..10.0),
            g: r.random_range(0.1..10.0),
            tau: r.random_range(0..64),
            eps: r.random_range(0.001..1.0),
            w2_0: 1.0,
        };
        let tau = tp.tau as f64;
        let expect = tp.eps / (tp.l * tp.d + tp.l * tp.l * tau * tau * tp.sigma);
        let got = gamma_eps_kl(&tp).unwrap().components[0];
        worst = worst.max(((got - expect) / expect).abs());
    }
    ok &= worst <= 1e-12;
    notes.push(format!("gamma1 worst rel err {worst:.1e} over 20 tuples"));

    let s = StepSchedule::constant(0.01);
    let n = 50u64;
    let delay_at = |tau: u32| {
        let tp = TheoryParams { tau, ..tp };
        let len = (n + tau as u64) as usize;
        theorem_bound_rhs(&s, &tp, 0, n, 1.0, &vec![1.0; len], &vec![0.0; len]).unwrap().delay
    };
    let (d0, d2, d4) = (delay_at(0), delay_at(2), delay_at(4));
    let scale = d4 / d2;
    ok &= d0 == 0.0 && (scale - 4.0).abs() <= 1e-12;
    notes.push(format!("delay term at tau 0 = {d0}, tau 2→4 scale {scale}"));

    let b = bias_bound(1.0, 2, 0.01, 10.0, 1.0);
    ok &= (b - 0.4).abs() <= 1e-12;
    notes.push(format!("bias_bound = {b}"));
    outcome(ok, notes.join("; "))
}

/// Trailing mean over the evaluations within the last `window` iterations.
fn smoothed(rows: &[MetricsRow], window: u64) -> Vec<f64> {
    rows.iter()
        .filter(|r| r.iter >= window)
        .map(|last| {
            let inside: Vec<f64> = rows
                .iter()
                .filter(|r| r.iter > last.iter - window && r.iter <= last.iter)
                .map(|r| r.w2)
                .collect();
            inside.iter().sum::<f64>() / inside.len() as f64
        })
        .collect()
}

fn regression_shape() -> Outcome {
    let t = Instant::now();
    let plain = execute(&ExperimentConfig::parse("scheme = sim\nseed = 3").unwrap()).unwrap();
    let delayed = execute(&ExperimentConfig::parse("scheme = sim\nseed = 3\ndelay = uniform:8").unwrap()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let monotone = |rows: &[MetricsRow]| {
        let s = smoothed(rows, 1000);
        s.len() >= 2 && s.windows(2).all(|w| w[1] <= w[0])
    };
    let (fp, fd) = (plain.metrics.last().unwrap().w2, delayed.metrics.last().unwrap().w2);
    let finite = plain.metrics.iter().chain(&delayed.metrics).all(|r| r.w2.is_finite());
    let (mp, md) = (monotone(&plain.metrics), monotone(&delayed.metrics));
    outcome(
        finite && mp && md && fd <= 2.0 * fp && secs < 120.0,
        format!(
            "smoothed decay tau=0 {mp}, tau≤8 {md}; final W2 {fp:.4} vs delayed {fd:.4} (≤ 2x); {} and {} iterations; {secs:.1}s (< 120s)",
            plain.record.events.len(),
            delayed.record.events.len()
        ),
    )
}

fn brute_force_w2(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    fn go(i: usize, used: &mut Vec<bool>, acc: f64, a: &[Vec<f64>], b: &[Vec<f64>], best: &mut f64) {
        if i == a.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                let c: f64 = a[i].iter().zip(&b[j]).map(|(x, y)| (x - y) * (x - y)).sum();
                go(i + 1, used, acc + c, a, b, best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, &mut vec![false; b.len()], 0.0, a, b, &mut best);
    (best / a.len() as f64).sqrt()
}

fn metric_axioms() -> Outcome {
    let mut r = rng::stream(9, 0);
    let (mut sym, mut ident, mut tri, mut brute): (f64, f64, f64, f64) = (0.0, 0.0, f64::INFINITY, 0.0);
    let mut brute_checked = 0;
    for _ in 0..200 {
        let n = r.random_range(1..=50);
        let d = r.random_range(1..=4);
        let mut cloud = || {
            let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.random_range(-3.0..3.0)).collect()).collect();
            SampleCloud::uniform(pts).unwrap()
        };
        let (a, b, c) = (cloud(), cloud(), cloud());
        let ab = w2_empirical(&a, &b).unwrap();
        let ba = w2_empirical(&b, &a).unwrap();
        let bc = w2_empirical(&b, &c).unwrap();
        let ac = w2_empirical(&a, &c).unwrap();
        sym = sym.max((ab - ba).abs());
        ident = ident.max(w2_empirical(&a, &a).unwrap());
        tri = tri.min(ab + bc - ac);
        if n <= 6 {
            brute = brute.max((ab - brute_force_w2(a.points(), b.points())).abs());
            brute_checked += 1;
        }
    }
    let ok = sym == 0.0 && ident <= 1e-10 && tri >= -1e-9 && brute <= 1e-9;
    outcome(
        ok,
        format!(
            "asymmetry {sym:e}, self-distance {ident:e}, smallest triangle margin {tri:.3e} (≥ -1e-9), brute-force gap {brute:e} over {brute_checked} small triples"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("Gaussian stationarity", gaussian_stationarity),
        ("W2 estimator oracle", w2_oracle),
        ("KL estimator oracle", kl_oracle),
        ("delay robustness", delay_robustness),
        ("Sync determinism and oracle equivalence", sync_determinism),
        ("staleness soundness", staleness_soundness),
        ("theory formulas", theory_formulas),
        ("regression W2 shape", regression_shape),
        ("metric axioms", metric_axioms),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} ({name}): {} [{:.1}s] {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
