use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use super::artifacts::{self, MetricsRow, TrajectoryRow};
use super::cifar::{load_cifar10, sample_patches};
use super::config::{ExperimentConfig, PotentialConfig};
use super::mode::{find_mode, ModeSearch};
use crate::error::{Error, Result};
use crate::exec::{measure_staleness, run_sync, run_wcon, run_wicon, StalenessSummary, WorkerConfig};
use crate::langevin::NoiseParams;
use crate::metrics::{kl_histogram, laplace_gaussian, laplace_reference, w2_assignment, GaussianMeasure, GridSpec, SampleCloud};
use crate::potentials::{
    make_quadratic, make_regression, make_rica, ParamVector, Potential, QuadraticSpec, RegressionSpec, RicaSpec,
};
use crate::record::{RunRecord, Scheme};
use crate::rng::{self, RngStream};
use crate::sim::{SimConfig, Simulator};

const KL_MAX_DIM: usize = 6;
const KL_MAX_CELLS: usize = 1 << 20;

/// Everything a run is measured against.
pub struct Setup {
    pub potential: Box<dyn Potential>,
    pub x0: ParamVector,
    pub mode: ModeSearch,
    pub laplace: GaussianMeasure,
    /// `w2_window` draws from the Laplace approximation.
    pub reference: Vec<ParamVector>,
    pub grid: Option<GridSpec>,
}

pub fn build_potential(cfg: &ExperimentConfig, aux: &mut RngStream) -> Result<Box<dyn Potential>> {
    Ok(match &cfg.potential {
        PotentialConfig::Quadratic { a, dim, b } => {
            let spec = QuadraticSpec {
                a: DMatrix::from_row_slice(*dim, *dim, a),
                b: DVector::from_column_slice(b),
            };
            Box::new(make_quadratic(spec).map_err(|e| Error::Config(e.to_string()))?)
        }
        PotentialConfig::Regression {
            n_samples,
            noise_std,
            coeffs,
            mode,
        } => {
            let coeffs = match coeffs {
                Some(c) => c.clone(),
                None => RegressionSpec::random_coeffs(aux),
            };
            let mut spec = RegressionSpec::new(coeffs, *n_samples, *noise_std);
            spec.mode = *mode;
            Box::new(make_regression(&spec, aux)?)
        }
        PotentialConfig::Rica {
            data,
            lambda,
            patch,
            n_patches,
        } => {
            let images = load_cifar10(data)?;
            let patches = sample_patches(&images, *patch, *n_patches, aux)?;
            Box::new(make_rica(RicaSpec { lambda: *lambda, data: patches })?)
        }
    })
}

/// Builds the potential, finds the mode and draws the reference cloud.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Setup> {
    let mut aux = rng::aux_stream(cfg.seed);
    let potential = build_potential(cfg, &mut aux)?;
    let d = potential.dim();
    let x0 = match &cfg.x0 {
        Some(x) if x.len() != d => {
            return Err(Error::Config(format!("`x0` has {} entries, the potential has dimension {d}", x.len())))
        }
        Some(x) => x.clone(),
        // the origin is a critical point of the RICA objective
        None if matches!(cfg.potential, PotentialConfig::Rica { .. }) => {
            rng::standard_normal_vec(&mut aux, d).into_iter().map(|v| 0.1 * v).collect()
        }
        None => vec![0.0; d],
    };
    let mode = find_mode(potential.as_ref(), &x0, cfg.mode_tol, cfg.mode_max_iters)?;
    let (laplace, reference) = match cfg.hessian_floor {
        None => (
            laplace_gaussian(potential.as_ref(), &mode.x, cfg.sigma)?,
            laplace_reference(potential.as_ref(), &mode.x, cfg.sigma, cfg.w2_window, &mut aux)?
                .points()
                .to_vec(),
        ),
        Some(floor) => floored_laplace(potential.as_ref(), &mode.x, cfg.sigma, floor, cfg.w2_window, &mut aux)?,
    };
    let grid = kl_grid(cfg, &laplace);
    Ok(Setup {
        potential,
        x0,
        mode,
        laplace,
        reference,
        grid,
    })
}

/// Laplace approximation with the Hessian's eigenvalues raised to `floor`.
fn floored_laplace(
    p: &dyn Potential,
    x: &[f64],
    sigma: f64,
    floor: f64,
    n: usize,
    rng: &mut RngStream,
) -> Result<(GaussianMeasure, Vec<ParamVector>)> {
    let h = p.hessian(x);
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("Hessian has non-finite entries".into()));
    }
    let eig = ((&h + h.transpose()) * 0.5).symmetric_eigen();
    let inv = eig.eigenvalues.map(|l| sigma / l.max(floor));
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&inv.map(f64::sqrt));
    let cov = &root * root.transpose();
    let d = x.len();
    let points = (0..n)
        .map(|_| {
            let z = DVector::from_vec(rng::standard_normal_vec(rng, d));
            let y = &root * z;
            (0..d).map(|i| x[i] + y[i]).collect()
        })
        .collect();
    Ok((GaussianMeasure::new(DVector::from_column_slice(x), cov)?, points))
}

fn kl_grid(cfg: &ExperimentConfig, g: &GaussianMeasure) -> Option<GridSpec> {
    let d = g.mean.len();
    if d > KL_MAX_DIM || cfg.kl_bins.checked_pow(d as u32).is_none_or(|c| c > KL_MAX_CELLS) {
        return None;
    }
    let half: Vec<f64> = (0..d).map(|i| cfg.kl_width * g.cov[(i, i)].sqrt()).collect();
    // a grid too narrow to resolve in floating point means no KL column
    GridSpec::new(
        (0..d).map(|i| g.mean[i] - half[i]).collect(),
        (0..d).map(|i| g.mean[i] + half[i]).collect(),
        vec![cfg.kl_bins; d],
    )
    .ok()
}

/// Metrics after `k` updates; staleness columns cover updates `prev+1..=k`.
/// Before `w2_window` updates exist, the cloud and the reference both use
/// the first `k` points.
pub fn metrics_at(setup: &Setup, cfg: &ExperimentConfig, r: &RunRecord, k: u64, prev: u64) -> Result<MetricsRow> {
    let k_us = k as usize;
    if k == 0 || r.stride != 1 || r.iterates.len() < k_us || r.events.len() < k_us {
        return Err(Error::invalid(format!("record has no iterate for update {k}")));
    }
    let n = k_us.min(cfg.w2_window).min(setup.reference.len());
    let cloud = &r.iterates[k_us - n..k_us];
    let w2 = w2_assignment(cloud, &setup.reference[..n])?;
    let kl = match &setup.grid {
        None => None,
        Some(g) => {
            let s = SampleCloud::uniform(cloud.to_vec())?;
            let sigma = cfg.sigma;
            let p = setup.potential.as_ref();
            match kl_histogram(&s, |x| -p.value(x) / sigma, g) {
                Ok(v) => Some(v),
                Err(Error::Numerical(_)) => None,
                Err(e) => return Err(e),
            }
        }
    };
    let span = &r.events[prev as usize..k_us];
    let (delay_mean, delay_max) = if span.is_empty() {
        (0.0, 0)
    } else {
        (
            span.iter().map(|e| e.delay as f64).sum::<f64>() / span.len() as f64,
            span.iter().map(|e| e.delay as u64).max().unwrap_or(0),
        )
    };
    Ok(MetricsRow {
        iter: k,
        wall_ns: r.events[k_us - 1].wall_ns,
        w2,
        kl,
        objective: setup.potential.value(&r.iterates[k_us - 1]),
        delay_mean,
        delay_max,
    })
}

/// True once the W₂ series has gone `window` iterations without a relative
/// improvement of more than `tol`. Needs an evaluation at least `window`
/// iterations before the latest one.
pub fn plateau_reached(rows: &[MetricsRow], window: u64, tol: f64) -> bool {
    let Some(last) = rows.last() else {
        return false;
    };
    if window == 0 || last.iter < window {
        return false;
    }
    let Some(j) = rows.iter().rposition(|r| r.iter <= last.iter - window) else {
        return false;
    };
    let then = rows[j].w2;
    let best = rows[j + 1..].iter().map(|r| r.w2).fold(f64::INFINITY, f64::min);
    if !(then > 0.0) {
        return true;
    }
    (then - best) / then < tol
}

fn metric_points(total: u64, every: u64) -> impl Iterator<Item = u64> {
    let last = (total % every != 0).then_some(total);
    (1..=total / every).map(move |i| i * every).chain(last)
}

/// Output of one experiment.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub digest: String,
    pub metrics: Vec<MetricsRow>,
    pub trajectory: Vec<TrajectoryRow>,
    pub staleness: Option<StalenessSummary>,
    pub summary: BTreeMap<String, String>,
    /// The run, truncated at the stopping point.
    pub record: RunRecord,
    pub stopped_early: bool,
}

fn simulate_with_plateau(setup: &Setup, cfg: &ExperimentConfig) -> Result<(RunRecord, Vec<MetricsRow>, bool)> {
    let mut sc = SimConfig::new(cfg.max_iters, setup.x0.clone(), cfg.seed);
    sc.batch = cfg.batch;
    sc.wall_clock = cfg.wall_clock;
    let mut sim = Simulator::new(
        setup.potential.as_ref(),
        &cfg.schedule(),
        NoiseParams::new(cfg.sigma)?,
        &cfg.delay,
        &sc,
    )?;
    let mut rows = Vec::new();
    let mut prev = 0;
    for k in metric_points(cfg.max_iters, cfg.metric_every) {
        sim.run_until(k);
        if !sim.current().iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical(format!("chain diverged before update {k}")));
        }
        rows.push(metrics_at(setup, cfg, sim.record(), k, prev)?);
        prev = k;
        if plateau_reached(&rows, cfg.plateau_window, cfg.plateau_tol) {
            return Ok((sim.into_record(), rows, k < cfg.max_iters));
        }
    }
    Ok((sim.into_record(), rows, false))
}

fn threaded(setup: &Setup, cfg: &ExperimentConfig) -> Result<(RunRecord, Vec<MetricsRow>, bool)> {
    let wc = WorkerConfig {
        batch: cfg.batch,
        wall_budget: cfg.wall_budget,
        wall_clock: cfg.wall_clock,
        noise: cfg.sync_noise,
        snapshot: cfg.snapshot,
        ..WorkerConfig::new(cfg.workers, setup.x0.clone(), cfg.seed, cfg.max_iters)
    };
    let p = setup.potential.as_ref();
    let s = cfg.schedule();
    let noise = NoiseParams::new(cfg.sigma)?;
    let mut rec = match cfg.scheme {
        Scheme::Sync => run_sync(p, &s, noise, &wc)?,
        Scheme::WCon => run_wcon(p, &s, noise, &wc, cfg.tau_cap)?,
        Scheme::WIcon => run_wicon(p, &s, noise, &wc)?,
        Scheme::Sim => unreachable!("sim runs through the simulator"),
    };
    if rec.iterates.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("chain diverged".into()));
    }
    let total = rec.events.len() as u64;
    let mut rows = Vec::new();
    let mut prev = 0;
    let mut stop = total;
    for k in metric_points(total, cfg.metric_every) {
        rows.push(metrics_at(setup, cfg, &rec, k, prev)?);
        prev = k;
        if plateau_reached(&rows, cfg.plateau_window, cfg.plateau_tol) {
            stop = k;
            break;
        }
    }
    let early = stop < total;
    rec.events.truncate(stop as usize);
    rec.iterates.truncate(stop as usize);
    Ok((rec, rows, early))
}

/// Hash of everything the reference cloud depends on; runs with equal keys
/// can be compared.
pub fn reference_key(cfg: &ExperimentConfig) -> String {
    let mut h = Sha256::new();
    for line in cfg.canonical().lines() {
        let key = line.split('=').next().unwrap_or("");
        if key == "potential"
            || key.contains('.')
            || matches!(key, "seed" | "sigma" | "w2_window" | "x0" | "mode_tol" | "mode_max_iters")
        {
            h.update(line.as_bytes());
            h.update(b"\n");
        }
    }
    hex::encode(h.finalize())
}

/// Runs the experiment without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let digest = cfg.digest();
    let setup = prepare(cfg)?;
    let (mut record, metrics, stopped_early) = match cfg.scheme {
        Scheme::Sim => simulate_with_plateau(&setup, cfg)?,
        _ => threaded(&setup, cfg)?,
    };
    record.digest = digest.clone();
    let trajectory = record
        .iterates
        .iter()
        .enumerate()
        .map(|(j, x)| TrajectoryRow {
            iter: record.iterate_step(j),
            x0: x[0],
            x1: x.get(1).copied(),
        })
        .collect();
    let staleness = if record.tracking && !record.events.is_empty() {
        Some(measure_staleness(&record)?)
    } else {
        None
    };

    let mut s = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        s.insert(k.to_string(), v);
    };
    put("digest", digest.clone());
    put("reference_key", reference_key(cfg));
    put("potential", cfg.potential.name().into());
    put("scheme", cfg.scheme.to_string());
    put("workers", cfg.workers.to_string());
    put("dim", setup.x0.len().to_string());
    put("seed", cfg.seed.to_string());
    put("iterations", record.events.len().to_string());
    put("stopped_early", stopped_early.to_string());
    put("mode_converged", setup.mode.converged.to_string());
    put("mode_grad_norm", setup.mode.grad_norm.to_string());
    put("mode_iters", setup.mode.iters.to_string());
    put("mode_objective", setup.potential.value(&setup.mode.x).to_string());
    if let Some(last) = metrics.last() {
        put("final_w2", last.w2.to_string());
        put("final_kl", last.kl.map_or("NA".into(), |v| v.to_string()));
        put("final_objective", last.objective.to_string());
        put("wall_ns", last.wall_ns.to_string());
    }
    if let Some(st) = &staleness {
        put("staleness_mean", st.mean.to_string());
        put("staleness_max", st.max.to_string());
    }
    if matches!(cfg.potential, PotentialConfig::Rica { .. }) {
        put("theory_bounds", "inapplicable (m = 0)".into());
    }

    Ok(RunOutput {
        digest,
        metrics,
        trajectory,
        staleness,
        summary: s,
        record,
        stopped_early,
    })
}

/// Writes the artifacts of `out` into `dir`.
pub fn write_artifacts(out: &RunOutput, dir: &Path, save_record: bool) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    artifacts::write_metrics(artifacts::create(&dir.join(artifacts::METRICS_FILE))?, &out.digest, &out.metrics)?;
    artifacts::write_trajectory(
        artifacts::create(&dir.join(artifacts::TRAJECTORY_FILE))?,
        &out.digest,
        &out.trajectory,
    )?;
    let hist = out.staleness.as_ref().map(|s| s.histogram.as_slice()).unwrap_or(&[]);
    artifacts::write_staleness(artifacts::create(&dir.join(artifacts::STALENESS_FILE))?, &out.digest, hist)?;
    artifacts::write_summary(artifacts::create(&dir.join(artifacts::SUMMARY_FILE))?, &out.summary)?;
    if save_record {
        out.record.save(&dir.join(artifacts::RECORD_FILE))?;
    }
    Ok(())
}

/// Runs the experiment and writes its artifacts to `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let out = execute(cfg)?;
    write_artifacts(&out, &cfg.out, cfg.save_record)?;
    Ok(out)
}

/// Recomputes the metric series of a stored record against the reference
/// built from `cfg`.
pub fn evaluate_record(cfg: &ExperimentConfig, record: &RunRecord) -> Result<Vec<MetricsRow>> {
    if !record.digest.is_empty() && record.digest != cfg.digest() {
        return Err(Error::Config("record was produced by a different configuration".into()));
    }
    let setup = prepare(cfg)?;
    if record.dim != setup.x0.len() {
        return Err(Error::DimensionMismatch {
            expected: setup.x0.len(),
            got: record.dim,
        });
    }
    let total = record.events.len() as u64;
    let mut rows = Vec::new();
    let mut prev = 0;
    for k in metric_points(total, cfg.metric_every) {
        rows.push(metrics_at(&setup, cfg, record, k, prev)?);
        prev = k;
    }
    Ok(rows)
}
