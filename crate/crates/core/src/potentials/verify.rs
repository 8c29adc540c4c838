use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{dist, norm, Potential};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Where and how densely `verify_assumptions` probes.
#[derive(Clone, Debug)]
pub struct ProbeConfig {
    /// Number of random pairs (and triples).
    pub n_probe: usize,
    pub radius: f64,
    /// Ball centre; the origin when absent.
    pub center: Option<Vec<f64>>,
    /// Also probe pairs that differ along a single coordinate axis.
    pub axis_probes: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            n_probe: 64,
            radius: 1.0,
            center: None,
            axis_probes: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    /// Strong convexity with the declared `m` held on every triple.
    pub m_ok: bool,
    /// Largest observed `‖∇U(x) − ∇U(y)‖ / ‖x − y‖`.
    pub l_hat: f64,
    /// `l_hat` does not exceed the declared constant (1e-9 slack).
    pub l_ok: bool,
    /// Largest observed gradient norm.
    pub g_hat: f64,
}

fn point_in_ball(center: &[f64], radius: f64, rng: &mut RngStream) -> Vec<f64> {
    let d = center.len();
    let mut dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let n = norm(&dir).max(f64::MIN_POSITIVE);
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / d as f64) / n;
    dir.iter_mut().zip(center).for_each(|(v, c)| *v = c + *v * r);
    dir
}

/// Empirically checks strong convexity and the gradient Lipschitz bound on
/// points sampled from a ball, and records the largest gradient norm seen.
pub fn verify_assumptions(
    p: &dyn Potential,
    cfg: &ProbeConfig,
    rng: &mut RngStream,
) -> Result<AssumptionReport> {
    if cfg.n_probe < 2 {
        return Err(Error::invalid("n_probe must be at least 2"));
    }
    let d = p.dim();
    let center = cfg.center.clone().unwrap_or_else(|| vec![0.0; d]);
    crate::error::check_dim(d, center.len())?;
    let c = p.constants();

    let (mut gx, mut gy) = (vec![0.0; d], vec![0.0; d]);
    let mut m_ok = true;
    let mut l_hat: f64 = 0.0;
    let mut g_hat: f64 = 0.0;

    let mut check_pair = |x: &[f64], y: &[f64], t: f64, m_ok: &mut bool| {
        p.grad_into(x, &mut gx);
        p.grad_into(y, &mut gy);
        g_hat = g_hat.max(norm(&gx)).max(norm(&gy));
        let r = dist(x, y);
        if r > 0.0 {
            l_hat = l_hat.max(dist(&gx, &gy) / r);
        }
        let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let (ux, uy, uz) = (p.value(x), p.value(y), p.value(&z));
        let rhs = t * ux + (1.0 - t) * uy - t * (1.0 - t) * (c.m / 2.0) * r * r;
        let slack = 1e-9 * (1.0 + ux.abs().max(uy.abs()));
        if uz > rhs + slack {
            *m_ok = false;
        }
    };

    for _ in 0..cfg.n_probe {
        let x = point_in_ball(&center, cfg.radius, rng);
        let y = point_in_ball(&center, cfg.radius, rng);
        let t: f64 = rng.random();
        check_pair(&x, &y, t, &mut m_ok);
    }
    if cfg.axis_probes {
        for axis in 0..d {
            let x = point_in_ball(&center, cfg.radius, rng);
            let mut y = x.clone();
            y[axis] += cfg.radius;
            check_pair(&x, &y, 0.5, &mut m_ok);
        }
    }

    Ok(AssumptionReport {
        m_ok,
        l_hat,
        l_ok: l_hat <= c.lipschitz + 1e-9 * c.lipschitz.max(1.0),
        g_hat,
    })
}
