//! Single Langevin updates and step-size schedules.
//!
//! One step is `x ← x − γ·g + √(2σγ)·z`, where `g` is a gradient (fresh or
//! stale) and `z` a standard Gaussian draw that the caller supplies. Keeping
//! the draw outside the step lets every executor consume the same noise
//! sequence regardless of scheduling.
//!
//! With temperature `σ` the chain targets `π ∝ exp(−U/σ)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::potentials::ParamVector;

/// Diffusion temperature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams {
    pub sigma: f64,
}

impl NoiseParams {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be nonnegative, got {sigma}")));
        }
        Ok(Self { sigma })
    }
}

/// Coefficient `√(2σγ)` multiplying the Gaussian draw.
#[inline]
pub fn noise_scale(gamma: f64, sigma: f64) -> f64 {
    (2.0 * sigma * gamma).sqrt()
}

/// In-place update shared by every executor, so that all code paths agree
/// bit for bit.
#[inline]
pub fn apply_step(x: &mut [f64], g: &[f64], gamma: f64, scale: f64, z: &[f64]) {
    for ((xi, gi), zi) in x.iter_mut().zip(g).zip(z) {
        *xi = step_coord(*xi, *gi, gamma, scale, *zi);
    }
}

#[inline]
pub(crate) fn step_coord(x: f64, g: f64, gamma: f64, scale: f64, z: f64) -> f64 {
    x - gamma * g + scale * z
}

fn check_step_args(x: &[f64], g: &[f64], gamma: f64, sigma: f64, z: &[f64]) -> Result<()> {
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("step size must be positive, got {gamma}")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::invalid(format!("sigma must be nonnegative, got {sigma}")));
    }
    check_dim(x.len(), g.len())?;
    check_dim(x.len(), z.len())
}

/// Euler–Maruyama step `x − γg + √(2σγ)z`.
pub fn em_step(x: &[f64], g: &[f64], gamma: f64, sigma: f64, z: &[f64]) -> Result<ParamVector> {
    check_step_args(x, g, gamma, sigma, z)?;
    let mut out = x.to_vec();
    apply_step(&mut out, g, gamma, noise_scale(gamma, sigma), z);
    Ok(out)
}

/// Step from the current iterate using a gradient evaluated at a stale one.
pub fn delayed_step(
    x_now: &[f64],
    g_stale: &[f64],
    gamma: f64,
    sigma: f64,
    z: &[f64],
) -> Result<ParamVector> {
    em_step(x_now, g_stale, gamma, sigma, z)
}

/// A positive sequence indexed from `k = 1`.
#[derive(Clone)]
pub enum Sequence {
    Constant(f64),
    /// `scale / (k + offset)^exponent`
    Power { scale: f64, offset: f64, exponent: f64 },
    Custom(Arc<dyn Fn(u64) -> f64 + Send + Sync>),
}

impl Sequence {
    pub fn custom(f: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Self {
        Sequence::Custom(Arc::new(f))
    }

    #[inline]
    pub fn at(&self, k: u64) -> f64 {
        match self {
            Sequence::Constant(v) => *v,
            Sequence::Power {
                scale,
                offset,
                exponent,
            } => scale / (k as f64 + offset).powf(*exponent),
            Sequence::Custom(f) => f(k),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Sequence::Constant(_))
    }
}

impl fmt::Debug for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sequence::Constant(v) => write!(f, "Constant({v})"),
            Sequence::Power {
                scale,
                offset,
                exponent,
            } => write!(f, "Power({scale}/(k+{offset})^{exponent})"),
            Sequence::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Step sizes `γ_k` and averaging weights `λ_k`, both indexed from 1.
#[derive(Clone, Debug)]
pub struct StepSchedule {
    pub gamma: Sequence,
    pub lambda: Sequence,
}

impl StepSchedule {
    pub fn constant(gamma: f64) -> Self {
        Self {
            gamma: Sequence::Constant(gamma),
            lambda: Sequence::Constant(1.0),
        }
    }

    #[inline]
    pub fn gamma_at(&self, k: u64) -> f64 {
        self.gamma.at(k)
    }

    #[inline]
    pub fn lambda_at(&self, k: u64) -> f64 {
        self.lambda.at(k)
    }
}

/// Checks positivity, monotonicity, the chain condition
/// `λ_{k+1}(1 − mγ_{k+1})/γ_{k+1} ≤ λ_k/γ_k` and the cap
/// `γ₁ < 1/(2(L² + L⁴))` for `k` up to `horizon`.
pub fn validate_schedule(s: &StepSchedule, m: f64, l: f64, horizon: u64) -> bool {
    let horizon = horizon.max(1);
    let cap = 1.0 / (2.0 * (l * l + l.powi(4)));
    let g1 = s.gamma_at(1);
    if !(g1 < cap) {
        return false;
    }
    let mut prev = (g1, s.lambda_at(1));
    if !(prev.0 > 0.0 && prev.1 > 0.0) {
        return false;
    }
    for k in 2..=horizon {
        let (g, lam) = (s.gamma_at(k), s.lambda_at(k));
        if !(g > 0.0 && lam > 0.0) || g > prev.0 || lam > prev.1 {
            return false;
        }
        let lhs = lam * (1.0 - m * g) / g;
        let rhs = prev.1 / prev.0;
        if lhs > rhs * (1.0 + 1e-12) {
            return false;
        }
        prev = (g, lam);
    }
    true
}

/// `(λ_{N+1}, …, λ_{N+n}) / Λ_{N,N+n}`.
pub fn averaged_weights(s: &StepSchedule, start: u64, n: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("averaging window must contain at least one step"));
    }
    let raw: Vec<f64> = (start + 1..=start + n).map(|k| s.lambda_at(k)).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("averaging weights must have a positive sum"));
    }
    Ok(raw.into_iter().map(|v| v / total).collect())
}
