//! Potential functions `U`, their gradients and minibatch estimators.
//!
//! The target measure of a Langevin chain at temperature `sigma` is
//! `pi(x) ∝ exp(-U(x) / sigma)`.

mod quadratic;
mod regression;
mod rica;
mod verify;

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::rng::RngStream;

pub use quadratic::{make_quadratic, QuadraticPotential, QuadraticSpec};
pub use regression::{make_regression, poly_features, DataMode, N_FEATURES, RegressionPotential, RegressionSpec};
pub use rica::{make_rica, RicaPotential, RicaSpec, DEFAULT_RICA_LAMBDA};
#[cfg(test)]
pub(crate) use regression::normal_equations_solution;
pub use verify::{verify_assumptions, AssumptionReport, ProbeConfig};

/// A point in parameter space; the state of a chain.
pub type ParamVector = Vec<f64>;

/// Curvature constants declared by a potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constants {
    /// Strong-convexity modulus; 0 when unknown or non-convex.
    pub m: f64,
    /// Lipschitz constant of the gradient.
    pub lipschitz: f64,
    /// Bound on the gradient norm, when one is known.
    pub grad_bound: Option<f64>,
}

/// How many data points a stochastic gradient touches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchSpec {
    Full,
    /// Uniform subsample of this many points, drawn without replacement.
    Minibatch(usize),
}

impl BatchSpec {
    pub fn validate(self) -> Result<Self> {
        match self {
            BatchSpec::Minibatch(0) => Err(Error::invalid("batch size must be at least 1")),
            b => Ok(b),
        }
    }
}

pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn grad_into(&self, x: &[f64], out: &mut [f64]);

    /// Unbiased estimate of the gradient. `BatchSpec::Full` must reproduce
    /// `grad_into` bit for bit. Potentials without data ignore the batch.
    fn stoch_grad_into(&self, x: &[f64], batch: BatchSpec, rng: &mut RngStream, out: &mut [f64]) {
        let _ = (batch, rng);
        self.grad_into(x, out);
    }

    fn constants(&self) -> Constants;

    /// Hessian at `x`; central differences of the gradient unless overridden.
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        finite_difference_hessian(|y, g| self.grad_into(y, g), x)
    }

    fn name(&self) -> &'static str;
}

pub fn eval_value(p: &dyn Potential, x: &[f64]) -> Result<f64> {
    check_dim(p.dim(), x.len())?;
    Ok(p.value(x))
}

pub fn eval_grad(p: &dyn Potential, x: &[f64]) -> Result<ParamVector> {
    check_dim(p.dim(), x.len())?;
    let mut g = vec![0.0; x.len()];
    p.grad_into(x, &mut g);
    Ok(g)
}

pub fn eval_stoch_grad(
    p: &dyn Potential,
    x: &[f64],
    batch: BatchSpec,
    rng: &mut RngStream,
) -> Result<ParamVector> {
    check_dim(p.dim(), x.len())?;
    let batch = batch.validate()?;
    let mut g = vec![0.0; x.len()];
    p.stoch_grad_into(x, batch, rng, &mut g);
    Ok(g)
}

pub(crate) fn finite_difference_hessian(
    grad: impl Fn(&[f64], &mut [f64]),
    x: &[f64],
) -> DMatrix<f64> {
    let d = x.len();
    let mut h = DMatrix::zeros(d, d);
    let mut y = x.to_vec();
    let mut gp = vec![0.0; d];
    let mut gm = vec![0.0; d];
    for j in 0..d {
        let step = 1e-5 * x[j].abs().max(1.0);
        y[j] = x[j] + step;
        grad(&y, &mut gp);
        y[j] = x[j] - step;
        grad(&y, &mut gm);
        y[j] = x[j];
        for i in 0..d {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    (&h + h.transpose()) * 0.5
}

/// Wraps a potential and replaces its declared constants.
pub struct WithConstants<P> {
    inner: P,
    constants: Constants,
}

impl<P: Potential> WithConstants<P> {
    pub fn new(inner: P, constants: Constants) -> Self {
        Self { inner, constants }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: Potential> Potential for WithConstants<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x)
    }
    fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        self.inner.grad_into(x, out)
    }
    fn stoch_grad_into(&self, x: &[f64], batch: BatchSpec, rng: &mut RngStream, out: &mut [f64]) {
        self.inner.stoch_grad_into(x, batch, rng, out)
    }
    fn constants(&self) -> Constants {
        self.constants
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        self.inner.hessian(x)
    }
    fn name(&self) -> &'static str {
        self.inner.name()
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
