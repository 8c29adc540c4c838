//! Least-squares potential for a quartic polynomial regression.
//!
//! The model is a single linear layer over the features `(t, t², t³, t⁴)`
//! plus a bias, so the parameter vector has five entries. The loss is
//! `U(θ) = (1/2n) Σ (φ(tᵢ)·θ − yᵢ)²`, a convex quadratic in `θ`; the full
//! gradient is evaluated through the sufficient statistics `ΦᵀΦ/n` and
//! `Φᵀy/n`.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Constants, Potential};
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const N_FEATURES: usize = 5;

/// `(t, t², t³, t⁴, 1)`.
pub fn poly_features(t: f64) -> [f64; N_FEATURES] {
    let t2 = t * t;
    [t, t2, t2 * t, t2 * t2, 1.0]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataMode {
    /// Data generated once and reused; minibatches subsample it.
    Frozen,
    /// Every minibatch draws fresh points `t ~ U[-1, 1]`; the potential is
    /// the population loss.
    Streaming,
}

#[derive(Clone, Debug)]
pub struct RegressionSpec {
    /// Four feature weights followed by the bias.
    pub true_coeffs: Vec<f64>,
    pub n_samples: usize,
    pub data_noise_std: f64,
    pub mode: DataMode,
}

impl RegressionSpec {
    pub fn new(true_coeffs: Vec<f64>, n_samples: usize, data_noise_std: f64) -> Self {
        Self {
            true_coeffs,
            n_samples,
            data_noise_std,
            mode: DataMode::Frozen,
        }
    }

    /// Coefficients drawn from a standard normal.
    pub fn random_coeffs(rng: &mut RngStream) -> Vec<f64> {
        (0..N_FEATURES).map(|_| StandardNormal.sample(rng)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct RegressionPotential {
    spec: RegressionSpec,
    ts: Vec<f64>,
    ys: Vec<f64>,
    gram: [[f64; N_FEATURES]; N_FEATURES],
    cross: [f64; N_FEATURES],
    half_mean_sq_y: f64,
    m: f64,
    lipschitz: f64,
}

pub fn make_regression(spec: &RegressionSpec, rng: &mut RngStream) -> Result<RegressionPotential> {
    if spec.true_coeffs.len() != N_FEATURES {
        return Err(Error::DimensionMismatch {
            expected: N_FEATURES,
            got: spec.true_coeffs.len(),
        });
    }
    if spec.n_samples == 0 {
        return Err(Error::invalid("regression needs at least one sample"));
    }
    if !(spec.data_noise_std >= 0.0) {
        return Err(Error::invalid("data noise std must be nonnegative"));
    }
    let theta = &spec.true_coeffs;
    let mut gram = [[0.0; N_FEATURES]; N_FEATURES];
    let mut cross = [0.0; N_FEATURES];
    let mut half_mean_sq_y = 0.0;
    let (mut ts, mut ys) = (Vec::new(), Vec::new());

    match spec.mode {
        DataMode::Frozen => {
            ts.reserve(spec.n_samples);
            ys.reserve(spec.n_samples);
            for _ in 0..spec.n_samples {
                let (t, y) = draw_point(theta, spec.data_noise_std, rng);
                ts.push(t);
                ys.push(y);
            }
            let n = spec.n_samples as f64;
            for (&t, &y) in ts.iter().zip(&ys) {
                let phi = poly_features(t);
                for i in 0..N_FEATURES {
                    for j in 0..N_FEATURES {
                        gram[i][j] += phi[i] * phi[j];
                    }
                    cross[i] += phi[i] * y;
                }
                half_mean_sq_y += y * y;
            }
            gram.iter_mut().flatten().for_each(|v| *v /= n);
            cross.iter_mut().for_each(|v| *v /= n);
            half_mean_sq_y /= 2.0 * n;
        }
        DataMode::Streaming => {
            // E[t^k] for t ~ U[-1, 1]
            let moment = |k: usize| if k % 2 == 1 { 0.0 } else { 1.0 / (k as f64 + 1.0) };
            let powers = [1, 2, 3, 4, 0];
            for i in 0..N_FEATURES {
                for j in 0..N_FEATURES {
                    gram[i][j] = moment(powers[i] + powers[j]);
                }
            }
            for i in 0..N_FEATURES {
                cross[i] = (0..N_FEATURES).map(|j| gram[i][j] * theta[j]).sum();
            }
            let quad: f64 = (0..N_FEATURES).map(|i| theta[i] * cross[i]).sum();
            half_mean_sq_y = 0.5 * (quad + spec.data_noise_std * spec.data_noise_std);
        }
    }

    let g = DMatrix::from_fn(N_FEATURES, N_FEATURES, |i, j| gram[i][j]);
    let eig = g.symmetric_eigen();
    Ok(RegressionPotential {
        spec: spec.clone(),
        ts,
        ys,
        gram,
        cross,
        half_mean_sq_y,
        m: eig.eigenvalues.min().max(0.0),
        lipschitz: eig.eigenvalues.max(),
    })
}

fn draw_point(theta: &[f64], noise_std: f64, rng: &mut RngStream) -> (f64, f64) {
    let t: f64 = rng.random_range(-1.0..=1.0);
    let phi = poly_features(t);
    let mut y: f64 = phi.iter().zip(theta).map(|(a, b)| a * b).sum();
    if noise_std > 0.0 {
        let e: f64 = StandardNormal.sample(rng);
        y += noise_std * e;
    }
    (t, y)
}

impl RegressionPotential {
    pub fn true_coeffs(&self) -> &[f64] {
        &self.spec.true_coeffs
    }

    pub fn spec(&self) -> &RegressionSpec {
        &self.spec
    }

    pub fn n_samples(&self) -> usize {
        self.spec.n_samples
    }

    fn accumulate(out: &mut [f64], x: &[f64], t: f64, y: f64) {
        let phi = poly_features(t);
        let r: f64 = phi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - y;
        for (o, p) in out.iter_mut().zip(phi) {
            *o += p * r;
        }
    }
}

impl Potential for RegressionPotential {
    fn dim(&self) -> usize {
        N_FEATURES
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..N_FEATURES {
            let gx: f64 = (0..N_FEATURES).map(|j| self.gram[i][j] * x[j]).sum();
            quad += x[i] * gx;
            lin += self.cross[i] * x[i];
        }
        0.5 * quad - lin + self.half_mean_sq_y
    }

    fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let gx: f64 = (0..N_FEATURES).map(|j| self.gram[i][j] * x[j]).sum();
            *o = gx - self.cross[i];
        }
    }

    fn stoch_grad_into(
        &self,
        x: &[f64],
        batch: super::BatchSpec,
        rng: &mut RngStream,
        out: &mut [f64],
    ) {
        let k = match batch {
            super::BatchSpec::Full => return self.grad_into(x, out),
            super::BatchSpec::Minibatch(k) => k,
        };
        out.iter_mut().for_each(|o| *o = 0.0);
        match self.spec.mode {
            DataMode::Frozen => {
                // a subsample the size of the data set is the data set
                if k >= self.ts.len() {
                    return self.grad_into(x, out);
                }
                for i in index::sample(rng, self.ts.len(), k) {
                    Self::accumulate(out, x, self.ts[i], self.ys[i]);
                }
            }
            DataMode::Streaming => {
                for _ in 0..k {
                    let (t, y) = draw_point(&self.spec.true_coeffs, self.spec.data_noise_std, rng);
                    Self::accumulate(out, x, t, y);
                }
            }
        }
        let inv = 1.0 / k as f64;
        out.iter_mut().for_each(|o| *o *= inv);
    }

    fn constants(&self) -> Constants {
        Constants {
            m: self.m,
            lipschitz: self.lipschitz,
            grad_bound: None,
        }
    }

    fn hessian(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(N_FEATURES, N_FEATURES, |i, j| self.gram[i][j])
    }

    fn name(&self) -> &'static str {
        "regression"
    }
}

/// Exact least-squares solution `(ΦᵀΦ)⁻¹Φᵀy`, used as an oracle for the mode.
#[cfg(test)]
pub(crate) fn normal_equations_solution(p: &RegressionPotential) -> Option<Vec<f64>> {
    let g = DMatrix::from_fn(N_FEATURES, N_FEATURES, |i, j| p.gram[i][j]);
    let c = nalgebra::DVector::from_column_slice(&p.cross);
    g.cholesky().map(|ch| ch.solve(&c).iter().copied().collect())
}
