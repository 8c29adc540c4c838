//! Sampling-quality diagnostics: exact empirical W₂, the Gaussian closed
//! form, histogram KL against an unnormalized density, and reference clouds.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::potentials::ParamVector;
use crate::record::RunRecord;

mod kl;
mod laplace;
mod ot;

pub use kl::{kl_histogram, GridSpec, MAX_LEAKAGE};
pub use laplace::{laplace_gaussian, laplace_reference};
pub use ot::{w2_assignment, w2_empirical, w2_gaussian, w2_transport_lp};

/// Weighted point cloud; weights sum to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleCloud {
    points: Vec<ParamVector>,
    weights: Vec<f64>,
    uniform: bool,
}

impl SampleCloud {
    pub fn uniform(points: Vec<ParamVector>) -> Result<Self> {
        let n = points.len();
        Self::check_points(&points)?;
        Ok(Self {
            points,
            weights: vec![1.0 / n as f64; n],
            uniform: true,
        })
    }

    /// Normalizes `weights`; they must be nonnegative with a positive sum.
    pub fn weighted(points: Vec<ParamVector>, weights: Vec<f64>) -> Result<Self> {
        Self::check_points(&points)?;
        if weights.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("cloud weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("cloud weights sum to zero"));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let uniform = weights.iter().all(|w| *w == weights[0]);
        Ok(Self {
            points,
            weights,
            uniform,
        })
    }

    fn check_points(points: &[ParamVector]) -> Result<()> {
        let first = points.first().ok_or(Error::Empty("sample cloud"))?;
        if let Some(bad) = points.iter().find(|p| p.len() != first.len()) {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                got: bad.len(),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[ParamVector] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Keeps only the listed coordinates.
    pub fn project(&self, coords: &[usize]) -> Result<Self> {
        if let Some(&c) = coords.iter().find(|&&c| c >= self.dim()) {
            return Err(Error::invalid(format!("coordinate {c} out of range")));
        }
        if coords.is_empty() {
            return Err(Error::invalid("projection needs at least one coordinate"));
        }
        Ok(Self {
            points: self
                .points
                .iter()
                .map(|p| coords.iter().map(|&c| p[c]).collect())
                .collect(),
            weights: self.weights.clone(),
            uniform: self.uniform,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMeasure {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianMeasure {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: cov.nrows(),
            });
        }
        ot::check_psd(&cov)?;
        Ok(Self { mean, cov })
    }

    pub fn isotropic(mean: &[f64], var: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(DVector::from_column_slice(mean), DMatrix::identity(d, d) * var)
    }
}

/// The last `window` kept iterates of a run, as a uniform cloud.
pub fn trailing_cloud(r: &RunRecord, window: usize) -> Result<SampleCloud> {
    if window == 0 {
        return Err(Error::invalid("window must be at least 1"));
    }
    if window > r.iterates.len() {
        return Err(Error::invalid(format!(
            "window {window} exceeds the {} kept iterates",
            r.iterates.len()
        )));
    }
    SampleCloud::uniform(r.iterates[r.iterates.len() - window..].to_vec())
}

/// Weighted mean and unbiased covariance. For weights `w` the covariance is
/// `Σ w_i (x_i − μ)(x_i − μ)ᵀ / (1 − Σ w_i²)`, which is the usual `N − 1`
/// estimator for uniform weights; a single atom has zero covariance.
pub fn moments(c: &SampleCloud) -> (DVector<f64>, DMatrix<f64>) {
    let d = c.dim();
    let mut mean = DVector::zeros(d);
    for (p, w) in c.points.iter().zip(&c.weights) {
        for i in 0..d {
            mean[i] += w * p[i];
        }
    }
    let mut cov = DMatrix::zeros(d, d);
    let w2: f64 = c.weights.iter().map(|w| w * w).sum();
    if 1.0 - w2 <= 1e-15 {
        return (mean, cov);
    }
    for (p, w) in c.points.iter().zip(&c.weights) {
        for i in 0..d {
            let di = p[i] - mean[i];
            for j in 0..=i {
                cov[(i, j)] += w * di * (p[j] - mean[j]);
            }
        }
    }
    let scale = 1.0 / (1.0 - w2);
    for i in 0..d {
        for j in 0..=i {
            cov[(i, j)] *= scale;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    (mean, cov)
}
