use nalgebra::{Cholesky, DMatrix, DVector};

use super::{GaussianMeasure, SampleCloud};
use crate::error::{check_dim, Error, Result};
use crate::potentials::Potential;
use crate::rng::{self, RngStream};

fn factor(p: &dyn Potential, x_star: &[f64]) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    check_dim(p.dim(), x_star.len())?;
    let h = p.hessian(x_star);
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("Hessian has non-finite entries".into()));
    }
    Cholesky::new(h).ok_or_else(|| {
        Error::NotPositiveDefinite(format!(
            "Hessian of `{}` is not positive definite at the given point",
            p.name()
        ))
    })
}

/// The Gaussian `N(x*, σ H(x*)⁻¹)`.
pub fn laplace_gaussian(p: &dyn Potential, x_star: &[f64], sigma: f64) -> Result<GaussianMeasure> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma must be positive"));
    }
    let chol = factor(p, x_star)?;
    Ok(GaussianMeasure {
        mean: DVector::from_column_slice(x_star),
        cov: chol.inverse() * sigma,
    })
}

/// `n_samples` draws from `N(x*, σ H(x*)⁻¹)`, the Laplace approximation of
/// the target around a mode.
pub fn laplace_reference(
    p: &dyn Potential,
    x_star: &[f64],
    sigma: f64,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<SampleCloud> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma must be positive"));
    }
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    let chol = factor(p, x_star)?;
    // H = L Lᵀ, so L⁻ᵀ z has covariance H⁻¹
    let lt: DMatrix<f64> = chol.l().transpose();
    let d = x_star.len();
    let sd = sigma.sqrt();
    let mut points = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let z = DVector::from_vec(rng::standard_normal_vec(rng, d));
        let y = lt
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        points.push((0..d).map(|i| x_star[i] + sd * y[i]).collect());
    }
    SampleCloud::uniform(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::moments;
    use crate::potentials::{make_quadratic, make_rica, QuadraticSpec, RicaSpec};

    #[test]
    fn quadratic_laplace_is_the_target() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let q = make_quadratic(QuadraticSpec {
            a: a.clone(),
            b: DVector::from_column_slice(&[1.0, -1.0]),
        })
        .unwrap();
        let g = laplace_gaussian(&q, q.minimizer(), 0.3).unwrap();
        let (mean, cov) = q.stationary_gaussian(0.3);
        assert!((g.mean - mean).norm() < 1e-12);
        assert!((g.cov - cov).amax() < 1e-12);
    }

    #[test]
    fn sample_mean_within_clt_band() {
        let q = make_quadratic(QuadraticSpec::diagonal(&[1.0, 4.0, 0.25]).with_b(&[1.0, 2.0, 3.0])).unwrap();
        let x_star = q.minimizer().to_vec();
        let n = 100_000;
        let c = laplace_reference(&q, &x_star, 0.5, n, &mut rng::stream(7, 0)).unwrap();
        let (mean, cov) = moments(&c);
        for i in 0..3 {
            let var = 0.5 / [1.0, 4.0, 0.25][i];
            assert!((mean[i] - x_star[i]).abs() <= 3.0 * (var / n as f64).sqrt());
            assert!((cov[(i, i)] - var).abs() / var < 0.03);
        }
    }

    #[test]
    fn saddle_is_rejected() {
        let data = DMatrix::from_row_slice(3, 2, &[1.0, 0.2, -0.4, 0.9, 0.5, -1.0]);
        let rica = make_rica(RicaSpec { lambda: 1e-6, data }).unwrap();
        let r = laplace_reference(&rica, &[0.0; 4], 1.0, 10, &mut rng::stream(0, 0));
        assert!(matches!(r, Err(Error::NotPositiveDefinite(_))));
    }
}
