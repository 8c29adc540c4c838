use nalgebra::{DMatrix, DVector};

use super::{Constants, Potential};
use crate::error::{Error, Result};

/// `U(x) = ½ xᵀAx − bᵀx` with `A` symmetric positive definite.
#[derive(Clone, Debug)]
pub struct QuadraticSpec {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl QuadraticSpec {
    pub fn diagonal(diag: &[f64]) -> Self {
        Self {
            a: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
            b: DVector::zeros(diag.len()),
        }
    }

    pub fn with_b(mut self, b: &[f64]) -> Self {
        self.b = DVector::from_column_slice(b);
        self
    }
}

#[derive(Clone, Debug)]
pub struct QuadraticPotential {
    dim: usize,
    // row-major copy of A for the hot path
    a_rows: Vec<f64>,
    a: DMatrix<f64>,
    b: Vec<f64>,
    m: f64,
    lipschitz: f64,
    minimizer: Vec<f64>,
}

pub fn make_quadratic(spec: QuadraticSpec) -> Result<QuadraticPotential> {
    let d = spec.a.nrows();
    if d == 0 || spec.a.ncols() != d {
        return Err(Error::invalid("A must be a non-empty square matrix"));
    }
    if spec.b.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: spec.b.len(),
        });
    }
    let scale = spec.a.amax().max(1.0);
    if (&spec.a - spec.a.transpose()).amax() > 1e-12 * scale {
        return Err(Error::NotPositiveDefinite("A is not symmetric".into()));
    }
    let eig = spec.a.clone().symmetric_eigen();
    let m = eig.eigenvalues.min();
    let lipschitz = eig.eigenvalues.max();
    if !(m > 0.0) {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest eigenvalue of A is {m}"
        )));
    }
    let chol = spec
        .a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorisation failed".into()))?;
    let minimizer = chol.solve(&spec.b);
    let a_rows = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| spec.a[(i, j)])
        .collect();
    Ok(QuadraticPotential {
        dim: d,
        a_rows,
        a: spec.a,
        b: spec.b.iter().copied().collect(),
        m,
        lipschitz,
        minimizer: minimizer.iter().copied().collect(),
    })
}

impl QuadraticPotential {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `A⁻¹b`.
    pub fn minimizer(&self) -> &[f64] {
        &self.minimizer
    }

    /// Mean and covariance of the stationary law `N(A⁻¹b, σA⁻¹)`.
    pub fn stationary_gaussian(&self, sigma: f64) -> (DVector<f64>, DMatrix<f64>) {
        let inv = self
            .a
            .clone()
            .cholesky()
            .expect("validated at construction")
            .inverse();
        (DVector::from_column_slice(&self.minimizer), inv * sigma)
    }
}

impl Potential for QuadraticPotential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..d {
            let row = &self.a_rows[i * d..(i + 1) * d];
            let ax: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            quad += x[i] * ax;
            lin += self.b[i] * x[i];
        }
        0.5 * quad - lin
    }

    fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.a_rows[i * d..(i + 1) * d];
            let ax: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            *o = ax - self.b[i];
        }
    }

    fn constants(&self) -> Constants {
        Constants {
            m: self.m,
            lipschitz: self.lipschitz,
            grad_bound: None,
        }
    }

    fn hessian(&self, _x: &[f64]) -> DMatrix<f64> {
        self.a.clone()
    }

    fn name(&self) -> &'static str {
        "quadratic"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{eval_grad, eval_value};

    #[test]
    fn value_examples() {
        let id = make_quadratic(QuadraticSpec::diagonal(&[1.0, 1.0])).unwrap();
        assert_eq!(eval_value(&id, &[2.0, 0.0]).unwrap(), 2.0);
        let q = make_quadratic(QuadraticSpec::diagonal(&[1.0, 4.0])).unwrap();
        assert_eq!(eval_value(&q, &[1.0, 1.0]).unwrap(), 2.5);
    }

    #[test]
    fn grad_examples() {
        let id = make_quadratic(QuadraticSpec::diagonal(&[1.0, 1.0])).unwrap();
        assert_eq!(eval_grad(&id, &[2.0, 0.0]).unwrap(), vec![2.0, 0.0]);
        let q = make_quadratic(QuadraticSpec::diagonal(&[1.0, 4.0])).unwrap();
        assert_eq!(eval_grad(&q, &[1.0, 1.0]).unwrap(), vec![1.0, 4.0]);
    }

    #[test]
    fn constants_from_spectrum() {
        let q = make_quadratic(QuadraticSpec::diagonal(&[1.0, 4.0])).unwrap();
        assert_eq!(q.constants().m, 1.0);
        assert_eq!(q.constants().lipschitz, 4.0);
        let id = make_quadratic(QuadraticSpec::diagonal(&[1.0, 1.0])).unwrap();
        assert_eq!((id.constants().m, id.constants().lipschitz), (1.0, 1.0));
    }

    #[test]
    fn constants_match_characteristic_polynomial() {
        // 2x2 symmetric [[p, r], [r, s]]: eigenvalues (p+s)/2 ± sqrt(((p-s)/2)^2 + r^2)
        let (p, r, s) = (3.0, 1.25, 1.5);
        let q = make_quadratic(QuadraticSpec {
            a: DMatrix::from_row_slice(2, 2, &[p, r, r, s]),
            b: DVector::from_vec(vec![1.0, 2.0]),
        })
        .unwrap();
        let mid = (p + s) / 2.0;
        let rad = (((p - s) / 2.0f64).powi(2) + r * r).sqrt();
        assert!((q.constants().m - (mid - rad)).abs() < 1e-10);
        assert!((q.constants().lipschitz - (mid + rad)).abs() < 1e-10);
        // minimizer solves A x = b
        let x = q.minimizer();
        assert!((p * x[0] + r * x[1] - 1.0).abs() < 1e-12);
        assert!((r * x[0] + s * x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        let neg = QuadraticSpec::diagonal(&[1.0, -0.5]);
        assert!(matches!(make_quadratic(neg), Err(Error::NotPositiveDefinite(_))));
        let asym = QuadraticSpec {
            a: DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]),
            b: DVector::zeros(2),
        };
        assert!(make_quadratic(asym).is_err());
    }
}
