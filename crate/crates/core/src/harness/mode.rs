use crate::error::{check_dim, Error, Result};
use crate::potentials::{norm, ParamVector, Potential};

#[derive(Clone, Debug, PartialEq)]
pub struct ModeSearch {
    pub x: ParamVector,
    pub grad_norm: f64,
    pub iters: u64,
    /// `‖∇U(x)‖ ≤ tol` was reached.
    pub converged: bool,
}

/// Full-gradient descent with Armijo backtracking from `x0` until
/// `‖∇U‖ ≤ tol`. Running out of iterations, or a line search that can no
/// longer make progress, returns the last iterate with `converged = false`.
pub fn find_mode(p: &dyn Potential, x0: &[f64], tol: f64, max_iters: u64) -> Result<ModeSearch> {
    check_dim(p.dim(), x0.len())?;
    if !(tol > 0.0) {
        return Err(Error::invalid("mode tolerance must be positive"));
    }
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; d];
    let mut trial = vec![0.0; d];
    let mut g_trial = vec![0.0; d];
    let mut fx = p.value(&x);
    p.grad_into(&x, &mut g);
    let mut step = 1.0 / p.constants().lipschitz.max(1e-12);
    let mut iters = 0;
    loop {
        let gn = norm(&g);
        if !gn.is_finite() || !fx.is_finite() {
            return Err(Error::Numerical("mode search diverged".into()));
        }
        if gn <= tol || iters >= max_iters {
            return Ok(ModeSearch {
                x,
                grad_norm: gn,
                iters,
                converged: gn <= tol,
            });
        }
        let mut moved = false;
        while step > 1e-300 {
            for i in 0..d {
                trial[i] = x[i] - step * g[i];
            }
            let ft = p.value(&trial);
            let armijo = ft <= fx - 0.5 * step * gn * gn;
            // near the minimum value differences drown in roundoff; fall
            // back to requiring a smaller gradient
            let flat = (ft - fx).abs() <= 64.0 * f64::EPSILON * fx.abs().max(1.0);
            if armijo || flat {
                p.grad_into(&trial, &mut g_trial);
                if armijo || norm(&g_trial) < gn {
                    moved = trial != x;
                    std::mem::swap(&mut x, &mut trial);
                    std::mem::swap(&mut g, &mut g_trial);
                    fx = ft;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            return Ok(ModeSearch {
                x,
                grad_norm: gn,
                iters,
                converged: false,
            });
        }
        step *= 2.0;
        iters += 1;
    }
}
