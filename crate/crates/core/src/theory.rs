//! Step-size and iteration-count prescriptions for delayed Langevin
//! sampling, the finite-horizon KL bound, and the delay bias bound.
//!
//! The gradient bound `G` is used as a cap on the second moment
//! `E‖∇U‖² ≤ G²`.

use crate::error::{Error, Result};
use crate::langevin::StepSchedule;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryParams {
    pub m: f64,
    pub l: f64,
    pub d: f64,
    pub sigma: f64,
    pub g: f64,
    pub tau: u32,
    pub eps: f64,
    /// Initial distance `W₂(μ₀, π)`.
    pub w2_0: f64,
}

impl TheoryParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("m", self.m),
            ("L", self.l),
            ("d", self.d),
            ("sigma", self.sigma),
            ("G", self.g),
            ("eps", self.eps),
        ];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive and finite")));
            }
        }
        if !(self.w2_0 >= 0.0) || !self.w2_0.is_finite() {
            return Err(Error::invalid("W2_0 must be nonnegative and finite"));
        }
        if self.m > self.l {
            return Err(Error::invalid("m must not exceed L"));
        }
        Ok(())
    }
}

/// The six step-size candidates and the prescribed step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaEps {
    pub gamma: f64,
    /// `γ¹ … γ⁶`; `γ³` is infinite when `τ = 0`.
    pub components: [f64; 6],
}

impl GammaEps {
    pub fn min_component(&self) -> f64 {
        self.components.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn components(tp: &TheoryParams) -> [f64; 6] {
    let TheoryParams {
        m, l, d, sigma, g, eps, ..
    } = *tp;
    let tau = tp.tau as f64;
    let g1 = eps / (l * d + l * l * tau * tau * sigma);
    let g2 = eps.sqrt() / ((l + l * l + tau * tau * l * l) * g * g);
    let g3 = if tp.tau == 0 {
        f64::INFINITY
    } else {
        eps.sqrt() * m / (l * tau * g)
    };
    let g4 = eps.powf(2.0 / 3.0)
        / (2.0 * sigma / (1.65 * l + sigma.sqrt() * m.sqrt())
            + 1.65 * (l / m)
            + tau * l * sigma.sqrt() / m);
    let g5 = l * l / (l * l + l.powi(4));
    let g6 = 1.0 / 12.0;
    [g1, g2, g3, g4, g5, g6]
}

/// Largest step for the averaged-measure KL guarantee: `min γⁱ / 4`.
pub fn gamma_eps_kl(tp: &TheoryParams) -> Result<GammaEps> {
    tp.validate()?;
    let c = components(tp);
    let min = c.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(GammaEps {
        gamma: min / 4.0,
        components: c,
    })
}

/// Iterations for the KL guarantee: `2·max(⌈W₂₀² / (γε)⌉, τ)`.
pub fn n_eps_kl(tp: &TheoryParams, gamma: f64) -> Result<u64> {
    tp.validate()?;
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma must be positive"));
    }
    let first = (tp.w2_0 * tp.w2_0 / (gamma * tp.eps)).ceil();
    Ok(2 * sat_u64(first).max(tp.tau as u64))
}

/// Largest step for the W₂ guarantee: `m · min γⁱ / 8`.
pub fn gamma_eps_w2(tp: &TheoryParams) -> Result<f64> {
    let kl = gamma_eps_kl(tp)?;
    Ok(tp.m * kl.min_component() / 8.0)
}

/// Iterations for the W₂ guarantee:
/// `2·max(⌈ln(4W₂₀²/ε) / (γm)⌉, ⌈ln τ⌉)`, both arguments clamped at 0.
pub fn n_eps_w2(tp: &TheoryParams, gamma: f64) -> Result<u64> {
    tp.validate()?;
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma must be positive"));
    }
    let first = ((4.0 * tp.w2_0 * tp.w2_0 / tp.eps).ln() / (gamma * tp.m)).ceil();
    let second = if tp.tau == 0 {
        0.0
    } else {
        (tp.tau as f64).ln().ceil()
    };
    Ok(2 * sat_u64(first).max(sat_u64(second)))
}

fn sat_u64(v: f64) -> u64 {
    if v.is_nan() || v <= 0.0 {
        0
    } else if v >= u64::MAX as f64 {
        u64::MAX / 2
    } else {
        v as u64
    }
}

/// Bias introduced by gradients delayed by at most `τ`: `Lτ(γG + √(γσ))`.
pub fn bias_bound(l: f64, tau: u32, gamma: f64, g: f64, sigma: f64) -> f64 {
    l * tau as f64 * (gamma * g + (gamma * sigma).sqrt())
}

/// Right-hand side of the finite-horizon KL bound, term by term; every
/// term is already divided by `Λ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundBreakdown {
    pub transient: f64,
    pub discretization: f64,
    pub delay: f64,
    pub s_dist: f64,
    pub gradient: f64,
    pub total: f64,
}

/// Evaluates the bound for the window `k = N+1 … N+n`.
///
/// `grad_sq` and `s_dist` are indexed by `k = N+1−τ … N+n` (length
/// `n + τ`). Gradient second moments are capped at `G²`. Indices `k < 1`
/// have no step size and are skipped.
pub fn theorem_bound_rhs(
    s: &StepSchedule,
    tp: &TheoryParams,
    big_n: u64,
    n: u64,
    w2_n: f64,
    grad_sq: &[f64],
    s_dist: &[f64],
) -> Result<BoundBreakdown> {
    tp.validate()?;
    if n == 0 {
        return Err(Error::invalid("window length n must be at least 1"));
    }
    let tau = tp.tau as u64;
    let expected = (n + tau) as usize;
    for (name, seq) in [("grad_sq", grad_sq), ("s_dist", s_dist)] {
        if seq.len() != expected {
            return Err(Error::invalid(format!(
                "{name} has {} entries, expected n + tau = {expected}",
                seq.len()
            )));
        }
        if seq.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid(format!("{name} must be nonnegative")));
        }
    }
    let (l, m) = (tp.l, tp.m);
    let tau_f = tp.tau as f64;
    // position of index k in the input sequences
    let first = big_n as i64 + 1 - tau as i64;
    let at = |seq: &[f64], k: i64| seq[(k - first) as usize];
    let poly = |g: f64| l * l / 4.0 + 2.0 * g * l * l + g * g * (l * l + l.powi(4));

    let lambda_sum: f64 = (big_n + 1..=big_n + n).map(|k| s.lambda_at(k)).sum();
    let (g1, l1) = (s.gamma_at(big_n + 1), s.lambda_at(big_n + 1));
    let transient = l1 * (1.0 - m * g1) * w2_n * w2_n / (2.0 * g1 * lambda_sum);

    let discretization = (big_n + 1..=big_n + n)
        .map(|k| s.gamma_at(k) * s.lambda_at(k) * l * tp.d)
        .sum::<f64>()
        / lambda_sum;

    let delay = (first.max(1)..=(big_n + n) as i64)
        .map(|k| {
            let (g, lam) = (s.gamma_at(k as u64), s.lambda_at(k as u64));
            2.0 * g * lam * tau_f * tau_f * tp.sigma * poly(g)
        })
        .sum::<f64>()
        / lambda_sum;

    let s_term = (big_n as i64 + 1..=(big_n + n) as i64)
        .map(|k| at(s_dist, k))
        .sum::<f64>()
        / lambda_sum;

    let cap = tp.g * tp.g;
    let gradient = (first.max(1)..(big_n + n) as i64)
        .map(|k| {
            let g = s.gamma_at(k as u64);
            g * g * (l / 2.0 + l * l / 2.0 + tau_f * tau_f * poly(g)) * at(grad_sq, k).min(cap)
        })
        .sum::<f64>()
        / lambda_sum;

    Ok(BoundBreakdown {
        transient,
        discretization,
        delay,
        s_dist: s_term,
        gradient,
        total: transient + discretization + delay + s_term + gradient,
    })
}

/// Labeled rows for both guarantees: the six components, the two step
/// sizes and the two iteration counts.
pub fn theory_table(tp: &TheoryParams) -> Result<Vec<(&'static str, f64)>> {
    let kl = gamma_eps_kl(tp)?;
    let w2 = gamma_eps_w2(tp)?;
    let labels = ["gamma1", "gamma2", "gamma3", "gamma4", "gamma5", "gamma6"];
    let mut rows: Vec<(&'static str, f64)> = labels.iter().copied().zip(kl.components).collect();
    rows.push(("gamma_eps_kl", kl.gamma));
    rows.push(("n_eps_kl", n_eps_kl(tp, kl.gamma)? as f64));
    rows.push(("gamma_eps_w2", w2));
    rows.push(("n_eps_w2", n_eps_w2(tp, w2)? as f64));
    Ok(rows)
}
