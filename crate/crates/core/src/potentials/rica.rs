//! Reconstruction ICA objective.
//!
//! For a square filter matrix `W` (p×p, flattened row-major into the
//! parameter vector) and inputs `x`, the per-sample objective is
//! `λ‖Wx‖₁ + ½‖WᵀWx − x‖²`, averaged over samples. The ℓ₁ subgradient uses
//! `sign(0) = 0`. The objective is not convex, so `m = 0`.

use nalgebra::DMatrix;
use rand::seq::index;

use super::{dist, Constants, Potential};
use crate::error::{Error, Result};
use crate::rng::{self, RngStream};

pub const DEFAULT_RICA_LAMBDA: f64 = 0.4;

#[derive(Clone, Debug)]
pub struct RicaSpec {
    pub lambda: f64,
    /// One input vector per row.
    pub data: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct RicaPotential {
    lambda: f64,
    p: usize,
    n: usize,
    // row-major samples
    rows: Vec<f64>,
    lipschitz: f64,
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn make_rica(spec: RicaSpec) -> Result<RicaPotential> {
    if spec.data.nrows() == 0 || spec.data.ncols() == 0 {
        return Err(Error::Empty("RICA data matrix"));
    }
    if !(spec.lambda > 0.0) {
        return Err(Error::invalid("RICA lambda must be positive"));
    }
    let (n, p) = spec.data.shape();
    let rows = (0..n)
        .flat_map(|i| (0..p).map(move |j| (i, j)))
        .map(|(i, j)| spec.data[(i, j)])
        .collect();
    let mut pot = RicaPotential {
        lambda: spec.lambda,
        p,
        n,
        rows,
        lipschitz: 1.0,
    };
    pot.lipschitz = pot.local_lipschitz_estimate();
    Ok(pot)
}

impl RicaPotential {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Side length of `W`.
    pub fn features(&self) -> usize {
        self.p
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    fn sample(&self, i: usize) -> &[f64] {
        &self.rows[i * self.p..(i + 1) * self.p]
    }

    fn sample_value(&self, w: &[f64], x: &[f64], h: &mut [f64], r: &mut [f64]) -> f64 {
        let p = self.p;
        for a in 0..p {
            h[a] = (0..p).map(|b| w[a * p + b] * x[b]).sum();
        }
        for b in 0..p {
            r[b] = (0..p).map(|a| w[a * p + b] * h[a]).sum::<f64>() - x[b];
        }
        let l1: f64 = h.iter().map(|v| v.abs()).sum();
        self.lambda * l1 + 0.5 * r.iter().map(|v| v * v).sum::<f64>()
    }

    fn accumulate_grad(&self, w: &[f64], x: &[f64], out: &mut [f64], scratch: &mut Scratch) {
        let p = self.p;
        let Scratch { h, r, wr } = scratch;
        self.sample_value(w, x, h, r);
        for a in 0..p {
            wr[a] = (0..p).map(|b| w[a * p + b] * r[b]).sum();
        }
        for a in 0..p {
            let sa = self.lambda * sign0(h[a]) + wr[a];
            for b in 0..p {
                out[a * p + b] += h[a] * r[b] + sa * x[b];
            }
        }
    }

    // Largest gradient-difference ratio over a fixed set of pairs in the unit
    // ball; the objective is quartic, so no global constant exists.
    fn local_lipschitz_estimate(&self) -> f64 {
        use rand_distr::{Distribution, StandardNormal};
        let d = self.p * self.p;
        let mut r = rng::stream(0x5eed, 0);
        let mut best: f64 = 0.0;
        let (mut ga, mut gb) = (vec![0.0; d], vec![0.0; d]);
        for _ in 0..16 {
            let mut a: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
            let scale = 1.0 / super::norm(&a).max(1e-12);
            a.iter_mut().for_each(|v| *v *= scale);
            let b: Vec<f64> = a
                .iter()
                .map(|v| {
                    let e: f64 = StandardNormal.sample(&mut r);
                    v + 1e-3 * e
                })
                .collect();
            self.grad_into(&a, &mut ga);
            self.grad_into(&b, &mut gb);
            best = best.max(dist(&ga, &gb) / dist(&a, &b));
        }
        best.max(f64::MIN_POSITIVE)
    }
}

struct Scratch {
    h: Vec<f64>,
    r: Vec<f64>,
    wr: Vec<f64>,
}

impl Scratch {
    fn new(p: usize) -> Self {
        Self {
            h: vec![0.0; p],
            r: vec![0.0; p],
            wr: vec![0.0; p],
        }
    }
}

impl Potential for RicaPotential {
    fn dim(&self) -> usize {
        self.p * self.p
    }

    fn value(&self, w: &[f64]) -> f64 {
        let (mut h, mut r) = (vec![0.0; self.p], vec![0.0; self.p]);
        let total: f64 = (0..self.n)
            .map(|i| self.sample_value(w, self.sample(i), &mut h, &mut r))
            .sum();
        total / self.n as f64
    }

    fn grad_into(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut s = Scratch::new(self.p);
        for i in 0..self.n {
            self.accumulate_grad(w, self.sample(i), out, &mut s);
        }
        let inv = 1.0 / self.n as f64;
        out.iter_mut().for_each(|o| *o *= inv);
    }

    fn stoch_grad_into(
        &self,
        w: &[f64],
        batch: super::BatchSpec,
        rng: &mut RngStream,
        out: &mut [f64],
    ) {
        let k = match batch {
            super::BatchSpec::Minibatch(k) if k < self.n => k,
            _ => return self.grad_into(w, out),
        };
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut s = Scratch::new(self.p);
        for i in index::sample(rng, self.n, k) {
            self.accumulate_grad(w, self.sample(i), out, &mut s);
        }
        let inv = 1.0 / k as f64;
        out.iter_mut().for_each(|o| *o *= inv);
    }

    fn constants(&self) -> Constants {
        Constants {
            m: 0.0,
            lipschitz: self.lipschitz,
            grad_bound: None,
        }
    }

    fn name(&self) -> &'static str {
        "rica"
    }
}
