use std::collections::HashMap;

use super::SampleCloud;
use crate::error::{Error, Result};

/// Largest tolerated fraction of sample mass outside the grid.
pub const MAX_LEAKAGE: f64 = 0.01;

const MAX_CELLS: usize = 1 << 24;

/// Regular axis-aligned grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub bins: Vec<usize>,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, bins: Vec<usize>) -> Result<Self> {
        let g = Self { lo, hi, bins };
        g.validate()?;
        Ok(g)
    }

    /// Same range and bin count on every axis.
    pub fn cube(d: usize, lo: f64, hi: f64, bins: usize) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d], vec![bins; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn cells(&self) -> usize {
        self.bins.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.lo.len();
        if d == 0 {
            return Err(Error::invalid("grid has no axes"));
        }
        if self.hi.len() != d || self.bins.len() != d {
            return Err(Error::invalid("grid bounds and bin counts disagree in length"));
        }
        for i in 0..d {
            if self.bins[i] == 0 || !(self.hi[i] > self.lo[i]) || !self.lo[i].is_finite() || !self.hi[i].is_finite() {
                return Err(Error::invalid(format!("axis {i} has zero-volume bins")));
            }
        }
        let cells = self
            .bins
            .iter()
            .try_fold(1usize, |acc, &b| acc.checked_mul(b))
            .filter(|&c| c <= MAX_CELLS);
        if cells.is_none() {
            return Err(Error::invalid("grid has too many cells"));
        }
        Ok(())
    }

    fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for i in 0..self.dim() {
            let t = (x[i] - self.lo[i]) / (self.hi[i] - self.lo[i]);
            if !(0.0..=1.0).contains(&t) {
                return None;
            }
            let b = ((t * self.bins[i] as f64) as usize).min(self.bins[i] - 1);
            idx = idx * self.bins[i] + b;
        }
        Some(idx)
    }

    fn center(&self, mut idx: usize, out: &mut [f64]) {
        for i in (0..self.dim()).rev() {
            let b = idx % self.bins[i];
            idx /= self.bins[i];
            let w = (self.hi[i] - self.lo[i]) / self.bins[i] as f64;
            out[i] = self.lo[i] + (b as f64 + 0.5) * w;
        }
    }
}

/// Histogram KL divergence `Σ_b p_b ln(p_b / q_b)` between the binned samples
/// `p` and the density `exp(log_u)` discretized at bin centres and
/// normalized over the grid `q`.
///
/// Samples outside the grid are dropped and `p` is renormalized over the
/// rest; more than [`MAX_LEAKAGE`] of the mass outside is an error.
pub fn kl_histogram(
    samples: &SampleCloud,
    log_u: impl Fn(&[f64]) -> f64,
    grid: &GridSpec,
) -> Result<f64> {
    grid.validate()?;
    if samples.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: samples.dim(),
        });
    }
    let mut p: HashMap<usize, f64> = HashMap::new();
    let mut inside = 0.0;
    for (x, w) in samples.points().iter().zip(samples.weights()) {
        if let Some(c) = grid.cell_of(x) {
            *p.entry(c).or_insert(0.0) += w;
            inside += w;
        }
    }
    let leakage = 1.0 - inside;
    if leakage > MAX_LEAKAGE {
        return Err(Error::Numerical(format!(
            "{:.2}% of the sample mass lies outside the grid",
            100.0 * leakage
        )));
    }

    let mut centre = vec![0.0; grid.dim()];
    let mut log_q = vec![0.0; grid.cells()];
    for (c, lq) in log_q.iter_mut().enumerate() {
        grid.center(c, &mut centre);
        *lq = log_u(&centre);
    }
    let top = log_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Numerical("log density is not finite on the grid".into()));
    }
    let log_z = top + log_q.iter().map(|l| (l - top).exp()).sum::<f64>().ln();

    let mut cells: Vec<(usize, f64)> = p.into_iter().collect();
    cells.sort_by_key(|(c, _)| *c);
    let kl = cells
        .iter()
        .map(|&(c, mass)| {
            let pb = mass / inside;
            pb * (pb.ln() - (log_q[c] - log_z))
        })
        .sum::<f64>();
    Ok(kl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn two_bin_example() {
        let s = SampleCloud::uniform(vec![vec![0.5], vec![1.5]]).unwrap();
        let g = GridSpec::cube(1, 0.0, 2.0, 2).unwrap();
        let kl = kl_histogram(&s, |x| if x[0] < 1.0 { 0.25f64.ln() } else { 0.75f64.ln() }, &g).unwrap();
        let expect = 0.5 * 2f64.ln() - 0.5 * 1.5f64.ln();
        assert!((kl - expect).abs() < 1e-12);
        assert!((kl - 0.1438).abs() < 1e-4);
    }

    #[test]
    fn exact_normal_samples() {
        let mut r = rng::stream(123, 0);
        let pts: Vec<Vec<f64>> = (0..100_000)
            .map(|_| vec![StandardNormal.sample(&mut r)])
            .collect();
        let s = SampleCloud::uniform(pts).unwrap();
        let g = GridSpec::cube(1, -6.0, 6.0, 64).unwrap();
        let kl = kl_histogram(&s, |x| -x[0] * x[0] / 2.0, &g).unwrap();
        assert!((0.0..=0.01).contains(&kl), "{kl}");
    }

    #[test]
    fn matching_discretized_density_gives_zero() {
        // weights placed at bin centres proportional to q
        let g = GridSpec::cube(2, -1.0, 1.0, 4).unwrap();
        let log_u = |x: &[f64]| -(x[0] * x[0] + 2.0 * x[1] * x[1]);
        let mut pts = Vec::new();
        let mut ws = Vec::new();
        let mut c = vec![0.0; 2];
        for i in 0..g.cells() {
            g.center(i, &mut c);
            pts.push(c.clone());
            ws.push(log_u(&c).exp());
        }
        let s = SampleCloud::weighted(pts, ws).unwrap();
        assert!(kl_histogram(&s, log_u, &g).unwrap().abs() < 1e-12);
    }

    #[test]
    fn leakage_above_threshold_is_an_error() {
        let mut pts: Vec<Vec<f64>> = (0..98).map(|i| vec![i as f64 / 100.0]).collect();
        pts.push(vec![5.0]);
        pts.push(vec![-5.0]);
        let s = SampleCloud::uniform(pts).unwrap();
        let g = GridSpec::cube(1, 0.0, 1.0, 10).unwrap();
        assert!(kl_histogram(&s, |_| 0.0, &g).is_err());
        let g = GridSpec::cube(1, -5.0, 5.0, 10).unwrap();
        assert!(kl_histogram(&s, |_| 0.0, &g).is_ok());
    }

    #[test]
    fn degenerate_grids_are_rejected() {
        assert!(GridSpec::cube(1, 1.0, 1.0, 4).is_err());
        assert!(GridSpec::cube(1, 0.0, 1.0, 0).is_err());
        assert!(GridSpec::new(vec![0.0], vec![1.0, 2.0], vec![2]).is_err());
        assert!(GridSpec::cube(8, 0.0, 1.0, 100).is_err());
    }

    #[test]
    fn kl_is_nonnegative_on_random_clouds() {
        let mut r = rng::stream(5, 0);
        let g = GridSpec::cube(2, -4.0, 4.0, 12).unwrap();
        for _ in 0..20 {
            let pts: Vec<Vec<f64>> = (0..500)
                .map(|_| {
                    let a: f64 = StandardNormal.sample(&mut r);
                    let b: f64 = StandardNormal.sample(&mut r);
                    vec![a * 0.7 + 0.3, b * 1.2]
                })
                .collect();
            let s = SampleCloud::uniform(pts).unwrap();
            let kl = kl_histogram(&s, |x| -(x[0] * x[0] + x[1] * x[1]) / 2.0, &g).unwrap();
            assert!(kl >= -1e-9);
        }
    }
}
