//! Exact optimal transport with squared Euclidean cost.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{GaussianMeasure, SampleCloud};
use crate::error::{Error, Result};
use crate::potentials::ParamVector;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_pair(a: &SampleCloud, b: &SampleCloud) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// W₂ between two clouds. Equal-size uniform clouds are solved as an
/// assignment problem; anything else goes through the transport LP.
pub fn w2_empirical(a: &SampleCloud, b: &SampleCloud) -> Result<f64> {
    check_pair(a, b)?;
    if a.is_uniform() && b.is_uniform() && a.len() == b.len() {
        w2_assignment(a.points(), b.points())
    } else {
        w2_transport_lp(a, b)
    }
}

/// W₂ between equal-size uniform clouds via the Hungarian method, O(N³).
///
/// The matched costs are summed in ascending order, so the result does not
/// depend on point order or argument order.
pub fn w2_assignment(a: &[ParamVector], b: &[ParamVector]) -> Result<f64> {
    let n = a.len();
    if n == 0 || b.is_empty() {
        return Err(Error::Empty("sample cloud"));
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let d = a[0].len();
    if let Some(p) = a.iter().chain(b).find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: p.len(),
        });
    }
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cost[i * n + j] = sq_dist(&a[i], &b[j]);
        }
    }
    let assign = hungarian(&cost, n);
    let mut matched: Vec<f64> = (0..n).map(|i| cost[i * n + assign[i]]).collect();
    matched.sort_by(f64::total_cmp);
    let total: f64 = matched.iter().sum();
    Ok((total / n as f64).max(0.0).sqrt())
}

/// Minimum-cost perfect matching on a dense `n × n` cost matrix; returns the
/// column assigned to each row.
fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|m| *m = inf);
        used.iter_mut().for_each(|u| *u = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    assign
}

struct Edge {
    to: usize,
    cap: f64,
    cost: f64,
}

/// W₂ between arbitrary weighted clouds by solving the transportation LP
/// as a min-cost flow (successive shortest paths).
pub fn w2_transport_lp(a: &SampleCloud, b: &SampleCloud) -> Result<f64> {
    check_pair(a, b)?;
    const EPS: f64 = 1e-14;
    let (n, m) = (a.len(), b.len());
    let src = 0;
    let sink = n + m + 1;
    let nodes = n + m + 2;
    let mut edges: Vec<Edge> = Vec::with_capacity(2 * (n * m + n + m));
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut add = |from: usize, to: usize, cap: f64, cost: f64, edges: &mut Vec<Edge>| {
        adj[from].push(edges.len());
        edges.push(Edge { to, cap, cost });
        adj[to].push(edges.len());
        edges.push(Edge {
            to: from,
            cap: 0.0,
            cost: -cost,
        });
    };
    for (i, w) in a.weights().iter().enumerate() {
        add(src, 1 + i, *w, 0.0, &mut edges);
    }
    for (j, w) in b.weights().iter().enumerate() {
        add(1 + n + j, sink, *w, 0.0, &mut edges);
    }
    for i in 0..n {
        for j in 0..m {
            let c = sq_dist(&a.points()[i], &b.points()[j]);
            add(1 + i, 1 + n + j, 2.0, c, &mut edges);
        }
    }

    let mut total_cost = 0.0;
    let mut flow = 0.0;
    let mut dist = vec![f64::INFINITY; nodes];
    let mut prev_edge = vec![usize::MAX; nodes];
    while flow < 1.0 - 1e-12 {
        // Bellman-Ford; reverse edges carry negative costs
        dist.iter_mut().for_each(|x| *x = f64::INFINITY);
        prev_edge.iter_mut().for_each(|x| *x = usize::MAX);
        dist[src] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if !dist[u].is_finite() {
                    continue;
                }
                for &e in &adj[u] {
                    let ed = &edges[e];
                    if ed.cap > EPS {
                        let nd = dist[u] + ed.cost;
                        if nd < dist[ed.to] - 1e-12 * (1.0 + nd.abs()) {
                            dist[ed.to] = nd;
                            prev_edge[ed.to] = e;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if !dist[sink].is_finite() {
            break;
        }
        let mut push = f64::INFINITY;
        let mut v = sink;
        while v != src {
            let e = prev_edge[v];
            push = push.min(edges[e].cap);
            v = edges[e ^ 1].to;
        }
        let mut v = sink;
        while v != src {
            let e = prev_edge[v];
            edges[e].cap -= push;
            edges[e ^ 1].cap += push;
            v = edges[e ^ 1].to;
        }
        flow += push;
        total_cost += push * dist[sink];
    }
    if flow < 1.0 - 1e-9 {
        return Err(Error::Numerical("transport LP did not route all mass".into()));
    }
    Ok(total_cost.max(0.0).sqrt())
}

pub(crate) fn check_psd(c: &DMatrix<f64>) -> Result<()> {
    let scale = c.amax().max(1.0);
    if (c - c.transpose()).amax() > 1e-10 * scale {
        return Err(Error::NotPositiveDefinite("covariance is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(c.clone());
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
        return Err(Error::NotPositiveDefinite(
            "covariance has a negative eigenvalue".into(),
        ));
    }
    Ok(())
}

fn sqrt_psd(c: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Closed-form W₂ between Gaussians (Bures–Wasserstein).
pub fn w2_gaussian(g1: &GaussianMeasure, g2: &GaussianMeasure) -> Result<f64> {
    if g1.mean.len() != g2.mean.len() {
        return Err(Error::DimensionMismatch {
            expected: g1.mean.len(),
            got: g2.mean.len(),
        });
    }
    check_psd(&g1.cov)?;
    check_psd(&g2.cov)?;
    let r2 = sqrt_psd(&g2.cov);
    let cross = sqrt_psd(&(&r2 * &g1.cov * &r2));
    let sq = (&g1.mean - &g2.mean).norm_squared() + g1.cov.trace() + g2.cov.trace()
        - 2.0 * cross.trace();
    Ok(sq.max(0.0).sqrt())
}
