//! Squared 2-Wasserstein distances between empirical measures.

use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::cloud::{DistributionSpec, ParticleCloud};
use crate::error::{invalid, Error, Result};

/// Largest cloud accepted by [`w2_exact_assignment`].
pub const ASSIGNMENT_LIMIT: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum TransportMethod {
    Quantile1d,
    ExactAssignment,
    Sinkhorn { epsilon: f64, iterations: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransportPlanResult {
    /// Squared distance (debiased entropic cost for Sinkhorn).
    pub cost: f64,
    pub method: TransportMethod,
    /// L1 violation of the row marginal at termination.
    pub marginal_violation: f64,
    pub converged: bool,
}

fn sorted(a: &[f64]) -> Vec<f64> {
    let mut v = a.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `W₂²` between two one-dimensional samples by monotone rearrangement.
/// Unequal sizes are handled by integrating the quantile functions over
/// the merged breakpoints.
pub fn w2_1d_exact(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("w2_1d_exact needs two nonempty samples"));
    }
    let (a, b) = (sorted(a), sorted(b));
    if a.len() == b.len() {
        return Ok(a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64);
    }
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut s = 0.0;
    let mut total = 0.0;
    while i < na && j < nb {
        let next_a = (i + 1) as f64 / na as f64;
        let next_b = (j + 1) as f64 / nb as f64;
        let next = next_a.min(next_b);
        total += (next - s) * (a[i] - b[j]) * (a[i] - b[j]);
        s = next;
        if next_a <= next {
            i += 1;
        }
        if next_b <= next {
            j += 1;
        }
    }
    Ok(total)
}

/// `W₂²(m_X, law)` for a one-dimensional sample against a continuous law,
/// integrating `(x_(i) − Q(s))²` exactly over each quantile cell.
pub fn w2_1d_to_law(sample: &[f64], law: &DistributionSpec) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Empty("w2_1d_to_law needs a nonempty sample"));
    }
    if law.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: law.dim() });
    }
    law.validate()?;
    let x = sorted(sample);
    let n = x.len();
    // For each cell [s_{i-1}, s_i]: ∫Q ds and ∫Q² ds.
    let cell_moments: Box<dyn Fn(usize) -> (f64, f64)> = match law {
        DistributionSpec::Gaussian { mean, variance } => {
            let normal = Normal::standard();
            let (mu, sd) = (mean[0], variance.sqrt());
            // ∫ z φ(z) dz = −φ(z) and ∫ z² φ(z) dz = Φ(z) − zφ(z).
            let mut first = Vec::with_capacity(n + 1);
            let mut second = Vec::with_capacity(n + 1);
            for i in 0..=n {
                let z = normal.inverse_cdf(i as f64 / n as f64);
                if z.is_finite() {
                    first.push(-normal.pdf(z));
                    second.push(normal.cdf(z) - z * normal.pdf(z));
                } else {
                    first.push(0.0);
                    second.push(if z > 0.0 { 1.0 } else { 0.0 });
                }
            }
            let w = 1.0 / n as f64;
            Box::new(move |i: usize| {
                let e1 = first[i + 1] - first[i];
                let e2 = second[i + 1] - second[i];
                (mu * w + sd * e1, mu * mu * w + 2.0 * mu * sd * e1 + sd * sd * e2)
            })
        }
        DistributionSpec::Uniform { low, high, .. } => {
            let (a, b) = (*low, *high);
            Box::new(move |i: usize| {
                let q = |s: f64| a + (b - a) * s;
                let (s0, s1) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
                let (q0, q1) = (q(s0), q(s1));
                let w = s1 - s0;
                (w * 0.5 * (q0 + q1), w * (q0 * q0 + q0 * q1 + q1 * q1) / 3.0)
            })
        }
        DistributionSpec::Grid(g) => {
            let g = g.clone();
            Box::new(move |i: usize| {
                // Gauss–Legendre on the quantile cell; Q is piecewise linear.
                const NODES: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
                const WEIGHTS: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
                let (s0, s1) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
                let sub = 8;
                let mut m1 = 0.0;
                let mut m2 = 0.0;
                for j in 0..sub {
                    let a = s0 + (s1 - s0) * j as f64 / sub as f64;
                    let b = s0 + (s1 - s0) * (j + 1) as f64 / sub as f64;
                    for (t, w) in NODES.iter().zip(WEIGHTS) {
                        let q = g.inverse_cdf(0.5 * (a + b) + 0.5 * (b - a) * t);
                        m1 += 0.5 * (b - a) * w * q;
                        m2 += 0.5 * (b - a) * w * q * q;
                    }
                }
                (m1, m2)
            })
        }
    };
    let w = 1.0 / n as f64;
    let total: f64 = x
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let (e1, e2) = cell_moments(i);
            xi * xi * w - 2.0 * xi * e1 + e2
        })
        .sum();
    Ok(total.max(0.0))
}

fn check_pair(a: &ParticleCloud, b: &ParticleCloud) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(())
}

use crate::measure::Measure;

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Exact `W₂²` between equal-size clouds: `(1/n) min_π Σ |x_{π(i)} − y_i|²`.
pub fn w2_exact_assignment(a: &ParticleCloud, b: &ParticleCloud) -> Result<f64> {
    check_pair(a, b)?;
    if a.n() != b.n() {
        return Err(invalid("clouds", format!("sizes differ: {} vs {}", a.n(), b.n())));
    }
    let n = a.n();
    if n > ASSIGNMENT_LIMIT {
        return Err(Error::TooLarge { size: n, limit: ASSIGNMENT_LIMIT });
    }
    let cost: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| sq_dist(a.particle(i), b.particle(j))).collect();
    let assignment = hungarian(n, &cost);
    Ok(assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>() / n as f64)
}

/// Minimum-cost perfect matching on a dense `n × n` cost matrix (row-major).
/// Returns the column assigned to each row. Shortest augmenting paths with
/// row and column potentials, `O(n³)`.
pub fn hungarian(n: usize, cost: &[f64]) -> Vec<usize> {
    const NONE: usize = usize::MAX;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j]: row matched to column j (1-based, 0 = none).
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = NONE;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
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
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}
