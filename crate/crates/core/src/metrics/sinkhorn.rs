//! Debiased entropic optimal transport between uniform clouds.

use crate::cloud::ParticleCloud;
use crate::error::{invalid, Error, Result};

use super::transport::{TransportMethod, TransportPlanResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    /// Final regularization as a fraction of the median pairwise cost.
    pub relative_epsilon: f64,
    /// Stop when the L1 row-marginal violation drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Start annealing at this multiple of the final epsilon.
    pub anneal_from: f64,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self { relative_epsilon: 0.01, tolerance: 5e-7, max_iterations: 100_000, anneal_from: 10.0 }
    }
}

struct Problem {
    cost: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Problem {
    fn new(a: &ParticleCloud, b: &ParticleCloud) -> Self {
        let (rows, cols) = (a.n(), b.n());
        let mut cost = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            let x = a.particle(i);
            for j in 0..cols {
                cost.push(x.iter().zip(b.particle(j)).map(|(p, q)| (p - q) * (p - q)).sum());
            }
        }
        Self { cost, rows, cols }
    }

    fn c(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.cols + j]
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

struct Solve {
    value: f64,
    violation: f64,
    iterations: usize,
    converged: bool,
}

fn solve(p: &Problem, eps_final: f64, opts: &SinkhornOptions) -> Solve {
    let log_a = -(p.rows as f64).ln();
    let log_b = -(p.cols as f64).ln();
    let mut f = vec![0.0; p.rows];
    let mut g = vec![0.0; p.cols];
    let mut eps = eps_final * opts.anneal_from.max(1.0);
    let mut iterations = 0;
    let mut violation = f64::INFINITY;
    loop {
        let last = eps <= eps_final;
        let budget = if last { opts.max_iterations } else { 200 };
        for _ in 0..budget {
            for j in 0..p.cols {
                g[j] = -eps * log_sum_exp((0..p.rows).map(|i| log_a + (f[i] - p.c(i, j)) / eps));
            }
            for i in 0..p.rows {
                f[i] = -eps * log_sum_exp((0..p.cols).map(|j| log_b + (g[j] - p.c(i, j)) / eps));
            }
            iterations += 1;
            // f was updated last, so rows are exact; measure the columns.
            violation = (0..p.cols)
                .map(|j| {
                    let col: f64 = (0..p.rows).map(|i| (log_a + log_b + (f[i] + g[j] - p.c(i, j)) / eps).exp()).sum();
                    (col - log_b.exp()).abs()
                })
                .sum();
            if violation < opts.tolerance {
                break;
            }
        }
        if last {
            break;
        }
        eps = (eps * 0.5).max(eps_final);
    }
    let value = f.iter().sum::<f64>() / p.rows as f64 + g.iter().sum::<f64>() / p.cols as f64;
    Solve { value, violation, iterations, converged: violation < opts.tolerance }
}

/// `OT_ε(a, a)` with the averaged fixed-point update `f ← ½(f + T f)`,
/// which avoids the oscillation of alternating updates on a symmetric
/// problem.
fn solve_symmetric(p: &Problem, eps_final: f64, opts: &SinkhornOptions) -> Solve {
    let n = p.rows;
    let log_a = -(n as f64).ln();
    let mut f = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut eps = eps_final * opts.anneal_from.max(1.0);
    let mut iterations = 0;
    let mut violation = f64::INFINITY;
    loop {
        let last = eps <= eps_final;
        let budget = if last { opts.max_iterations } else { 200 };
        for _ in 0..budget {
            for i in 0..n {
                let t = -eps * log_sum_exp((0..n).map(|j| log_a + (f[j] - p.c(i, j)) / eps));
                next[i] = 0.5 * (f[i] + t);
            }
            std::mem::swap(&mut f, &mut next);
            iterations += 1;
            violation = (0..n)
                .map(|i| {
                    let row: f64 = (0..n).map(|j| (2.0 * log_a + (f[i] + f[j] - p.c(i, j)) / eps).exp()).sum();
                    (row - log_a.exp()).abs()
                })
                .sum();
            if violation < opts.tolerance {
                break;
            }
        }
        if last {
            break;
        }
        eps = (eps * 0.5).max(eps_final);
    }
    Solve { value: 2.0 * f.iter().sum::<f64>() / n as f64, violation, iterations, converged: violation < opts.tolerance }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// Debiased Sinkhorn divergence `OT_ε(a,b) − ½OT_ε(a,a) − ½OT_ε(b,b)` with
/// squared Euclidean cost, used as a proxy for `W₂²` in higher dimension.
pub fn w2_sinkhorn(a: &ParticleCloud, b: &ParticleCloud, opts: &SinkhornOptions) -> Result<TransportPlanResult> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    if !(opts.relative_epsilon > 0.0) || !(opts.tolerance > 0.0) || opts.max_iterations == 0 {
        return Err(invalid("sinkhorn options", "epsilon, tolerance and iteration budget must be positive"));
    }
    let cross = Problem::new(a, b);
    let scale = median(cross.cost.clone());
    if !(scale > 0.0) {
        return Ok(TransportPlanResult {
            cost: 0.0,
            method: TransportMethod::Sinkhorn { epsilon: 0.0, iterations: 0 },
            marginal_violation: 0.0,
            converged: true,
        });
    }
    let eps = opts.relative_epsilon * scale;
    let ab = solve(&cross, eps, opts);
    let aa = solve_symmetric(&Problem::new(a, a), eps, opts);
    let bb = solve_symmetric(&Problem::new(b, b), eps, opts);
    Ok(TransportPlanResult {
        cost: (ab.value - 0.5 * aa.value - 0.5 * bb.value).max(0.0),
        method: TransportMethod::Sinkhorn { epsilon: eps, iterations: ab.iterations },
        marginal_violation: ab.violation,
        converged: ab.converged && aa.converged && bb.converged,
    })
}

use crate::measure::Measure;
