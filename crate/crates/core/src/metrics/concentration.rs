//! Sample-size rates: empirical W₂, mean-field fluctuations and the
//! leave-one-out bound.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::cloud::{sample_cloud_from, DistributionSpec, ParticleCloud};
use crate::error::{invalid, Error, Result};
use crate::fit::{bootstrap_interval, fit_power_law, resample_indices, BOOTSTRAP_RESAMPLES};
use crate::functionals::{CompositeExpectation, MeanFieldFunctional};
use crate::measure::Measure;
use crate::rng;

use super::sinkhorn::{w2_sinkhorn, SinkhornOptions};
use super::transport::w2_1d_to_law;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub mean_value: f64,
    pub stderr: f64,
    pub replicas: usize,
}

/// Per-`n` means of a replicated statistic with a fitted log-log slope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub slope: f64,
    pub prefactor: f64,
    /// 95% percentile bootstrap interval of the slope, resampling replicas
    /// independently at each `n`.
    pub slope_interval: (f64, f64),
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
}

impl RateReport {
    /// Builds the report from `samples[k][r]`, the value of replica `r` at
    /// `n_list[k]`.
    pub fn from_samples(n_list: &[usize], samples: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        if n_list.len() != samples.len() {
            return Err(Error::DimensionMismatch { expected: n_list.len(), got: samples.len() });
        }
        if samples.iter().any(|s| s.len() < 2) {
            return Err(invalid("replicas", "need at least two per sample size"));
        }
        let rows: Vec<RateRow> = n_list
            .iter()
            .zip(&samples)
            .map(|(&n, s)| {
                let (mean, stderr) = mean_stderr(s);
                RateRow { n, mean_value: mean, stderr, replicas: s.len() }
            })
            .collect();
        let x: Vec<f64> = n_list.iter().map(|&n| n as f64).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.mean_value).collect();
        let fit = fit_power_law(&x, &y)?;
        let slope_interval = bootstrap_interval(BOOTSTRAP_RESAMPLES, 0.95, seed, |rng| {
            let means: Vec<f64> = samples
                .iter()
                .map(|s| resample_indices(rng, s.len()).iter().map(|&i| s[i]).sum::<f64>() / s.len() as f64)
                .collect();
            fit_power_law(&x, &means).ok().map(|f| f.exponent)
        })?;
        Ok(Self { rows, slope: fit.exponent, prefactor: fit.prefactor, slope_interval, samples })
    }

    /// `n,mean_value,stderr,replicas`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// True when row means never increase with `n`, allowing overlap of
    /// one combined standard error.
    pub fn monotone_within_error(&self) -> bool {
        self.rows.windows(2).all(|p| {
            p[1].mean_value <= p[0].mean_value + (p[0].stderr.powi(2) + p[1].stderr.powi(2)).sqrt()
        })
    }
}

pub(crate) fn mean_stderr(s: &[f64]) -> (f64, f64) {
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    if s.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_n_list(n_list: &[usize], replicas: usize) -> Result<()> {
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(invalid("n_list", "need positive sample sizes"));
    }
    if replicas < 2 {
        return Err(invalid("replicas", "need at least two"));
    }
    Ok(())
}

/// `E W₂²(m_X, m)` over replicas for each `n`. In 1D the distance to the
/// law is exact; in `d ∈ {2, 3}` the debiased Sinkhorn cost against an
/// independent reference sample of the same size is used instead.
pub fn empirical_w2_rate(spec: &DistributionSpec, n_list: &[usize], replicas: usize, seed: u64) -> Result<RateReport> {
    check_n_list(n_list, replicas)?;
    spec.validate()?;
    let d = spec.dim();
    if d > 3 {
        return Err(invalid("dimension", "empirical W₂ rates are supported for d ≤ 3"));
    }
    let samples = n_list
        .iter()
        .map(|&n| {
            (0..replicas)
                .into_par_iter()
                .map(|r| {
                    let x = sample_cloud_from(spec, n, seed, rng::INIT, r as u64)?;
                    if d == 1 {
                        w2_1d_to_law(x.positions(), spec)
                    } else {
                        let y = sample_cloud_from(spec, n, seed, rng::REFERENCE_INIT, r as u64)?;
                        Ok(w2_sinkhorn(&x, &y, &SinkhornOptions::default())?.cost)
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    RateReport::from_samples(n_list, samples, seed)
}

/// A real-valued functional of a measure with a declared bound on the
/// centered linear derivative.
pub trait Observable: Sync {
    fn eval(&self, m: &dyn Measure) -> f64;
    /// `sup_{m,x} |δG/δm(m, x)|`, centered.
    fn linear_bound(&self) -> f64;
}

/// `G = F`.
pub struct FunctionalValue<'a>(pub &'a dyn MeanFieldFunctional);

impl Observable for FunctionalValue<'_> {
    fn eval(&self, m: &dyn Measure) -> f64 {
        self.0.value(m)
    }
    fn linear_bound(&self) -> f64 {
        self.0.linear_bound()
    }
}

/// `G(m) = D_mF(m, x₀)_c` for a composite functional.
pub struct IntrinsicAt<'a> {
    functional: &'a CompositeExpectation,
    point: Vec<f64>,
    component: usize,
    // ∇φ_j(x₀)_c for each feature j.
    coefficients: Vec<f64>,
}

impl<'a> IntrinsicAt<'a> {
    pub fn new(functional: &'a CompositeExpectation, point: Vec<f64>, component: usize) -> Result<Self> {
        let d = functional.dim();
        if point.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: point.len() });
        }
        if component >= d {
            return Err(Error::IndexOutOfRange { index: component, len: d });
        }
        let features = functional.features();
        let k = features.dim_out();
        let mut e = vec![0.0; k];
        let mut g = vec![0.0; d];
        let coefficients = (0..k)
            .map(|j| {
                e.fill(0.0);
                e[j] = 1.0;
                features.jacobian_t(&point, &e, &mut g);
                g[component]
            })
            .collect();
        Ok(Self { functional, point, component, coefficients })
    }
}

impl Observable for IntrinsicAt<'_> {
    fn eval(&self, m: &dyn Measure) -> f64 {
        let mut out = vec![0.0; self.functional.dim()];
        self.functional.freeze(m).gradient(&self.point, &mut out);
        out[self.component]
    }
    fn linear_bound(&self) -> f64 {
        // δG/δm(m, y) = κ Σ_j a_j φ_j(y); centering at most doubles it.
        let a: f64 = self.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
        2.0 * self.functional.outer().curvature * a * self.functional.features().sup_norm()
    }
}

/// `E |G(m) − G(m_X)|²` over replicas for each `n`, with `G(m)` supplied by
/// the caller (for instance by quadrature on a fine grid).
pub fn mean_field_fluctuation(
    observable: &dyn Observable,
    law: &DistributionSpec,
    exact: f64,
    n_list: &[usize],
    replicas: usize,
    seed: u64,
) -> Result<RateReport> {
    check_n_list(n_list, replicas)?;
    law.validate()?;
    let samples = n_list
        .iter()
        .map(|&n| {
            (0..replicas)
                .into_par_iter()
                .map(|r| {
                    let x = sample_cloud_from(law, n, seed, rng::INIT, r as u64)?;
                    Ok((observable.eval(&x) - exact).powi(2))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    RateReport::from_samples(n_list, samples, seed)
}

/// Worst case of `|G(m_X^{−i}) − G(m_X)|` over particles against the bound
/// `2 sup|δG/δm| / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeaveOneOutCheck {
    pub n: usize,
    pub max_deviation: f64,
    pub worst_index: usize,
    pub bound: f64,
}

impl LeaveOneOutCheck {
    pub fn holds(&self) -> bool {
        self.max_deviation <= self.bound
    }
}

pub fn leave_one_out_check(observable: &dyn Observable, cloud: &ParticleCloud) -> Result<LeaveOneOutCheck> {
    let n = cloud.n();
    if n < 2 {
        return Err(invalid("cloud", "leave-one-out needs n ≥ 2"));
    }
    let full = observable.eval(cloud);
    let mut max_deviation = 0.0;
    let mut worst_index = 0;
    for i in 0..n {
        let dev = (observable.eval(&cloud.leave_one_out(i)?) - full).abs();
        if dev > max_deviation {
            max_deviation = dev;
            worst_index = i;
        }
    }
    Ok(LeaveOneOutCheck { n, max_deviation, worst_index, bound: 2.0 * observable.linear_bound() / n as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::sample_cloud;

    #[test]
    fn intrinsic_observable_matches_direct_gradient() {
        let f = CompositeExpectation::scalar_tanh(1.0, 0.5);
        let g = IntrinsicAt::new(&f, vec![0.3], 0).unwrap();
        let x = sample_cloud(&DistributionSpec::gaussian(vec![0.0], 1.0), 10, 1).unwrap();
        let mean = x.positions().iter().map(|v| v.tanh()).sum::<f64>() / 10.0;
        let direct = (1.0 - 0.3f64.tanh().powi(2)) * (mean - 0.5);
        assert!((g.eval(&x) - direct).abs() < 1e-15);
        // a = sech²(0.3), sup|φ| = 1.
        assert!((g.linear_bound() - 2.0 * (1.0 - 0.3f64.tanh().powi(2))).abs() < 1e-15);
    }

    #[test]
    fn leave_one_out_bound_on_random_clouds() {
        let f = CompositeExpectation::scalar_tanh(2.0, 0.3);
        let g = IntrinsicAt::new(&f, vec![-0.4], 0).unwrap();
        for (n, seed) in [(2, 1), (5, 2), (40, 3)] {
            let x = sample_cloud(&DistributionSpec::gaussian(vec![0.0], 4.0), n, seed).unwrap();
            assert!(leave_one_out_check(&g, &x).unwrap().holds());
            assert!(leave_one_out_check(&FunctionalValue(&f), &x).unwrap().holds());
        }
    }

    #[test]
    fn rate_report_rows_and_csv() {
        let n = [4, 8, 16, 32];
        let samples: Vec<Vec<f64>> = n.iter().map(|&k| vec![1.0 / k as f64, 1.0 / k as f64]).collect();
        let r = RateReport::from_samples(&n, samples, 1).unwrap();
        assert!((r.slope + 1.0).abs() < 1e-12);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("n,mean_value,stderr,replicas\n4,0.25,0.0,2"));
    }
}
