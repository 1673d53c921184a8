//! Relative entropy estimators and the per-particle free-energy proxy.

use serde::Serialize;

use crate::cloud::ParticleCloud;
use crate::error::{invalid, Error, Result};
use crate::functionals::MeanFieldFunctional;
use crate::grid1d::{GridDensity, GridProblem};

/// Largest fraction of samples allowed outside the reference grid.
pub const LEAKAGE_TOL: f64 = 1e-6;

/// `H(m | ref) = ∫ m log(m / ref)` for two densities on the same grid.
pub fn relative_entropy_grid(m: &GridDensity, reference: &GridDensity) -> Result<f64> {
    if m.cells() != reference.cells() || m.half_width() != reference.half_width() {
        return Err(invalid("density", "grid geometry does not match the reference"));
    }
    m.check_normalized()?;
    reference.check_normalized()?;
    let h = m.h();
    let mut total = 0.0;
    for (&p, &q) in m.values().iter().zip(reference.values()) {
        if p > 0.0 {
            if !(q > 0.0) {
                return Err(Error::SupportLeakage { mass: p * h });
            }
            total += p * h * (p / q).ln();
        }
    }
    Ok(total)
}

/// Histogram bins with Freedman–Diaconis width spanning the sample range.
pub(crate) struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub total: usize,
}

fn quantile_sorted(x: &[f64], p: f64) -> f64 {
    let pos = p * (x.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    x[lo] + (pos - lo as f64) * (x[hi] - x[lo])
}

impl Histogram {
    pub fn freedman_diaconis(samples: &[f64]) -> Result<Self> {
        let mut x = samples.to_vec();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("samples", "must be finite"));
        }
        x.sort_by(f64::total_cmp);
        let n = x.len();
        if n < 2 {
            return Err(Error::Empty("a histogram needs at least two samples"));
        }
        let (lo, hi) = (x[0], x[n - 1]);
        if !(hi > lo) {
            return Err(Error::Degenerate("all samples coincide".into()));
        }
        let iqr = quantile_sorted(&x, 0.75) - quantile_sorted(&x, 0.25);
        let mut width = 2.0 * iqr / (n as f64).cbrt();
        if !(width > 0.0) {
            width = (hi - lo) / (n as f64).sqrt().ceil();
        }
        let bins = ((hi - lo) / width).ceil().max(1.0) as usize;
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
        let mut counts = vec![0; bins];
        for v in &x {
            counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
        }
        Ok(Self { edges, counts, total: n })
    }
}

/// Plug-in histogram estimate of `H(m | ref)` from samples of `m`.
///
/// Bins follow the Freedman–Diaconis rule. Samples outside the reference
/// grid count as leakage and are an error beyond [`LEAKAGE_TOL`].
pub fn relative_entropy_1d(samples: &[f64], reference: &GridDensity) -> Result<f64> {
    Ok(histogram_entropy(samples, reference)?.plug_in)
}

/// Histogram relative entropy with the quantities needed for the
/// Miller–Madow correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct HistogramEntropy {
    pub plug_in: f64,
    pub occupied: usize,
    pub samples: usize,
}

impl HistogramEntropy {
    /// Plug-in value minus `(occupied − 1)/(2N)`.
    pub fn miller_madow(&self) -> f64 {
        self.plug_in - (self.occupied as f64 - 1.0) / (2.0 * self.samples as f64)
    }
}

pub(crate) fn histogram_entropy(samples: &[f64], reference: &GridDensity) -> Result<HistogramEntropy> {
    reference.check_normalized()?;
    if samples.is_empty() {
        return Err(Error::Empty("relative_entropy_1d needs samples"));
    }
    let l = reference.half_width();
    let inside: Vec<f64> = samples.iter().copied().filter(|x| (-l..=l).contains(x)).collect();
    let leaked = (samples.len() - inside.len()) as f64 / samples.len() as f64;
    if leaked > LEAKAGE_TOL {
        return Err(Error::SupportLeakage { mass: leaked });
    }
    let hist = Histogram::freedman_diaconis(&inside)?;
    let n = hist.total as f64;
    let mut plug_in = 0.0;
    let mut occupied = 0;
    for (k, &c) in hist.counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        occupied += 1;
        let p = c as f64 / n;
        let q = reference.mass_between(hist.edges[k], hist.edges[k + 1]);
        if !(q > 0.0) {
            return Err(Error::SupportLeakage { mass: p });
        }
        plug_in += p * (p / q).ln();
    }
    Ok(HistogramEntropy { plug_in, occupied, samples: hist.total })
}

/// `H(m¹ | μ)` split as `H(m¹ | m̄) + E_{m¹}[log(m̄/μ)]`: the first part by
/// the bias-corrected histogram estimator, the second by a sample mean.
pub(crate) fn split_marginal_entropy(pooled: &[f64], centering: &GridDensity, mu: &GridDensity) -> Result<(HistogramEntropy, f64)> {
    let local = histogram_entropy(pooled, centering)?;
    let mut cross = 0.0;
    for &x in pooled {
        let (a, b) = (centering.density_at(x), mu.density_at(x));
        if a > 0.0 && b > 0.0 {
            cross += (a / b).ln();
        }
    }
    Ok((local, cross / pooled.len() as f64))
}

/// Per-particle free energy `(1/n) F^{σ,n}` estimated over replicas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeEnergyEstimate {
    /// Interaction term plus `(σ²/2)` times the marginal entropy proxy.
    pub value: f64,
    /// Replica average of `F(m_X)`.
    pub interaction: f64,
    /// `H(m¹ | μ)` of the pooled one-particle marginal, if estimated.
    pub marginal_entropy: Option<f64>,
    /// Standard error of the interaction term across replicas.
    pub interaction_stderr: f64,
}

impl FreeEnergyEstimate {
    pub fn entropy_omitted(&self) -> bool {
        self.marginal_entropy.is_none()
    }
}

/// `E[F(m_X)] + (σ²/2) H(m¹ | μ)` from independent replicas of an
/// exchangeable system. The entropy of the full joint law is replaced by
/// that of the one-particle marginal, which agrees only under independence.
///
/// In 1D the entropy is split as `H(m¹ | m̄) + E_{m¹}[log(m̄/μ)]` with
/// `m̄ = centering` (the reference measure when `None`). The first part
/// uses the bias-corrected histogram estimator, the second a sample mean.
/// In higher dimension the entropy term is omitted and flagged.
pub fn free_energy_particle(
    replicas: &[ParticleCloud],
    functional: &dyn MeanFieldFunctional,
    problem: &GridProblem<'_>,
    centering: Option<&GridDensity>,
) -> Result<FreeEnergyEstimate> {
    if replicas.len() < 2 {
        return Err(invalid("replicas", "at least two replicas are needed for the expectation"));
    }
    let values: Vec<f64> = replicas.iter().map(|c| functional.value(c)).collect();
    let r = values.len() as f64;
    let interaction = values.iter().sum::<f64>() / r;
    let var = values.iter().map(|v| (v - interaction).powi(2)).sum::<f64>() / (r - 1.0);
    let interaction_stderr = (var / r).sqrt();
    if replicas.iter().any(|c| c.dim() != 1) || functional.dim() != 1 {
        return Ok(FreeEnergyEstimate { value: interaction, interaction, marginal_entropy: None, interaction_stderr });
    }
    let mu = problem.reference_measure()?;
    let centering = centering.unwrap_or(&mu);
    let pooled: Vec<f64> = replicas.iter().flat_map(|c| c.positions().iter().copied()).collect();
    let (local, cross) = split_marginal_entropy(&pooled, centering, &mu)?;
    let entropy = local.miller_madow() + cross;
    let d = 0.5 * problem.sigma * problem.sigma;
    Ok(FreeEnergyEstimate {
        value: interaction + d * entropy,
        interaction,
        marginal_entropy: Some(entropy),
        interaction_stderr,
    })
}

use crate::measure::Measure;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{sample_cloud, DistributionSpec};
    use crate::functionals::ConfiningPotential;
    use crate::functionals::ZeroFunctional;

    #[test]
    fn grid_self_entropy_is_zero() {
        let g = GridDensity::gaussian(8.0, 400, 0.0, 1.0).unwrap();
        assert!(relative_entropy_grid(&g, &g).unwrap().abs() < 1e-10);
    }

    #[test]
    fn grid_gaussian_kl() {
        let a = GridDensity::gaussian(10.0, 4000, 0.0, 1.0).unwrap();
        let b = GridDensity::gaussian(10.0, 4000, 1.0, 1.0).unwrap();
        assert!((relative_entropy_grid(&a, &b).unwrap() - 0.5).abs() < 1e-4);
    }

    #[test]
    fn sample_estimates() {
        let reference = GridDensity::gaussian(8.0, 2000, 0.0, 1.0).unwrap();
        let x = sample_cloud(&DistributionSpec::gaussian(vec![0.0], 1.0), 100_000, 1).unwrap();
        assert!(relative_entropy_1d(x.positions(), &reference).unwrap().abs() < 0.02);
        let shifted = GridDensity::gaussian(8.0, 2000, 1.0, 1.0).unwrap();
        let h = relative_entropy_1d(x.positions(), &shifted).unwrap();
        assert!((h - 0.5).abs() < 0.03, "{h}");
    }

    #[test]
    fn leakage_is_reported() {
        let reference = GridDensity::gaussian(2.0, 100, 0.0, 1.0).unwrap();
        let x = sample_cloud(&DistributionSpec::gaussian(vec![0.0], 1.0), 1000, 1).unwrap();
        assert!(matches!(relative_entropy_1d(x.positions(), &reference), Err(Error::SupportLeakage { .. })));
    }

    #[test]
    fn zero_functional_at_reference() {
        let zero = ZeroFunctional { dim: 1 };
        let problem = GridProblem::new(&zero, ConfiningPotential::quadratic(1.0).unwrap(), 1.0, 8.0, 1600).unwrap();
        let spec = DistributionSpec::gaussian(vec![0.0], 1.0);
        let replicas: Vec<_> = (0..8).map(|s| sample_cloud(&spec, 4000, s).unwrap()).collect();
        let e = free_energy_particle(&replicas, &zero, &problem, None).unwrap();
        assert!(e.value.abs() < 0.01, "{e:?}");
        assert!(free_energy_particle(&replicas[..1], &zero, &problem, None).is_err());
    }
}
