//! Particle ensembles and their empirical measures.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid1d::GridDensity;
use crate::measure::Measure;
use crate::rng::{self, StreamKey};

/// Where a cloud's random draws came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub master_seed: u64,
    pub substream: String,
    pub replica: u64,
    /// Stream id of particle 0; particle `i` uses `stream_offset + i`.
    pub stream_offset: u64,
}

/// `n` particles in `R^d` with uniform weights `1/n`. Positions are stored
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    dim: usize,
    positions: Vec<f64>,
    lineage: Option<Lineage>,
}

impl ParticleCloud {
    pub fn from_positions(dim: usize, positions: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        if positions.is_empty() || positions.len() % dim != 0 {
            return Err(invalid("positions", format!("{} values do not form n ≥ 1 points in R^{dim}", positions.len())));
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(invalid("positions", "all coordinates must be finite"));
        }
        Ok(Self { dim, positions, lineage: None })
    }

    pub fn n(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub(crate) fn positions_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn lineage(&self) -> Option<&Lineage> {
        self.lineage.as_ref()
    }

    /// Reorders particles: particle `i` of the result is particle `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut positions = Vec::with_capacity(self.positions.len());
        for &p in perm {
            positions.extend_from_slice(self.particle(p));
        }
        Self { dim: self.dim, positions, lineage: None }
    }

    /// `(1/n) Σ |xⁱ|^q` for `q ∈ {2, 4, 6}`.
    pub fn empirical_moment(&self, q: u32) -> Result<f64> {
        if !matches!(q, 2 | 4 | 6) {
            return Err(invalid("q", format!("moment order {q} must be one of 2, 4, 6")));
        }
        let half = q / 2;
        let sum: f64 = self
            .positions
            .chunks_exact(self.dim)
            .map(|x| x.iter().map(|v| v * v).sum::<f64>().powi(half as i32))
            .sum();
        Ok(sum / self.n() as f64)
    }

    /// `m_X^{-i} = (1/(n−1)) Σ_{j≠i} δ_{x^j}` as a borrowed view.
    pub fn leave_one_out(&self, i: usize) -> Result<LeaveOneOut<'_>> {
        if self.n() < 2 {
            return Err(invalid("n", "leave-one-out needs at least two particles"));
        }
        if i >= self.n() {
            return Err(Error::IndexOutOfRange { index: i, len: self.n() });
        }
        Ok(LeaveOneOut { cloud: self, skip: i })
    }

    /// CSV with columns `particle_id, x_0, …, x_{d−1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["particle_id".to_string()];
        header.extend((0..self.dim).map(|j| format!("x_{j}")));
        w.write_record(&header)?;
        for (i, x) in self.positions.chunks_exact(self.dim).enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(x.iter().map(|v| format!("{v:e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl Measure for ParticleCloud {
    fn dim(&self) -> usize {
        self.dim
    }
    fn len(&self) -> usize {
        self.n()
    }
    fn atom(&self, k: usize) -> (f64, &[f64]) {
        (1.0 / self.n() as f64, self.particle(k))
    }
}

/// Empirical measure of a cloud with one particle removed.
#[derive(Debug, Clone, Copy)]
pub struct LeaveOneOut<'a> {
    cloud: &'a ParticleCloud,
    skip: usize,
}

impl LeaveOneOut<'_> {
    pub fn removed(&self) -> &[f64] {
        self.cloud.particle(self.skip)
    }

    /// `((n−1)/n) m_X^{-i} + (1/n) δ_{xⁱ}`, which is `m_X` again.
    pub fn reinsert(&self) -> crate::measure::Atoms {
        let n = self.cloud.n() as f64;
        let mut weights = Vec::with_capacity(self.cloud.n());
        let mut positions = Vec::with_capacity(self.cloud.positions.len());
        for k in 0..self.len() {
            let (w, x) = self.atom(k);
            weights.push(w * (n - 1.0) / n);
            positions.extend_from_slice(x);
        }
        weights.push(1.0 / n);
        positions.extend_from_slice(self.removed());
        crate::measure::Atoms::new(self.cloud.dim, weights, positions).expect("consistent shape")
    }
}

impl Measure for LeaveOneOut<'_> {
    fn dim(&self) -> usize {
        self.cloud.dim
    }
    fn len(&self) -> usize {
        self.cloud.n() - 1
    }
    fn atom(&self, k: usize) -> (f64, &[f64]) {
        let j = if k >= self.skip { k + 1 } else { k };
        (1.0 / (self.cloud.n() - 1) as f64, self.cloud.particle(j))
    }
}

/// Law of the initial particles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    /// `N(mean, variance·I)`.
    Gaussian { mean: Vec<f64>, variance: f64 },
    /// Uniform on `[low, high]^dim`.
    Uniform { low: f64, high: f64, dim: usize },
    /// One-dimensional law with a piecewise-constant density.
    #[serde(skip)]
    Grid(GridDensity),
}

impl DistributionSpec {
    pub fn gaussian(mean: Vec<f64>, variance: f64) -> Self {
        Self::Gaussian { mean, variance }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian { mean, .. } => mean.len(),
            Self::Uniform { dim, .. } => *dim,
            Self::Grid(_) => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Gaussian { mean, variance } => {
                if mean.is_empty() {
                    return Err(invalid("mean", "dimension must be at least 1"));
                }
                if !(*variance > 0.0) {
                    return Err(invalid("variance", format!("{variance} must be positive")));
                }
            }
            Self::Uniform { low, high, dim } => {
                if !(high > low) {
                    return Err(invalid("uniform", format!("need high > low, got [{low}, {high}]")));
                }
                if *dim == 0 {
                    return Err(invalid("dim", "must be at least 1"));
                }
            }
            Self::Grid(g) => g.check_normalized()?,
        }
        Ok(())
    }

    /// `E|X|²`.
    pub fn second_moment(&self) -> f64 {
        match self {
            Self::Gaussian { mean, variance } => {
                mean.iter().map(|m| m * m).sum::<f64>() + variance * mean.len() as f64
            }
            Self::Uniform { low, high, dim } => {
                *dim as f64 * (high.powi(3) - low.powi(3)) / (3.0 * (high - low))
            }
            Self::Grid(g) => g.moment(2),
        }
    }

    pub(crate) fn draw(&self, rng: &mut impl Rng, out: &mut [f64]) {
        match self {
            Self::Gaussian { mean, variance } => {
                let s = variance.sqrt();
                for (o, m) in out.iter_mut().zip(mean) {
                    *o = m + s * rng.sample::<f64, _>(StandardNormal);
                }
            }
            Self::Uniform { low, high, .. } => {
                for o in out.iter_mut() {
                    *o = rng.random_range(*low..*high);
                }
            }
            Self::Grid(g) => out[0] = g.inverse_cdf(rng.random::<f64>()),
        }
    }
}

/// I.i.d. draws from `spec`, particle `i` using stream `i` of the `init`
/// substream of `seed`.
pub fn sample_cloud(spec: &DistributionSpec, n: usize, seed: u64) -> Result<ParticleCloud> {
    sample_cloud_from(spec, n, seed, rng::INIT, 0)
}

/// I.i.d. draws from an arbitrary substream and replica of `seed`.
pub fn sample_cloud_from(
    spec: &DistributionSpec,
    n: usize,
    seed: u64,
    substream: &str,
    replica: u64,
) -> Result<ParticleCloud> {
    let key = StreamKey::with_replica(seed, substream, replica);
    spec.validate()?;
    if n == 0 {
        return Err(invalid("n", "need at least one particle"));
    }
    let dim = spec.dim();
    let mut positions = vec![0.0; n * dim];
    for (i, x) in positions.chunks_exact_mut(dim).enumerate() {
        let mut rng = key.particle(i as u64);
        spec.draw(&mut rng, x);
    }
    let mut cloud = ParticleCloud::from_positions(dim, positions)?;
    cloud.lineage = Some(Lineage {
        master_seed: seed,
        substream: substream.to_string(),
        replica,
        stream_offset: 0,
    });
    Ok(cloud)
}
