//! Finite signed measures seen as weighted atoms.
//!
//! Functionals consume measures only through [`Measure`], so empirical clouds,
//! grid densities, leave-one-out views and the mixtures used by finite
//! differences all share one evaluation path.

use crate::error::{Error, Result};

pub trait Measure: Sync {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    /// Weight and location of atom `k`.
    fn atom(&self, k: usize) -> (f64, &[f64]);

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn total_mass(&self) -> f64 {
        (0..self.len()).map(|k| self.atom(k).0).sum()
    }

    /// `∫ f dm`.
    fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64
    where
        Self: Sized,
    {
        (0..self.len())
            .map(|k| {
                let (w, x) = self.atom(k);
                w * f(x)
            })
            .sum()
    }
}

/// `∫ f dm` for trait objects.
pub fn integrate(m: &dyn Measure, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    (0..m.len())
        .map(|k| {
            let (w, x) = m.atom(k);
            w * f(x)
        })
        .sum()
}

pub(crate) fn check_normalized(m: &dyn Measure, tol: f64) -> Result<()> {
    let mass = m.total_mass();
    if (mass - 1.0).abs() > tol {
        return Err(Error::NotNormalized { mass });
    }
    Ok(())
}

/// Owned weighted atoms, row-major positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Atoms {
    dim: usize,
    weights: Vec<f64>,
    positions: Vec<f64>,
}

impl Atoms {
    pub fn new(dim: usize, weights: Vec<f64>, positions: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(crate::error::invalid("dim", "must be at least 1"));
        }
        if positions.len() != weights.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: weights.len() * dim,
                got: positions.len(),
            });
        }
        Ok(Self { dim, weights, positions })
    }

    pub fn uniform(dim: usize, positions: Vec<f64>) -> Result<Self> {
        let n = positions.len() / dim.max(1);
        Self::new(dim, vec![1.0 / n as f64; n], positions)
    }

    pub fn dirac(x: &[f64]) -> Self {
        Self { dim: x.len(), weights: vec![1.0], positions: x.to_vec() }
    }

    pub fn from_measure(m: &dyn Measure) -> Self {
        let mut weights = Vec::with_capacity(m.len());
        let mut positions = Vec::with_capacity(m.len() * m.dim());
        for k in 0..m.len() {
            let (w, x) = m.atom(k);
            weights.push(w);
            positions.extend_from_slice(x);
        }
        Self { dim: m.dim(), weights, positions }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }
}

impl Measure for Atoms {
    fn dim(&self) -> usize {
        self.dim
    }
    fn len(&self) -> usize {
        self.weights.len()
    }
    fn atom(&self, k: usize) -> (f64, &[f64]) {
        (self.weights[k], &self.positions[k * self.dim..(k + 1) * self.dim])
    }
}

/// `Σ_j c_j m_j` without copying the parts. Coefficients may be negative.
pub struct Mixture<'a> {
    parts: Vec<(f64, &'a dyn Measure)>,
    offsets: Vec<usize>,
}

impl<'a> Mixture<'a> {
    pub fn new(parts: Vec<(f64, &'a dyn Measure)>) -> Self {
        let mut offsets = Vec::with_capacity(parts.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for (_, m) in &parts {
            acc += m.len();
            offsets.push(acc);
        }
        Self { parts, offsets }
    }

    /// `(1-λ) a + λ b`.
    pub fn interpolate(a: &'a dyn Measure, b: &'a dyn Measure, lambda: f64) -> Self {
        Self::new(vec![(1.0 - lambda, a), (lambda, b)])
    }
}

impl Measure for Mixture<'_> {
    fn dim(&self) -> usize {
        self.parts.first().map(|(_, m)| m.dim()).unwrap_or(0)
    }
    fn len(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }
    fn atom(&self, k: usize) -> (f64, &[f64]) {
        let part = self.offsets.partition_point(|&o| o <= k) - 1;
        let (c, m) = self.parts[part];
        let (w, x) = m.atom(k - self.offsets[part]);
        (c * w, x)
    }
}
