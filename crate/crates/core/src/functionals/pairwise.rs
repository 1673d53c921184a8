use std::sync::Arc;

use super::potential::norm_sq;
use super::{FrozenField, MeanFieldFunctional};
use crate::error::{invalid, Result};
use crate::measure::{Atoms, Measure};

/// `F(m) = ½ ∬ w(x − y) m(dx) m(dy)` with the Gaussian kernel
/// `w(x) = A·exp(−|x|²/(2ℓ²))`.
///
/// The kernel is the Fourier transform of a nonnegative Gaussian measure, so
/// it is positive definite and `F` is convex.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseInteraction {
    dim: usize,
    amplitude: f64,
    length_scale: f64,
}

impl PairwiseInteraction {
    pub fn gaussian(dim: usize, amplitude: f64, length_scale: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension", "must be at least 1"));
        }
        if !(amplitude >= 0.0) {
            return Err(invalid("amplitude", "must be nonnegative for a positive-definite kernel"));
        }
        if !(length_scale > 0.0) {
            return Err(invalid("length_scale", "must be positive"));
        }
        Ok(Self { dim, amplitude, length_scale })
    }

    pub fn kernel(&self, z: &[f64]) -> f64 {
        self.amplitude * (-0.5 * norm_sq(z) / (self.length_scale * self.length_scale)).exp()
    }

    /// Accumulates `c·∇w(z)` into `out`.
    fn add_kernel_grad(&self, z: &[f64], c: f64, out: &mut [f64]) {
        let s2 = self.length_scale * self.length_scale;
        let k = c * self.kernel(z) / s2;
        for (o, v) in out.iter_mut().zip(z) {
            *o -= k * v;
        }
    }
}

struct PairwiseField {
    kernel: PairwiseInteraction,
    atoms: Atoms,
}

impl FrozenField for PairwiseField {
    fn potential(&self, x: &[f64]) -> f64 {
        let mut z = vec![0.0; x.len()];
        (0..self.atoms.len())
            .map(|k| {
                let (w, y) = self.atoms.atom(k);
                for ((zi, xi), yi) in z.iter_mut().zip(x).zip(y) {
                    *zi = xi - yi;
                }
                w * self.kernel.kernel(&z)
            })
            .sum()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut z = vec![0.0; x.len()];
        for k in 0..self.atoms.len() {
            let (w, y) = self.atoms.atom(k);
            for ((zi, xi), yi) in z.iter_mut().zip(x).zip(y) {
                *zi = xi - yi;
            }
            self.kernel.add_kernel_grad(&z, w, out);
        }
    }
}

impl MeanFieldFunctional for PairwiseInteraction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, m: &dyn Measure) -> f64 {
        let n = m.len();
        let mut z = vec![0.0; self.dim];
        let mut total = 0.0;
        for a in 0..n {
            let (wa, xa) = m.atom(a);
            // Diagonal once, off-diagonal pairs twice.
            total += 0.5 * wa * wa * self.amplitude;
            for b in (a + 1)..n {
                let (wb, xb) = m.atom(b);
                for ((zi, p), q) in z.iter_mut().zip(xa).zip(xb) {
                    *zi = p - q;
                }
                total += wa * wb * self.kernel(&z);
            }
        }
        total
    }

    fn freeze(&self, m: &dyn Measure) -> Arc<dyn FrozenField> {
        Arc::new(PairwiseField { kernel: self.clone(), atoms: Atoms::from_measure(m) })
    }

    fn linear_bound(&self) -> f64 {
        // Centered values of a kernel with range (0, A] stay within [-A, A].
        self.amplitude
    }

    fn intrinsic_bound(&self) -> f64 {
        // sup |∇w| = A e^{-1/2} / ℓ.
        self.amplitude * (-0.5f64).exp() / self.length_scale
    }

    fn name(&self) -> &'static str {
        "pairwise"
    }
}
