use std::sync::Arc;

use super::potential::norm_sq;
use super::{FrozenField, MeanFieldFunctional};
use crate::error::{invalid, Result};
use crate::measure::Measure;

/// Bounded smooth feature map `φ: R^d → R^{d'}`.
pub trait FeatureMap: Send + Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn eval(&self, x: &[f64], out: &mut [f64]);
    /// `out = ∇φ(x)ᵀ v`, i.e. `Σ_j v_j ∇φ_j(x)`.
    fn jacobian_t(&self, x: &[f64], v: &[f64], out: &mut [f64]);
    /// `sup_x |φ(x)|`.
    fn sup_norm(&self) -> f64;
    /// `sup_x ‖∇φ(x)‖` (operator norm).
    fn sup_jacobian(&self) -> f64;
}

/// `g(y) = (κ/2)|y − y₀|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticOuter {
    pub curvature: f64,
    pub target: Vec<f64>,
}

impl QuadraticOuter {
    fn value(&self, y: &[f64]) -> f64 {
        0.5 * self.curvature * y.iter().zip(&self.target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    }

    fn grad(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.target).map(|(a, b)| self.curvature * (a - b)).collect()
    }

    /// `sup |∇g(y)|` over `|y| ≤ radius`.
    fn grad_bound(&self, radius: f64) -> f64 {
        self.curvature.abs() * (radius + norm_sq(&self.target).sqrt())
    }
}

/// `φ_j(x) = tanh(w_j·x + b_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TanhFeatures {
    dim: usize,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

impl TanhFeatures {
    pub fn new(weights: Vec<Vec<f64>>, biases: Vec<f64>) -> Result<Self> {
        let dim = weights.first().map(Vec::len).unwrap_or(0);
        if dim == 0 || weights.iter().any(|w| w.len() != dim) {
            return Err(invalid("weights", "need at least one feature and a consistent input dimension"));
        }
        if biases.len() != weights.len() {
            return Err(invalid("biases", "one bias per feature"));
        }
        Ok(Self { dim, weights, biases })
    }

    fn pre(&self, j: usize, x: &[f64]) -> f64 {
        self.weights[j].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.biases[j]
    }
}

impl FeatureMap for TanhFeatures {
    fn dim_in(&self) -> usize {
        self.dim
    }
    fn dim_out(&self) -> usize {
        self.weights.len()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.pre(j, x).tanh();
        }
    }
    fn jacobian_t(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (j, &vj) in v.iter().enumerate() {
            let t = self.pre(j, x).tanh();
            let s = vj * (1.0 - t * t);
            for (o, w) in out.iter_mut().zip(&self.weights[j]) {
                *o += s * w;
            }
        }
    }
    fn sup_norm(&self) -> f64 {
        (self.weights.len() as f64).sqrt()
    }
    fn sup_jacobian(&self) -> f64 {
        // Frobenius norm of the weight matrix bounds the operator norm.
        self.weights.iter().map(|w| norm_sq(w)).sum::<f64>().sqrt()
    }
}

/// `F(m) = g(∫ φ dm)` with convex quadratic `g` and bounded features `φ`.
///
/// `δF/δm(m, x) = ∇g(∫φ dm)·φ(x)` up to centering, and
/// `D_mF(m, x) = ∇φ(x)ᵀ ∇g(∫φ dm)`.
pub struct CompositeExpectation {
    outer: QuadraticOuter,
    features: Arc<dyn FeatureMap>,
}

impl CompositeExpectation {
    pub fn new(outer: QuadraticOuter, features: Arc<dyn FeatureMap>) -> Result<Self> {
        if outer.target.len() != features.dim_out() {
            return Err(invalid("target", "length must equal the number of features"));
        }
        if !(outer.curvature >= 0.0) {
            return Err(invalid("curvature", "g must be convex"));
        }
        Ok(Self { outer, features })
    }

    /// One-dimensional `g(y) = (κ/2)(y − y₀)²`, `φ = tanh`.
    pub fn scalar_tanh(curvature: f64, target: f64) -> Self {
        let features = TanhFeatures::new(vec![vec![1.0]], vec![0.0]).expect("valid features");
        Self::new(QuadraticOuter { curvature, target: vec![target] }, Arc::new(features))
            .expect("valid composite")
    }

    pub fn outer(&self) -> &QuadraticOuter {
        &self.outer
    }

    pub fn features(&self) -> &Arc<dyn FeatureMap> {
        &self.features
    }

    /// `∫ φ dm`.
    pub fn feature_mean(&self, m: &dyn Measure) -> Vec<f64> {
        let k = self.features.dim_out();
        let mut acc = vec![0.0; k];
        let mut buf = vec![0.0; k];
        for a in 0..m.len() {
            let (w, x) = m.atom(a);
            self.features.eval(x, &mut buf);
            for (s, v) in acc.iter_mut().zip(&buf) {
                *s += w * v;
            }
        }
        acc
    }
}

struct CompositeField {
    features: Arc<dyn FeatureMap>,
    outer_grad: Vec<f64>,
}

impl FrozenField for CompositeField {
    fn potential(&self, x: &[f64]) -> f64 {
        let mut buf = vec![0.0; self.features.dim_out()];
        self.features.eval(x, &mut buf);
        buf.iter().zip(&self.outer_grad).map(|(a, b)| a * b).sum()
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.features.jacobian_t(x, &self.outer_grad, out);
    }
}

impl MeanFieldFunctional for CompositeExpectation {
    fn dim(&self) -> usize {
        self.features.dim_in()
    }
    fn value(&self, m: &dyn Measure) -> f64 {
        self.outer.value(&self.feature_mean(m))
    }
    fn freeze(&self, m: &dyn Measure) -> Arc<dyn FrozenField> {
        let outer_grad = self.outer.grad(&self.feature_mean(m));
        Arc::new(CompositeField { features: Arc::clone(&self.features), outer_grad })
    }
    fn linear_bound(&self) -> f64 {
        let r = self.features.sup_norm();
        self.outer.grad_bound(r) * 2.0 * r
    }
    fn intrinsic_bound(&self) -> f64 {
        self.outer.grad_bound(self.features.sup_norm()) * self.features.sup_jacobian()
    }
    fn name(&self) -> &'static str {
        "composite"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{intrinsic_derivative, linear_derivative};
    use crate::measure::Atoms;

    #[test]
    fn derivatives_match_closed_form() {
        let f = CompositeExpectation::scalar_tanh(1.5, 0.2);
        let m = Atoms::uniform(1, vec![-0.4, 0.8, 1.9]).unwrap();
        let ybar = (-0.4f64).tanh() / 3.0 + 0.8f64.tanh() / 3.0 + 1.9f64.tanh() / 3.0;
        let x = 0.6f64;
        let lin = linear_derivative(&f, &m, &[x]).unwrap();
        assert!((lin - 1.5 * (ybar - 0.2) * (x.tanh() - ybar)).abs() < 1e-14);
        let grad = intrinsic_derivative(&f, &m, &[x]).unwrap()[0];
        assert!((grad - 1.5 * (ybar - 0.2) * (1.0 - x.tanh().powi(2))).abs() < 1e-14);
    }

    #[test]
    fn multi_feature_jacobian_matches_finite_differences() {
        let feats = TanhFeatures::new(vec![vec![1.0, -0.5], vec![0.3, 2.0]], vec![0.1, -0.2]).unwrap();
        let x = [0.4, -0.7];
        let v = [0.9, -1.3];
        let mut jt = [0.0; 2];
        feats.jacobian_t(&x, &v, &mut jt);
        for i in 0..2 {
            let h = 1e-6;
            let (mut xp, mut xm) = (x, x);
            xp[i] += h;
            xm[i] -= h;
            let (mut fp, mut fm) = ([0.0; 2], [0.0; 2]);
            feats.eval(&xp, &mut fp);
            feats.eval(&xm, &mut fm);
            let fd: f64 = (0..2).map(|j| v[j] * (fp[j] - fm[j]) / (2.0 * h)).sum();
            assert!((fd - jt[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_concave_outer() {
        let feats = Arc::new(TanhFeatures::new(vec![vec![1.0]], vec![0.0]).unwrap());
        let outer = QuadraticOuter { curvature: -1.0, target: vec![0.0] };
        assert!(CompositeExpectation::new(outer, feats).is_err());
    }
}
