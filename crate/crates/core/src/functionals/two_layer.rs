use std::sync::Arc;

use super::composite::{CompositeExpectation, FeatureMap, QuadraticOuter};
use super::{FrozenField, MeanFieldFunctional};
use crate::error::{invalid, Result};
use crate::measure::Measure;

/// Features `φ_k(c, a, b) = ℓ(c)·tanh(a z_k + b)` of a single neuron with
/// truncated output weight `ℓ(c) = L tanh(c / L)`, evaluated on the inputs.
#[derive(Debug, Clone)]
struct NeuronFeatures {
    inputs: Vec<f64>,
    truncation: f64,
}

impl NeuronFeatures {
    fn ell(&self, c: f64) -> (f64, f64) {
        let t = (c / self.truncation).tanh();
        (self.truncation * t, 1.0 - t * t)
    }
}

impl FeatureMap for NeuronFeatures {
    fn dim_in(&self) -> usize {
        3
    }
    fn dim_out(&self) -> usize {
        self.inputs.len()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let (l, _) = self.ell(x[0]);
        for (o, z) in out.iter_mut().zip(&self.inputs) {
            *o = l * (x[1] * z + x[2]).tanh();
        }
    }
    fn jacobian_t(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let (l, dl) = self.ell(x[0]);
        out.fill(0.0);
        for (vk, z) in v.iter().zip(&self.inputs) {
            let t = (x[1] * z + x[2]).tanh();
            let dt = 1.0 - t * t;
            out[0] += vk * dl * t;
            out[1] += vk * l * dt * z;
            out[2] += vk * l * dt;
        }
    }
    fn sup_norm(&self) -> f64 {
        self.truncation * (self.inputs.len() as f64).sqrt()
    }
    fn sup_jacobian(&self) -> f64 {
        let zz: f64 = self.inputs.iter().map(|z| z * z + 1.0).sum();
        (self.inputs.len() as f64 + self.truncation * self.truncation * zz).sqrt()
    }
}

/// Mean-field loss of a two-layer network with parameter `x = (c, a, b)`:
/// `F(m) = Σ_k |f(z_k) − E^m[ℓ(C) tanh(A z_k + B)]|²`.
///
/// Convex in `m` (a convex function of a linear statistic) but not
/// displacement convex.
pub struct TwoLayerNetLoss {
    inner: CompositeExpectation,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    truncation: f64,
}

impl TwoLayerNetLoss {
    pub const DEFAULT_TRUNCATION: f64 = 5.0;

    pub fn new(inputs: Vec<f64>, targets: Vec<f64>, truncation: f64) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(invalid("targets", "need one target per input and at least one sample"));
        }
        if !(truncation > 0.0) {
            return Err(invalid("truncation", "must be positive"));
        }
        let features = NeuronFeatures { inputs: inputs.clone(), truncation };
        let outer = QuadraticOuter { curvature: 2.0, target: targets.clone() };
        let inner = CompositeExpectation::new(outer, Arc::new(features))?;
        Ok(Self { inner, inputs, targets, truncation })
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    /// Network output `E^m[ℓ(C) tanh(A z_k + B)]` at every input.
    pub fn predict(&self, m: &dyn Measure) -> Vec<f64> {
        self.inner.feature_mean(m)
    }
}

impl MeanFieldFunctional for TwoLayerNetLoss {
    fn dim(&self) -> usize {
        3
    }
    fn value(&self, m: &dyn Measure) -> f64 {
        self.inner.value(m)
    }
    fn freeze(&self, m: &dyn Measure) -> Arc<dyn FrozenField> {
        self.inner.freeze(m)
    }
    fn linear_bound(&self) -> f64 {
        self.inner.linear_bound()
    }
    fn intrinsic_bound(&self) -> f64 {
        self.inner.intrinsic_bound()
    }
    fn name(&self) -> &'static str {
        "two_layer"
    }
}
