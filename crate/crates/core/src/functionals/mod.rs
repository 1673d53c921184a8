//! Confining potentials and mean-field functionals `F` on probability
//! measures, with their linear derivative `δF/δm` and intrinsic derivative
//! `D_mF = ∇_x δF/δm`.
//!
//! A functional is evaluated in two stages. [`MeanFieldFunctional::freeze`]
//! captures everything that depends on the measure, and the returned
//! [`FrozenField`] answers pointwise queries in `x`. Particle drifts freeze
//! once per step and then query every particle against the same snapshot.
//!
//! `δF/δm` is only defined up to an additive constant. Frozen fields return
//! an uncentered potential; [`linear_derivative`] subtracts its mean under
//! the measure, which fixes the constant by `∫ δF/δm(m, x) m(dx) = 0`.

mod composite;
mod pairwise;
mod potential;
mod two_layer;
pub mod validate;

use std::sync::Arc;

pub use composite::{CompositeExpectation, QuadraticOuter, TanhFeatures};
pub use pairwise::PairwiseInteraction;
pub use potential::ConfiningPotential;
pub use two_layer::TwoLayerNetLoss;

use crate::cloud::ParticleCloud;
use crate::error::{Error, Result};
use crate::measure::{self, Measure};

/// Tolerance on total mass accepted by [`eval_f`].
pub const NORMALIZATION_TOL: f64 = 1e-9;

pub trait MeanFieldFunctional: Send + Sync {
    /// Dimension `d` of the state space.
    fn dim(&self) -> usize;

    /// `F(m)`. Accepts any finite signed measure; normalization is checked
    /// by [`eval_f`].
    fn value(&self, m: &dyn Measure) -> f64;

    fn freeze(&self, m: &dyn Measure) -> Arc<dyn FrozenField>;

    /// Declared bound on `sup |δF/δm|` for the centered derivative.
    fn linear_bound(&self) -> f64;

    /// Declared bound on `sup |D_mF|`.
    fn intrinsic_bound(&self) -> f64;

    fn name(&self) -> &'static str;
}

/// Measure-dependent part of a functional, frozen at one measure.
pub trait FrozenField: Send + Sync {
    /// `δF/δm(m, x)` up to an additive constant.
    fn potential(&self, x: &[f64]) -> f64;

    /// `D_mF(m, x)`, written into `out` (length `d`).
    fn gradient(&self, x: &[f64], out: &mut [f64]);
}

/// `F ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroFunctional {
    pub dim: usize,
}

struct ZeroField;

impl FrozenField for ZeroField {
    fn potential(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

impl MeanFieldFunctional for ZeroFunctional {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _m: &dyn Measure) -> f64 {
        0.0
    }
    fn freeze(&self, _m: &dyn Measure) -> Arc<dyn FrozenField> {
        Arc::new(ZeroField)
    }
    fn linear_bound(&self) -> f64 {
        0.0
    }
    fn intrinsic_bound(&self) -> f64 {
        0.0
    }
    fn name(&self) -> &'static str {
        "zero"
    }
}

/// Wraps a functional and negates its intrinsic derivative. Exists so the
/// derivative validator can be shown to catch a sign error.
pub struct FlippedIntrinsic(pub Box<dyn MeanFieldFunctional>);

struct FlippedField(Arc<dyn FrozenField>);

impl FrozenField for FlippedField {
    fn potential(&self, x: &[f64]) -> f64 {
        self.0.potential(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.0.gradient(x, out);
        out.iter_mut().for_each(|v| *v = -*v);
    }
}

impl MeanFieldFunctional for FlippedIntrinsic {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, m: &dyn Measure) -> f64 {
        self.0.value(m)
    }
    fn freeze(&self, m: &dyn Measure) -> Arc<dyn FrozenField> {
        Arc::new(FlippedField(self.0.freeze(m)))
    }
    fn linear_bound(&self) -> f64 {
        self.0.linear_bound()
    }
    fn intrinsic_bound(&self) -> f64 {
        self.0.intrinsic_bound()
    }
    fn name(&self) -> &'static str {
        "flipped-intrinsic"
    }
}

/// `F(m)` for a probability measure.
pub fn eval_f(functional: &dyn MeanFieldFunctional, m: &dyn Measure) -> Result<f64> {
    check_dim(functional, m)?;
    measure::check_normalized(m, NORMALIZATION_TOL)?;
    Ok(functional.value(m))
}

/// Centered `δF/δm(m, x)`.
pub fn linear_derivative(
    functional: &dyn MeanFieldFunctional,
    m: &dyn Measure,
    x: &[f64],
) -> Result<f64> {
    check_dim(functional, m)?;
    let field = functional.freeze(m);
    let mean = measure::integrate(m, |y| field.potential(y));
    Ok(field.potential(x) - mean)
}

/// `D_mF(m, x)`.
pub fn intrinsic_derivative(
    functional: &dyn MeanFieldFunctional,
    m: &dyn Measure,
    x: &[f64],
) -> Result<Vec<f64>> {
    check_dim(functional, m)?;
    let mut out = vec![0.0; functional.dim()];
    functional.freeze(m).gradient(x, &mut out);
    Ok(out)
}

/// `∇_i f^n(x¹..xⁿ)` with `f^n = n F(m_X)`, evaluated as `D_mF(m_X, xⁱ)`.
pub fn finite_particle_gradient(
    functional: &dyn MeanFieldFunctional,
    cloud: &ParticleCloud,
    i: usize,
) -> Result<Vec<f64>> {
    if i >= cloud.n() {
        return Err(Error::IndexOutOfRange { index: i, len: cloud.n() });
    }
    intrinsic_derivative(functional, cloud, cloud.particle(i))
}

fn check_dim(functional: &dyn MeanFieldFunctional, m: &dyn Measure) -> Result<()> {
    if m.dim() != functional.dim() {
        return Err(Error::DimensionMismatch { expected: functional.dim(), got: m.dim() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atoms;

    fn gaussian_kernel() -> PairwiseInteraction {
        PairwiseInteraction::gaussian(1, 1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_functional_is_zero_everywhere() {
        let f = ZeroFunctional { dim: 2 };
        let m = Atoms::uniform(2, vec![0.1, 0.2, -3.0, 4.0]).unwrap();
        assert_eq!(eval_f(&f, &m).unwrap(), 0.0);
        assert_eq!(linear_derivative(&f, &m, &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(intrinsic_derivative(&f, &m, &[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn eval_rejects_unnormalized_measures() {
        let f = gaussian_kernel();
        let m = Atoms::new(1, vec![0.5, 0.6], vec![0.0, 1.0]).unwrap();
        assert!(matches!(eval_f(&f, &m), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn pairwise_on_coincident_pair_is_one_half() {
        // ½·(1/n²)·Σ_ij w(x_i - x_j) with n = 2 and all four terms equal to w(0) = 1.
        let m = Atoms::uniform(1, vec![0.0, 0.0]).unwrap();
        assert!((eval_f(&gaussian_kernel(), &m).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pairwise_linear_derivative_against_point_mass() {
        let f = gaussian_kernel();
        let m = Atoms::dirac(&[0.0]);
        for x in [-2.0f64, 0.3, 1.7] {
            let expected = (-0.5 * x * x).exp() - 1.0;
            assert!((linear_derivative(&f, &m, &[x]).unwrap() - expected).abs() < 1e-14);
            let grad = intrinsic_derivative(&f, &m, &[x]).unwrap()[0];
            assert!((grad - (-x * (-0.5 * x * x).exp())).abs() < 1e-14);
        }
    }

    #[test]
    fn pairwise_particle_gradient_for_two_particles() {
        // (1/2)(∇w(0) + ∇w(0 - 1)) = (1/2)∇w(-1) = (1/2)·e^{-1/2}.
        let cloud = ParticleCloud::from_positions(1, vec![0.0, 1.0]).unwrap();
        let g = finite_particle_gradient(&gaussian_kernel(), &cloud, 0).unwrap();
        assert!((g[0] - 0.5 * (-0.5f64).exp()).abs() < 1e-15);
        assert!(matches!(
            finite_particle_gradient(&gaussian_kernel(), &cloud, 2),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn composite_at_point_mass_of_fixed_point() {
        // g(y) = y², φ = tanh, m = δ_0 → g(tanh 0) = 0.
        let f = CompositeExpectation::scalar_tanh(2.0, 0.0);
        assert_eq!(eval_f(&f, &Atoms::dirac(&[0.0])).unwrap(), 0.0);
    }

    #[test]
    fn composite_linear_derivative_has_zero_mean() {
        let f = CompositeExpectation::scalar_tanh(1.0, 0.3);
        let m = Atoms::uniform(1, vec![-1.0, 0.2, 0.9, 2.2]).unwrap();
        let mean = measure::integrate(&m, |x| linear_derivative(&f, &m, x).unwrap());
        assert!(mean.abs() < 1e-10);
    }
}
