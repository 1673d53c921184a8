//! Finite-difference self-validation of functional derivatives.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{linear_derivative, MeanFieldFunctional};
use crate::measure::{Atoms, Measure, Mixture};
use crate::rng::StreamKey;

/// Failure threshold on the maximum relative error of each check.
pub const TOLERANCE: f64 = 1e-4;

/// Mixture step for the `δF/δm` directional derivative.
const MIX_STEP: f64 = 1e-4;
/// Spatial step for the five-point stencils.
const SPACE_STEP: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct ProbeSpec {
    pub measures: Vec<Atoms>,
    pub points: Vec<Vec<f64>>,
}

impl ProbeSpec {
    /// Gaussian clouds of sizes 2, 3, 5 and 16, a discretized Gaussian on a
    /// coarse 1D grid when `dim == 1`, and five probe points.
    pub fn default_for(dim: usize, seed: u64) -> Self {
        let key = StreamKey::new(seed, "probe");
        let mut rng = key.particle(0);
        let mut measures = Vec::new();
        for n in [2usize, 3, 5, 16] {
            let pos: Vec<f64> =
                (0..n * dim).map(|_| 1.2 * rng.sample::<f64, _>(StandardNormal)).collect();
            measures.push(Atoms::uniform(dim, pos).expect("consistent shape"));
        }
        if dim == 1 {
            let cells = 64;
            let h = 8.0 / cells as f64;
            let centers: Vec<f64> = (0..cells).map(|k| -4.0 + (k as f64 + 0.5) * h).collect();
            let mut w: Vec<f64> = centers.iter().map(|x| (-0.5 * (x - 0.5) * (x - 0.5)).exp()).collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
            measures.push(Atoms::new(1, w, centers).expect("consistent shape"));
        }
        let points =
            (0..5).map(|_| (0..dim).map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal)).collect()).collect();
        Self { measures, points }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeReport {
    pub functional: String,
    /// `δF/δm(m, x)` against `d/dε F((1−ε)m + εδ_x)`.
    pub linear_vs_perturbation: f64,
    /// `D_mF(m, x)` against the spatial gradient of `δF/δm(m, ·)`.
    pub intrinsic_vs_gradient: f64,
    /// `D_mF(m_X, xⁱ)` against `∇_i (n F(m_X))`.
    pub particle_vs_finite_difference: f64,
    /// Largest centered `|δF/δm|` seen on the probes.
    pub max_linear_derivative: f64,
    pub declared_linear_bound: f64,
    pub failures: Vec<String>,
}

impl DerivativeReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn max_error(&self) -> f64 {
        self.linear_vs_perturbation
            .max(self.intrinsic_vs_gradient)
            .max(self.particle_vs_finite_difference)
    }
}

/// Errors are relative to `max(|a|, |b|, 1e-3·scale)` where `scale` is the
/// largest reference magnitude in the same check, so values near a zero
/// crossing are judged against the check's dynamic range.
fn max_relative_error(pairs: &[(f64, f64)]) -> f64 {
    let scale = pairs.iter().map(|&(_, b)| b.abs()).fold(0.0, f64::max);
    pairs
        .iter()
        .map(|&(a, b)| {
            let denom = a.abs().max(b.abs()).max(1e-3 * scale).max(f64::MIN_POSITIVE);
            (a - b).abs() / denom
        })
        .fold(0.0, f64::max)
}

fn five_point(mut f: impl FnMut(f64) -> f64, h: f64) -> f64 {
    (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h)
}

pub fn validate_derivatives(functional: &dyn MeanFieldFunctional, probes: &ProbeSpec) -> DerivativeReport {
    let dim = functional.dim();
    let mut lin_pairs = Vec::new();
    let mut grad_pairs = Vec::new();
    let mut particle_pairs = Vec::new();
    let mut max_lin: f64 = 0.0;

    for m in &probes.measures {
        let field = functional.freeze(m);
        let mean = crate::measure::integrate(m, |y| field.potential(y));
        let centered = |x: &[f64]| field.potential(x) - mean;

        for x in &probes.points {
            let lin = centered(x);
            max_lin = max_lin.max(lin.abs());
            let dirac = Atoms::dirac(x);
            let fd = (functional.value(&Mixture::new(vec![(1.0 - MIX_STEP, m as &dyn Measure), (MIX_STEP, &dirac)]))
                - functional.value(&Mixture::new(vec![(1.0 + MIX_STEP, m as &dyn Measure), (-MIX_STEP, &dirac)])))
                / (2.0 * MIX_STEP);
            lin_pairs.push((lin, fd));

            let mut grad = vec![0.0; dim];
            field.gradient(x, &mut grad);
            for j in 0..dim {
                let mut y = x.clone();
                let fd = five_point(
                    |h| {
                        y[j] = x[j] + h;
                        centered(&y)
                    },
                    SPACE_STEP,
                );
                grad_pairs.push((grad[j], fd));
            }
        }

        // Gradient identity on uniform clouds.
        let n = m.len();
        let uniform = m.weights().iter().all(|w| (w - 1.0 / n as f64).abs() < 1e-15);
        if uniform {
            let base = m.positions().to_vec();
            for i in 0..n {
                let mut grad = vec![0.0; dim];
                field.gradient(&base[i * dim..(i + 1) * dim], &mut grad);
                for j in 0..dim {
                    let mut pos = base.clone();
                    let fd = five_point(
                        |h| {
                            pos[i * dim + j] = base[i * dim + j] + h;
                            let cloud = Atoms::uniform(dim, pos.clone()).expect("consistent shape");
                            n as f64 * functional.value(&cloud)
                        },
                        SPACE_STEP,
                    );
                    particle_pairs.push((grad[j], fd));
                }
            }
        }
    }

    let linear_vs_perturbation = max_relative_error(&lin_pairs);
    let intrinsic_vs_gradient = max_relative_error(&grad_pairs);
    let particle_vs_finite_difference = max_relative_error(&particle_pairs);
    let declared = functional.linear_bound();

    let mut failures = Vec::new();
    for (name, err) in [
        ("linear_vs_perturbation", linear_vs_perturbation),
        ("intrinsic_vs_gradient", intrinsic_vs_gradient),
        ("particle_vs_finite_difference", particle_vs_finite_difference),
    ] {
        if !(err <= TOLERANCE) {
            failures.push(format!("{name}: max relative error {err:.3e} > {TOLERANCE:e}"));
        }
    }
    if max_lin > declared * (1.0 + 1e-12) {
        failures.push(format!("linear_bound: observed |δF/δm| {max_lin:.6} exceeds declared {declared:.6}"));
    }

    DerivativeReport {
        functional: functional.name().to_string(),
        linear_vs_perturbation,
        intrinsic_vs_gradient,
        particle_vs_finite_difference,
        max_linear_derivative: max_lin,
        declared_linear_bound: declared,
        failures,
    }
}

/// Convenience: centered `δF/δm` of `functional` at `m` for every probe point.
pub fn linear_derivative_profile(functional: &dyn MeanFieldFunctional, m: &dyn Measure, points: &[Vec<f64>]) -> Vec<f64> {
    points.iter().map(|x| linear_derivative(functional, m, x).expect("dimension checked by caller")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{CompositeExpectation, FlippedIntrinsic, PairwiseInteraction, TwoLayerNetLoss, ZeroFunctional};

    #[test]
    fn zero_functional_has_no_error() {
        let f = ZeroFunctional { dim: 1 };
        let r = validate_derivatives(&f, &ProbeSpec::default_for(1, 1));
        assert_eq!(r.max_error(), 0.0);
        assert!(r.passed());
    }

    #[test]
    fn families_pass_default_probes() {
        let families: Vec<Box<dyn MeanFieldFunctional>> = vec![
            Box::new(CompositeExpectation::scalar_tanh(1.0, 0.5)),
            Box::new(PairwiseInteraction::gaussian(1, 1.0, 1.0).unwrap()),
            Box::new(PairwiseInteraction::gaussian(2, 0.7, 0.8).unwrap()),
            Box::new(TwoLayerNetLoss::new(vec![-1.0, 0.0, 1.0], vec![0.5, -0.2, 0.8], 5.0).unwrap()),
        ];
        for f in &families {
            let r = validate_derivatives(f.as_ref(), &ProbeSpec::default_for(f.dim(), 3));
            assert!(r.passed(), "{}: {:?}", f.name(), r.failures);
            assert!(r.max_error() < 1e-4);
        }
    }

    #[test]
    fn sign_error_is_caught() {
        let f = FlippedIntrinsic(Box::new(CompositeExpectation::scalar_tanh(1.0, 0.5)));
        let r = validate_derivatives(&f, &ProbeSpec::default_for(1, 3));
        assert!(!r.passed());
        assert!(r.failures.iter().any(|s| s.starts_with("intrinsic_vs_gradient")));
    }

    #[test]
    fn profile_is_centered_on_point_mass() {
        let f = PairwiseInteraction::gaussian(1, 1.0, 1.0).unwrap();
        let m = Atoms::dirac(&[0.0]);
        let p = linear_derivative_profile(&f, &m, &[vec![0.0]]);
        assert_eq!(p, vec![0.0]);
    }
}
