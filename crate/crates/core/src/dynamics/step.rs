use crate::measure::Measure;
use crate::cloud::ParticleCloud;
use crate::error::{invalid, Error, Result};
use crate::functionals::{ConfiningPotential, FrozenField, MeanFieldFunctional};

/// Euler–Maruyama update of every particle against one frozen field:
/// `x ← x − (D_mF + (σ²/2)∇u)(x) dt + σ ξ`. The cloud is left untouched if
/// any coordinate becomes non-finite.
pub(crate) fn advance(
    cloud: &mut ParticleCloud,
    field: &dyn FrozenField,
    potential: &ConfiningPotential,
    sigma: f64,
    dt: f64,
    noise: &[f64],
    scratch: &mut Vec<f64>,
    step: usize,
) -> Result<()> {
    let d = cloud.dim();
    if noise.len() != cloud.positions().len() {
        return Err(Error::DimensionMismatch { expected: cloud.positions().len(), got: noise.len() });
    }
    let diffusivity = 0.5 * sigma * sigma;
    scratch.resize(cloud.positions().len(), 0.0);
    let mut g = vec![0.0; d];
    let mut gu = vec![0.0; d];
    for (i, x) in cloud.positions().chunks_exact(d).enumerate() {
        field.gradient(x, &mut g);
        potential.grad(x, &mut gu);
        for c in 0..d {
            let v = x[c] - (g[c] + diffusivity * gu[c]) * dt + sigma * noise[i * d + c];
            if !v.is_finite() {
                return Err(Error::NonFinite { step, what: format!("particle {i}, coordinate {c}") });
            }
            scratch[i * d + c] = v;
        }
    }
    cloud.positions_mut().copy_from_slice(scratch);
    Ok(())
}

/// One step of the `n`-particle system. Every particle sees the empirical
/// measure of the pre-step configuration; `noise` holds `√dt`-scaled
/// standard normals, row-major.
pub fn em_step_interacting(
    cloud: &mut ParticleCloud,
    functional: &dyn MeanFieldFunctional,
    potential: &ConfiningPotential,
    sigma: f64,
    dt: f64,
    noise: &[f64],
) -> Result<()> {
    check(cloud, functional.dim(), sigma, dt)?;
    let field = functional.freeze(cloud);
    advance(cloud, field.as_ref(), potential, sigma, dt, noise, &mut Vec::new(), 0)
}

/// One step of independent particles driven by a mean-field oracle.
pub fn em_step_reference(
    cloud: &mut ParticleCloud,
    oracle_field: &dyn FrozenField,
    potential: &ConfiningPotential,
    sigma: f64,
    dt: f64,
    noise: &[f64],
) -> Result<()> {
    check(cloud, cloud.dim(), sigma, dt)?;
    advance(cloud, oracle_field, potential, sigma, dt, noise, &mut Vec::new(), 0)
}

fn check(cloud: &ParticleCloud, dim: usize, sigma: f64, dt: f64) -> Result<()> {
    if cloud.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: cloud.dim() });
    }
    if !(sigma > 0.0) || !(dt > 0.0) {
        return Err(invalid("sigma, dt", "must be positive"));
    }
    Ok(())
}

/// `(1/(4σ²)) (1/n) Σᵢ |D_mF(m_X, xⁱ) − D_mF(m̄, xⁱ)|²`.
pub fn drift_mismatch(
    cloud: &ParticleCloud,
    oracle_field: &dyn FrozenField,
    functional: &dyn MeanFieldFunctional,
    sigma: f64,
) -> f64 {
    let d = cloud.dim();
    let empirical = functional.freeze(cloud);
    let (mut a, mut b) = (vec![0.0; d], vec![0.0; d]);
    let mut total = 0.0;
    for x in cloud.positions().chunks_exact(d) {
        empirical.gradient(x, &mut a);
        oracle_field.gradient(x, &mut b);
        total += a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    }
    total / (cloud.n() as f64 * 4.0 * sigma * sigma)
}

/// A priori bound on `sup_t E|X_t|²` for the continuous dynamics, from
/// `x·∇u(x) ≥ c|x|²`, `|D_mF| ≤ B` and Grönwall:
/// `E|X_0|² + 2(2B²/(σ²c) + σ²d)/(σ²c)`.
pub fn second_moment_bound(
    functional: &dyn MeanFieldFunctional,
    potential: &ConfiningPotential,
    sigma: f64,
    initial_second_moment: f64,
) -> f64 {
    let s2 = sigma * sigma;
    let c = potential.hessian_bounds().0;
    let b = functional.intrinsic_bound();
    let d = functional.dim() as f64;
    initial_second_moment + 2.0 * (2.0 * b * b / (s2 * c) + s2 * d) / (s2 * c)
}
