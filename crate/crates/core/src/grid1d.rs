//! Deterministic one-dimensional solver for the mean-field flow.
//!
//! The flow `∂_t m = ∂_x((D_mF(m,·) + (σ²/2)u') m) + (σ²/2) ∂²_x m` is written
//! as `∂_t m = (σ²/2) ∂_x(e^{−V} ∂_x(e^{V} m))` with the Gibbs potential
//! `V = (2/σ²) δF/δm(m,·) + u`. Fluxes use the exponentially fitted
//! (Scharfetter–Gummel) discretization, so the discrete stationary state of
//! a step with frozen `V` is exactly the discrete Gibbs measure `∝ e^{−V}`.
//! That makes the grid Gibbs map, its fixed point and the grid flow agree to
//! rounding: `m_*` from [`GridProblem::fixed_point_solve`] does not move
//! under [`GridProblem::fokker_planck_step`].

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::functionals::{ConfiningPotential, MeanFieldFunctional};
use crate::measure::Measure;

/// Tolerance on `|Σ m h − 1|`.
pub const MASS_TOL: f64 = 1e-12;

/// Cells whose density is below this are excluded from log-based statistics.
pub const DEFAULT_MASS_FLOOR: f64 = 1e-12;

/// Normalized piecewise-constant density on `M` uniform cells of `[−L, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    half_width: f64,
    values: Vec<f64>,
    centers: Vec<f64>,
}

impl GridDensity {
    /// Normalizes `values` to unit mass. Negative entries are clipped.
    pub fn new(half_width: f64, values: Vec<f64>) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(invalid("half_width", "must be positive"));
        }
        if values.len() < 2 {
            return Err(invalid("cells", "need at least two cells"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("values", "must be finite"));
        }
        let h = 2.0 * half_width / values.len() as f64;
        let centers = (0..values.len()).map(|k| -half_width + (k as f64 + 0.5) * h).collect();
        let mut g = Self { half_width, values, centers };
        g.clip_and_renormalize()?;
        Ok(g)
    }

    /// Samples `f` at cell centers and normalizes.
    pub fn from_fn(half_width: f64, cells: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = 2.0 * half_width / cells as f64;
        let values = (0..cells).map(|k| f(-half_width + (k as f64 + 0.5) * h)).collect();
        Self::new(half_width, values)
    }

    /// Normalized `N(mean, variance)` restricted to the grid.
    pub fn gaussian(half_width: f64, cells: usize, mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(invalid("variance", "must be positive"));
        }
        Self::from_fn(half_width, cells, |x| (-(x - mean) * (x - mean) / (2.0 * variance)).exp())
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / self.values.len() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.h()
    }

    pub fn check_normalized(&self) -> Result<()> {
        let mass = self.mass();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::NotNormalized { mass });
        }
        Ok(())
    }

    /// Clips negative values to zero and rescales to unit mass. Returns the
    /// clipped mass.
    pub fn clip_and_renormalize(&mut self) -> Result<f64> {
        let h = self.h();
        let mut clipped = 0.0;
        for v in &mut self.values {
            if *v < 0.0 {
                clipped -= *v * h;
                *v = 0.0;
            }
        }
        let mass = self.mass();
        if !(mass > 0.0) {
            return Err(Error::NotNormalized { mass });
        }
        self.values.iter_mut().for_each(|v| *v /= mass);
        Ok(clipped)
    }

    /// Density at `x`, zero outside the domain.
    pub fn density_at(&self, x: f64) -> f64 {
        if x < -self.half_width || x >= self.half_width {
            return 0.0;
        }
        let k = (((x + self.half_width) / self.h()) as usize).min(self.cells() - 1);
        self.values[k]
    }

    /// Mass in `[a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        let a = a.max(-self.half_width);
        let b = b.min(self.half_width);
        if b <= a {
            return 0.0;
        }
        let h = self.h();
        let ka = (((a + self.half_width) / h) as usize).min(self.cells() - 1);
        let kb = (((b + self.half_width) / h) as usize).min(self.cells() - 1);
        let left = |k: usize| -self.half_width + k as f64 * h;
        if ka == kb {
            return self.values[ka] * (b - a);
        }
        let mut total = self.values[ka] * (left(ka + 1) - a) + self.values[kb] * (b - left(kb));
        total += self.values[ka + 1..kb].iter().sum::<f64>() * h;
        total
    }

    /// Quantile of the piecewise-constant law.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let h = self.h();
        let target = u.clamp(0.0, 1.0);
        let mut acc = 0.0;
        for (k, v) in self.values.iter().enumerate() {
            let p = v * h;
            if acc + p >= target && p > 0.0 {
                return -self.half_width + (k as f64 + (target - acc) / p) * h;
            }
            acc += p;
        }
        self.half_width
    }

    /// `∫ |x|^q m(dx)` (midpoint rule).
    pub fn moment(&self, q: i32) -> f64 {
        let h = self.h();
        self.values.iter().zip(&self.centers).map(|(v, x)| v * h * x.abs().powi(q)).sum()
    }

    pub fn mean(&self) -> f64 {
        let h = self.h();
        self.values.iter().zip(&self.centers).map(|(v, x)| v * h * x).sum()
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// CSV with columns `cell_center, density`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cell_center", "density"])?;
        for (x, v) in self.centers.iter().zip(&self.values) {
            w.write_record([format!("{x:e}"), format!("{v:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl Measure for GridDensity {
    fn dim(&self) -> usize {
        1
    }
    fn len(&self) -> usize {
        self.values.len()
    }
    fn atom(&self, k: usize) -> (f64, &[f64]) {
        (self.values[k] * self.h(), std::slice::from_ref(&self.centers[k]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Implicit in the density with the Gibbs potential frozen at the start
    /// of the step. Unconditionally stable and positivity preserving.
    #[default]
    SemiImplicit,
    /// Forward Euler; requires `dt ≤ h²/σ²`.
    Explicit,
}

#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub density: GridDensity,
    /// First-order-condition oscillation at the returned density.
    pub residual: f64,
    pub iterations: usize,
    /// Sup-norm change of the last iteration.
    pub last_change: f64,
    pub converged: bool,
}

/// Functional, potential, temperature and grid geometry of a 1D problem.
#[derive(Clone, Copy)]
pub struct GridProblem<'a> {
    pub functional: &'a dyn MeanFieldFunctional,
    pub potential: ConfiningPotential,
    pub sigma: f64,
    pub half_width: f64,
    pub cells: usize,
    pub mass_floor: f64,
}

impl<'a> GridProblem<'a> {
    pub fn new(
        functional: &'a dyn MeanFieldFunctional,
        potential: ConfiningPotential,
        sigma: f64,
        half_width: f64,
        cells: usize,
    ) -> Result<Self> {
        if functional.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: functional.dim() });
        }
        if !(sigma > 0.0) {
            return Err(invalid("sigma", "must be positive"));
        }
        if cells < 2 || !(half_width > 0.0) {
            return Err(invalid("grid", "need at least two cells on a nonempty domain"));
        }
        Ok(Self { functional, potential, sigma, half_width, cells, mass_floor: DEFAULT_MASS_FLOOR })
    }

    pub fn with_mass_floor(mut self, floor: f64) -> Self {
        self.mass_floor = floor;
        self
    }

    fn diffusivity(&self) -> f64 {
        0.5 * self.sigma * self.sigma
    }

    fn check_grid(&self, m: &GridDensity) -> Result<()> {
        if m.cells() != self.cells || (m.half_width() - self.half_width).abs() > 0.0 {
            return Err(invalid("density", "grid geometry does not match the problem"));
        }
        m.check_normalized()
    }

    /// Gibbs potential `V = (2/σ²) δF/δm(m, ·) + u` at cell centers.
    pub fn gibbs_potential(&self, m: &GridDensity) -> Vec<f64> {
        let field = self.functional.freeze(m);
        let k = 1.0 / self.diffusivity();
        m.centers().iter().map(|&x| k * field.potential(&[x]) + self.potential.eval(&[x])).collect()
    }

    fn gibbs_from_potential(&self, v: &[f64]) -> Result<GridDensity> {
        let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
        GridDensity::new(self.half_width, v.iter().map(|vk| (-(vk - vmin)).exp()).collect())
    }

    /// Reference measure `μ ∝ e^{−u}` on the grid.
    pub fn reference_measure(&self) -> Result<GridDensity> {
        let h = 2.0 * self.half_width / self.cells as f64;
        let v: Vec<f64> =
            (0..self.cells).map(|k| self.potential.eval(&[-self.half_width + (k as f64 + 0.5) * h])).collect();
        self.gibbs_from_potential(&v)
    }

    /// `Φ(m) ∝ exp(−((2/σ²) δF/δm(m, ·) + u))`.
    pub fn gibbs_map(&self, m: &GridDensity) -> Result<GridDensity> {
        self.check_grid(m)?;
        self.gibbs_from_potential(&self.gibbs_potential(m))
    }

    /// Damped Picard iteration `m ← (1−θ) m + θ Φ(m)` from `μ` until the
    /// sup-norm change drops below `tol`.
    pub fn fixed_point_solve(&self, damping: f64, tol: f64, max_iter: usize) -> Result<FixedPoint> {
        if !(damping > 0.0 && damping <= 1.0) {
            return Err(invalid("damping", format!("{damping} must lie in (0, 1]")));
        }
        let mut m = self.reference_measure()?;
        let mut last_change = f64::INFINITY;
        let mut iterations = 0;
        while iterations < max_iter {
            iterations += 1;
            let phi = self.gibbs_map(&m)?;
            let values = m.values().iter().zip(phi.values()).map(|(a, b)| (1.0 - damping) * a + damping * b).collect();
            let next = GridDensity::new(self.half_width, values)?;
            last_change = next.sup_distance(&m);
            m = next;
            if last_change < tol {
                break;
            }
        }
        let residual = self.foc_residual(&m)?;
        Ok(FixedPoint { density: m, residual, iterations, last_change, converged: last_change < tol })
    }

    fn retained_oscillation(&self, m: &GridDensity, expr: impl Fn(usize) -> f64) -> Result<f64> {
        let (lo, hi) = m
            .values()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > self.mass_floor)
            .map(|(k, _)| expr(k))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e), hi.max(e)));
        if lo > hi {
            return Err(Error::EmptySupport { floor: self.mass_floor });
        }
        Ok(hi - lo)
    }

    /// Oscillation of `δF/δm(m, ·) + (σ²/2) log m + (σ²/2) u` over cells
    /// above the mass floor. Zero exactly at the minimizer.
    pub fn foc_residual(&self, m: &GridDensity) -> Result<f64> {
        self.check_grid(m)?;
        let field = self.functional.freeze(m);
        let d = self.diffusivity();
        self.retained_oscillation(m, |k| {
            let x = m.centers()[k];
            field.potential(&[x]) + d * m.values()[k].ln() + d * self.potential.eval(&[x])
        })
    }

    /// Oscillation of `v = −log(m / Φ(m))` over cells above the mass floor.
    pub fn oscillation_of_v(&self, m: &GridDensity) -> Result<f64> {
        let phi = self.gibbs_map(m)?;
        self.retained_oscillation(m, |k| -(m.values()[k] / phi.values()[k]).ln())
    }

    /// `F^σ(m) = F(m) + (σ²/2) H(m | μ)`.
    pub fn free_energy(&self, m: &GridDensity) -> Result<f64> {
        self.check_grid(m)?;
        let mu = self.reference_measure()?;
        let h = m.h();
        let entropy: f64 = m
            .values()
            .iter()
            .zip(mu.values())
            .filter(|(&a, _)| a > 0.0)
            .map(|(&a, &b)| a * h * (a / b).ln())
            .sum();
        Ok(self.functional.value(m) + self.diffusivity() * entropy)
    }

    /// One finite-volume step of the mean-field Fokker–Planck equation with
    /// no-flux boundaries.
    pub fn fokker_planck_step(&self, m: &GridDensity, dt: f64, scheme: Scheme) -> Result<GridDensity> {
        self.check_grid(m)?;
        if !(dt > 0.0) {
            return Err(invalid("dt", "must be positive"));
        }
        let h = m.h();
        let d = self.diffusivity();
        if scheme == Scheme::Explicit {
            let bound = h * h / (self.sigma * self.sigma);
            if dt > bound {
                return Err(Error::Cfl { dt, bound });
            }
        }
        let v = self.gibbs_potential(m);
        let r = dt * d / (h * h);
        let cells = m.cells();
        // Flux through face k+1/2 is (d/h)(bp[k] m_k − bm[k] m_{k+1}).
        let mut bp = vec![0.0; cells - 1];
        let mut bm = vec![0.0; cells - 1];
        for k in 0..cells - 1 {
            let dv = v[k + 1] - v[k];
            bp[k] = bernoulli(dv);
            bm[k] = bernoulli(-dv);
        }
        let old = m.values();
        let values = match scheme {
            Scheme::Explicit => (0..cells)
                .map(|k| {
                    let out = if k + 1 < cells { bp[k] * old[k] - bm[k] * old[k + 1] } else { 0.0 };
                    let inn = if k > 0 { bp[k - 1] * old[k - 1] - bm[k - 1] * old[k] } else { 0.0 };
                    old[k] - r * (out - inn)
                })
                .collect(),
            Scheme::SemiImplicit => {
                let mut lower = vec![0.0; cells];
                let mut diag = vec![1.0; cells];
                let mut upper = vec![0.0; cells];
                for k in 0..cells - 1 {
                    diag[k] += r * bp[k];
                    upper[k] = -r * bm[k];
                    diag[k + 1] += r * bm[k];
                    lower[k + 1] = -r * bp[k];
                }
                solve_tridiagonal(&lower, &diag, &upper, old)
            }
        };
        GridDensity::new(self.half_width, values)
    }
}

/// `B(z) = z / (e^z − 1)`.
fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 - 0.5 * z + z * z / 12.0
    } else {
        z / z.exp_m1()
    }
}

/// Thomas algorithm; the systems built here are column diagonally dominant.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    x[0] = rhs[0] / diag[0];
    for k in 1..n {
        let denom = diag[k] - lower[k] * c[k - 1];
        c[k] = upper[k] / denom;
        x[k] = (rhs[k] - lower[k] * x[k - 1]) / denom;
    }
    for k in (0..n - 1).rev() {
        x[k] -= c[k] * x[k + 1];
    }
    x
}

/// Grid trajectory of the mean-field flow.
pub struct GridFlow<'a> {
    problem: GridProblem<'a>,
    density: GridDensity,
    dt: f64,
    scheme: Scheme,
    steps: usize,
}

impl<'a> GridFlow<'a> {
    pub fn new(problem: GridProblem<'a>, initial: GridDensity, dt: f64) -> Result<Self> {
        problem.check_grid(&initial)?;
        if !(dt > 0.0) {
            return Err(invalid("dt", "must be positive"));
        }
        Ok(Self { problem, density: initial, dt, scheme: Scheme::SemiImplicit, steps: 0 })
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn problem(&self) -> &GridProblem<'a> {
        &self.problem
    }

    pub fn density(&self) -> &GridDensity {
        &self.density
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&mut self) -> Result<&GridDensity> {
        self.density = self.problem.fokker_planck_step(&self.density, self.dt, self.scheme)?;
        self.steps += 1;
        Ok(&self.density)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{CompositeExpectation, PairwiseInteraction, ZeroFunctional};

    const L: f64 = 8.0;

    fn quad() -> ConfiningPotential {
        ConfiningPotential::quadratic(1.0).unwrap()
    }

    #[test]
    fn gibbs_of_zero_functional_is_reference() {
        let zero = ZeroFunctional { dim: 1 };
        let p = GridProblem::new(&zero, quad(), 1.3, L, 1024).unwrap();
        let m = GridDensity::gaussian(L, 1024, 2.0, 0.5).unwrap();
        let phi = p.gibbs_map(&m).unwrap();
        assert!(phi.sup_distance(&p.reference_measure().unwrap()) < 1e-15);
        // N(0,1): second moment 1 up to O(h²).
        assert!((phi.moment(2) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn gibbs_map_matches_direct_quadrature() {
        // g(y) = y²/2, φ = tanh, m ≈ spike at 1.
        let f = CompositeExpectation::scalar_tanh(1.0, 0.0);
        let cells = 2048;
        let p = GridProblem::new(&f, quad(), 1.0, L, cells).unwrap();
        let h = 2.0 * L / cells as f64;
        let spike = GridDensity::from_fn(L, cells, |x| if (x - 1.0).abs() < h { 1.0 } else { 0.0 }).unwrap();
        let phi = p.gibbs_map(&spike).unwrap();
        // Independent route: the spike's tanh mean, then Simpson quadrature of
        // the unnormalized density on a finer mesh.
        let ybar: f64 = spike.centers().iter().zip(spike.values()).map(|(x, v)| v * h * x.tanh()).sum();
        let dens = |x: f64| (-2.0 * ybar * x.tanh() - 0.5 * x * x).exp();
        let fine = 20_000;
        let hf = 2.0 * L / fine as f64;
        let z: f64 = (0..=fine)
            .map(|k| {
                let w = if k == 0 || k == fine { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                w * dens(-L + k as f64 * hf)
            })
            .sum::<f64>()
            * hf
            / 3.0;
        for x in [-2.0f64, -0.5, 0.0, 0.7, 3.0] {
            let k = ((x + L) / h) as usize;
            let xc = phi.centers()[k];
            assert!((phi.values()[k] - dens(xc) / z).abs() < 1e-5 * dens(xc) / z + 1e-12);
        }
    }

    #[test]
    fn zero_functional_fixed_point_in_one_pass() {
        let zero = ZeroFunctional { dim: 1 };
        let p = GridProblem::new(&zero, quad(), 1.0, L, 512).unwrap();
        let fp = p.fixed_point_solve(0.5, 1e-13, 100).unwrap();
        assert_eq!(fp.iterations, 1);
        assert!(fp.converged);
        assert!(fp.residual < 1e-12);
        let mu = p.reference_measure().unwrap();
        assert!(p.foc_residual(&mu).unwrap() < 1e-10);
    }

    #[test]
    fn pairwise_fixed_point_is_damping_independent() {
        let w = PairwiseInteraction::gaussian(1, 1.0, 1.0).unwrap();
        let p = GridProblem::new(&w, quad(), 1.0, L, 512).unwrap();
        let a = p.fixed_point_solve(0.5, 1e-13, 5000).unwrap();
        let b = p.fixed_point_solve(1.0, 1e-13, 5000).unwrap();
        assert!(a.converged && b.converged);
        assert!(a.residual < 1e-8, "residual {}", a.residual);
        assert!(a.density.sup_distance(&b.density) < 1e-11);
    }

    #[test]
    fn foc_residual_detects_non_minimizer() {
        let zero = ZeroFunctional { dim: 1 };
        let p = GridProblem::new(&zero, quad(), 1.0, L, 512).unwrap();
        let wide = GridDensity::gaussian(L, 512, 0.0, 2.0).unwrap();
        assert!(p.foc_residual(&wide).unwrap() > 1.0);
    }

    #[test]
    fn empty_support_is_an_error() {
        let zero = ZeroFunctional { dim: 1 };
        let p = GridProblem::new(&zero, quad(), 1.0, L, 64).unwrap().with_mass_floor(10.0);
        let m = p.reference_measure().unwrap();
        assert!(matches!(p.foc_residual(&m), Err(Error::EmptySupport { .. })));
    }

    #[test]
    fn stationary_under_flow() {
        let f = CompositeExpectation::scalar_tanh(1.0, 0.5);
        let p = GridProblem::new(&f, quad(), 1.0, L, 1024).unwrap();
        let fp = p.fixed_point_solve(0.5, 1e-14, 10_000).unwrap();
        for dt in [1e-3, 0.1, 5.0] {
            let next = p.fokker_planck_step(&fp.density, dt, Scheme::SemiImplicit).unwrap();
            assert!(next.sup_distance(&fp.density) < 1e-8);
        }
    }

    #[test]
    fn ou_mean_decays_at_half_sigma_squared() {
        let zero = ZeroFunctional { dim: 1 };
        let sigma = 1.2;
        let p = GridProblem::new(&zero, quad(), sigma, L, 2048).unwrap();
        let mut flow = GridFlow::new(p, GridDensity::gaussian(L, 2048, 1.0, 1.0).unwrap(), 1e-3).unwrap();
        for _ in 0..1000 {
            flow.step().unwrap();
            assert!((flow.density().mass() - 1.0).abs() < 1e-12);
        }
        let expected = (-0.5 * sigma * sigma * 1.0f64).exp();
        assert!((flow.density().mean() - expected).abs() < 0.01 * expected);
    }

    #[test]
    fn explicit_scheme_enforces_cfl() {
        let zero = ZeroFunctional { dim: 1 };
        let p = GridProblem::new(&zero, quad(), 1.0, L, 256).unwrap();
        let m = GridDensity::gaussian(L, 256, 0.0, 1.0).unwrap();
        let h = m.h();
        assert!(matches!(p.fokker_planck_step(&m, 2.0 * h * h, Scheme::Explicit), Err(Error::Cfl { .. })));
        let a = p.fokker_planck_step(&m, 0.5 * h * h, Scheme::Explicit).unwrap();
        assert!((a.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_energy_dissipates() {
        let f = CompositeExpectation::scalar_tanh(1.0, 0.5);
        let p = GridProblem::new(&f, quad(), 1.0, L, 512).unwrap();
        let mut flow = GridFlow::new(p, GridDensity::gaussian(L, 512, 1.0, 1.0).unwrap(), 1e-2).unwrap();
        let mut prev = p.free_energy(flow.density()).unwrap();
        for _ in 0..300 {
            flow.step().unwrap();
            let e = p.free_energy(flow.density()).unwrap();
            assert!(e <= prev + 1e-10, "{e} > {prev}");
            prev = e;
        }
    }

    #[test]
    fn v_vanishes_at_fixed_point() {
        let zero = ZeroFunctional { dim: 1 };
        let p = GridProblem::new(&zero, quad(), 0.7, L, 512).unwrap();
        let mu = p.reference_measure().unwrap();
        assert!(p.oscillation_of_v(&mu).unwrap() < 1e-12);
    }

    #[test]
    fn mass_between_and_quantiles() {
        let g = GridDensity::gaussian(L, 256, 0.0, 1.0).unwrap();
        assert!((g.mass_between(-L, L) - 1.0).abs() < 1e-12);
        assert!((g.mass_between(-20.0, 0.0) - 0.5).abs() < 1e-12);
        let split = g.mass_between(-1.0, 0.3) + g.mass_between(0.3, 2.0);
        assert!((split - g.mass_between(-1.0, 2.0)).abs() < 1e-14);
        assert!(g.inverse_cdf(0.5).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let g = GridDensity::new(1.0, vec![1.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "cell_center,density\n-5e-1,5e-1\n5e-1,5e-1\n");
    }
}
