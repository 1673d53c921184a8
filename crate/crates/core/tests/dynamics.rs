mod common;

use std::sync::Arc;

use mfl_chaos::cloud::{sample_cloud, DistributionSpec, ParticleCloud};
use mfl_chaos::dynamics::{
    drift_mismatch, em_step_interacting, em_step_reference, run_coupled, second_moment_bound, CoupledSystem,
    MeanFieldOracle, MeanFieldPath, NoiseStreams, Observation, Observer, ReferenceCloud, SimParams,
};
use mfl_chaos::fit::{explained_variance, isotonic_nonincreasing};
use mfl_chaos::functionals::{
    CompositeExpectation, ConfiningPotential, MeanFieldFunctional, PairwiseInteraction, ZeroFunctional,
};
use mfl_chaos::grid1d::{GridDensity, GridProblem};
use mfl_chaos::harness::{analyze_sweep, run_sweep};
use mfl_chaos::rng::{StreamKey, NOISE};
use rand::Rng;
use rand_distr::StandardNormal;

const L: f64 = 8.0;

fn quad() -> ConfiningPotential {
    ConfiningPotential::quadratic(1.0).unwrap()
}

fn composite() -> CompositeExpectation {
    CompositeExpectation::scalar_tanh(2.0, 0.5)
}

fn path(f: &dyn MeanFieldFunctional, sigma: f64, init: GridDensity, dt: f64, steps: usize) -> Arc<MeanFieldPath> {
    let p = GridProblem::new(f, quad(), sigma, L, init.cells()).unwrap();
    Arc::new(MeanFieldPath::from_grid_flow(p, init, dt, steps, &[]).unwrap())
}

#[test]
fn no_drift_no_noise_leaves_cloud_unchanged() {
    let c0 = sample_cloud(&DistributionSpec::gaussian(vec![0.0, 1.0], 2.0), 7, 1).unwrap();
    let mut c = c0.clone();
    let noise = vec![0.0; c.positions().len()];
    em_step_interacting(&mut c, &ZeroFunctional { dim: 2 }, &ConfiningPotential::flat(), 1.0, 0.1, &noise).unwrap();
    assert_eq!(c, c0);
}

#[test]
fn pairwise_step_matches_hand_drift() {
    // m = ½(δ_{x¹} + δ_{x²}) gives D_mF(m, x¹) = ½ ∇w(x¹ − x²), since ∇w(0) = 0.
    let (a, l, dt) = (1.5, 0.8, 0.05);
    let f = PairwiseInteraction::gaussian(1, a, l).unwrap();
    let (x1, x2) = (0.3, -0.4);
    let grad_w = |z: f64| -a * z / (l * l) * (-z * z / (2.0 * l * l)).exp();
    let mut c = ParticleCloud::from_positions(1, vec![x1, x2]).unwrap();
    em_step_interacting(&mut c, &f, &ConfiningPotential::flat(), 1.0, dt, &[0.0, 0.0]).unwrap();
    let expect1 = x1 - dt * 0.5 * grad_w(x1 - x2);
    let expect2 = x2 - dt * 0.5 * grad_w(x2 - x1);
    assert!((c.positions()[0] - expect1).abs() < 1e-15);
    assert!((c.positions()[1] - expect2).abs() < 1e-15);
}

#[test]
fn single_particle_matches_discrete_ou_moments() {
    // x ← (1 − σ²dt/2) x + σ√dt ξ from x₀ = 1: mean ρᵏ, variance σ²dt Σ_{j<k} ρ^{2j}.
    let (paths, sigma, dt, steps) = (10_000, 1.2, 0.01, 100);
    let rho: f64 = 1.0 - 0.5 * sigma * sigma * dt;
    let mut c = ParticleCloud::from_positions(1, vec![1.0; paths]).unwrap();
    let mut noise = NoiseStreams::new(9, 0, paths, 1, 1);
    let mut xi = vec![0.0; paths];
    for _ in 0..steps {
        noise.fill(dt, &mut xi);
        // F ≡ 0: the particles do not interact, so one cloud holds independent paths.
        em_step_interacting(&mut c, &ZeroFunctional { dim: 1 }, &quad(), sigma, dt, &xi).unwrap();
    }
    let x = c.positions();
    let mean = x.iter().sum::<f64>() / paths as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (paths - 1) as f64;
    let exact_mean = rho.powi(steps);
    let exact_var = sigma * sigma * dt * (0..steps).map(|j| rho.powi(2 * j as i32)).sum::<f64>();
    let se_mean = (exact_var / paths as f64).sqrt();
    let se_var = exact_var * (2.0 / (paths - 1) as f64).sqrt();
    assert!((mean - exact_mean).abs() < 3.0 * se_mean, "{mean} vs {exact_mean}");
    assert!((var - exact_var).abs() < 3.0 * se_var, "{var} vs {exact_var}");
    // Continuous-time decay e^{−σ²t/2} is within the same band at this dt.
    assert!((mean - (-0.5 * sigma * sigma).exp()).abs() < 3.0 * se_mean);
}

#[test]
fn zero_functional_gap_stays_zero() {
    let f = ZeroFunctional { dim: 1 };
    let params = SimParams::with_regular_saves(1.0, 0.01, 2.0, 0.5, 4).unwrap();
    let init = DistributionSpec::gaussian(vec![1.0], 1.0);
    let oracle = MeanFieldOracle::Path(path(&f, 1.0, GridDensity::gaussian(L, 256, 1.0, 1.0).unwrap(), 0.01, 200));
    let mut sys = CoupledSystem::new(&init, 16, &params, 0, oracle).unwrap();
    let report = run_coupled(&mut sys, &f, &quad(), &params, &mut []).unwrap();
    assert!(report.completed);
    assert!(report.rows.iter().all(|r| r.gap_sq_per_particle == 0.0 && r.drift_mismatch == 0.0));
}

#[test]
fn initial_gap_is_mean_squared_distance() {
    let f = composite();
    let params = SimParams::with_regular_saves(1.0, 0.01, 0.1, 0.1, 4).unwrap();
    let a = sample_cloud(&DistributionSpec::gaussian(vec![0.0], 1.0), 5, 1).unwrap();
    let b = sample_cloud(&DistributionSpec::gaussian(vec![0.0], 1.0), 5, 2).unwrap();
    let direct = a.positions().iter().zip(b.positions()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / 5.0;
    let oracle = MeanFieldOracle::stationary(&f, GridDensity::gaussian(L, 256, 0.0, 1.0).unwrap());
    let mut sys = CoupledSystem::from_clouds(a, b, NoiseStreams::new(4, 0, 5, 1, 1), oracle, 0).unwrap();
    let report = run_coupled(&mut sys, &f, &quad(), &params, &mut []).unwrap();
    assert_eq!(report.rows[0].t, 0.0);
    assert!((report.rows[0].gap_sq_per_particle - direct).abs() < 1e-15);
}

#[test]
fn mismatch_vanishes_when_cloud_is_the_oracle() {
    let f = composite();
    let c = sample_cloud(&DistributionSpec::gaussian(vec![0.3], 1.0), 40, 5).unwrap();
    assert_eq!(drift_mismatch(&c, f.freeze(&c).as_ref(), &f, 1.0), 0.0);
    let z = ZeroFunctional { dim: 1 };
    assert_eq!(drift_mismatch(&c, z.freeze(&c).as_ref(), &z, 1.0), 0.0);
}

/// Second moment of the reference cloud at each save.
struct ReferenceMoment(Vec<f64>);

impl Observer for ReferenceMoment {
    fn observe(&mut self, _: &Observation, s: &CoupledSystem<'_>) -> mfl_chaos::Result<()> {
        self.0.push(s.reference().empirical_moment(2)?);
        Ok(())
    }
}

#[test]
fn reference_cloud_is_stationary_under_fixed_point_oracle() {
    let f = composite();
    let problem = GridProblem::new(&f, quad(), 1.0, L, 1024).unwrap();
    let star = problem.fixed_point_solve(0.5, 1e-12, 10_000).unwrap().density;
    let target = star.moment(2);
    let n = 4000;
    let params = SimParams::with_regular_saves(1.0, 0.01, 4.0, 1.0, 6).unwrap();
    let init = DistributionSpec::Grid(star.clone());
    let oracle = MeanFieldOracle::stationary(&f, star);
    let mut sys = CoupledSystem::new(&init, n, &params, 0, oracle).unwrap();
    let mut obs = ReferenceMoment(Vec::new());
    run_coupled(&mut sys, &f, &quad(), &params, &mut [&mut obs]).unwrap();
    let m4 = sys.reference().empirical_moment(4).unwrap();
    let se = ((m4 - target * target) / n as f64).sqrt();
    for (k, m2) in obs.0.iter().enumerate() {
        assert!((m2 - target).abs() < 4.0 * se, "save {k}: {m2} vs {target} ± {se}");
    }
}

#[test]
fn grid_and_cloud_oracles_agree() {
    let f = composite();
    let (sigma, dt, n, n_ref) = (1.0, 0.01, 64, 100_000);
    let params = SimParams::with_regular_saves(sigma, dt, 1.0, 1.0, 8).unwrap();
    let init = DistributionSpec::gaussian(vec![1.0], 1.0);
    let grid = path(&f, sigma, GridDensity::gaussian(L, 1024, 1.0, 1.0).unwrap(), dt, 100);
    let (mut g_grid, mut g_cloud) = (0.0, 0.0);
    for replica in 0..4 {
        let mut a = CoupledSystem::new(&init, n, &params, replica, MeanFieldOracle::Path(grid.clone())).unwrap();
        let ra = run_coupled(&mut a, &f, &quad(), &params, &mut []).unwrap();
        let reference =
            ReferenceCloud::new(&init, n_ref, &f, quad(), sigma, dt, params.seed, replica, 1).unwrap();
        let mut b = CoupledSystem::new(&init, n, &params, replica, MeanFieldOracle::Cloud(Box::new(reference))).unwrap();
        let rb = run_coupled(&mut b, &f, &quad(), &params, &mut []).unwrap();
        g_grid += ra.rows.last().unwrap().gap_sq_per_particle;
        g_cloud += rb.rows.last().unwrap().gap_sq_per_particle;
    }
    let rel = (g_grid - g_cloud).abs() / g_grid;
    assert!(rel < 0.10, "grid {g_grid} vs cloud {g_cloud}");
}

#[test]
fn reruns_are_bit_identical() {
    let f = PairwiseInteraction::gaussian(1, 1.0, 1.0).unwrap();
    let params = SimParams::with_regular_saves(1.0, 0.01, 1.0, 0.25, 11).unwrap();
    let init = DistributionSpec::gaussian(vec![0.5], 1.0);
    let run = || {
        let oracle =
            MeanFieldOracle::Path(path(&f, 1.0, GridDensity::gaussian(L, 256, 0.5, 1.0).unwrap(), 0.01, 100));
        let mut sys = CoupledSystem::new(&init, 24, &params, 3, oracle).unwrap();
        run_coupled(&mut sys, &f, &quad(), &params, &mut []).unwrap()
    };
    let first = run();
    let second = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(run);
    assert_eq!(first, second);
}

#[test]
fn permuting_particles_permutes_trajectories() {
    // Noise is drawn by particle identity, so relabelling the initial cloud
    // and its streams relabels the whole path.
    let f = PairwiseInteraction::gaussian(2, 1.0, 0.7).unwrap();
    let n = 6;
    let perm = [3usize, 0, 5, 1, 4, 2];
    let key = StreamKey::new(17, NOISE);
    let mut rngs: Vec<_> = (0..n as u64).map(|i| key.particle(i)).collect();
    let mut a = sample_cloud(&DistributionSpec::gaussian(vec![0.0, 0.0], 1.0), n, 17).unwrap();
    let mut b = a.permuted(&perm);
    let dt: f64 = 0.01;
    for _ in 0..200 {
        let xi: Vec<f64> =
            rngs.iter_mut().flat_map(|r| [0, 1].map(|_| dt.sqrt() * r.sample::<f64, _>(StandardNormal))).collect();
        let xi_perm: Vec<f64> = perm.iter().flat_map(|&p| [xi[2 * p], xi[2 * p + 1]]).collect();
        em_step_interacting(&mut a, &f, &quad(), 1.0, dt, &xi).unwrap();
        em_step_interacting(&mut b, &f, &quad(), 1.0, dt, &xi_perm).unwrap();
    }
    let expected = a.permuted(&perm);
    for (x, y) in expected.positions().iter().zip(b.positions()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn reference_step_ignores_other_particles() {
    let f = composite();
    let field = f.freeze(&GridDensity::gaussian(L, 256, 0.0, 1.0).unwrap());
    let mut a = ParticleCloud::from_positions(1, vec![0.2, -1.0, 2.0]).unwrap();
    let mut b = ParticleCloud::from_positions(1, vec![0.2]).unwrap();
    em_step_reference(&mut a, field.as_ref(), &quad(), 1.0, 0.1, &[0.05, 0.1, -0.2]).unwrap();
    em_step_reference(&mut b, field.as_ref(), &quad(), 1.0, 0.1, &[0.05]).unwrap();
    assert_eq!(a.positions()[0], b.positions()[0]);
}

#[test]
fn free_energy_descends_along_the_particle_system() {
    let cfg = common::small_config(&[128, 256], 8, 5.0);
    let run = run_sweep(&cfg, &cfg.sim_params().unwrap()).unwrap();
    let analysis = analyze_sweep(&cfg, &run).unwrap();
    for n in [128, 256] {
        let v: Vec<f64> = analysis.table.iter().filter(|r| r.n == n).map(|r| r.value_gap.unwrap()).collect();
        let iso = isotonic_nonincreasing(&v);
        let r2 = explained_variance(&v, &iso);
        assert!(r2 >= 0.95, "n = {n}: isotonic fit explains {r2}");
    }
}

#[test]
fn second_moment_stays_below_a_priori_bound() {
    let f = composite();
    let init = DistributionSpec::gaussian(vec![3.0], 2.0);
    let bound = second_moment_bound(&f, &quad(), 1.0, init.second_moment());
    let params = SimParams::with_regular_saves(1.0, 0.01, 10.0, 0.5, 2).unwrap();
    let oracle =
        MeanFieldOracle::Path(path(&f, 1.0, GridDensity::gaussian(L, 512, 3.0, 2.0).unwrap(), 0.01, 1000));
    let mut sys = CoupledSystem::new(&init, 200, &params, 0, oracle).unwrap();
    let report = run_coupled(&mut sys, &f, &quad(), &params, &mut []).unwrap();
    let sup = report.rows.iter().map(|r| r.moment2).fold(0.0, f64::max);
    assert!(sup <= bound, "{sup} > {bound}");
}
