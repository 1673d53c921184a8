use mfl_chaos::cloud::{sample_cloud, sample_cloud_from, DistributionSpec, ParticleCloud};
use mfl_chaos::dynamics::{em_step_interacting, NoiseStreams};
use mfl_chaos::functionals::{ConfiningPotential, ZeroFunctional};
use mfl_chaos::grid1d::{GridDensity, GridProblem};
use mfl_chaos::metrics::{
    chain_entropy_check, empirical_w2_rate, free_energy_particle, relative_entropy_grid, w2_exact_assignment,
    w2_sinkhorn, DiscreteJoint, SinkhornOptions,
};
use mfl_chaos::rng::StreamKey;
use proptest::prelude::*;
use rand::Rng;

fn brute_force(a: &ParticleCloud, b: &ParticleCloud) -> f64 {
    fn permutations(k: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in 0..k {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                permutations(k, cur, used, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let n = a.n();
    let mut all = Vec::new();
    permutations(n, &mut Vec::new(), &mut vec![false; n], &mut all);
    assert_eq!(all.len(), (1..=n).product::<usize>());
    all.iter()
        .map(|p| {
            (0..n)
                .map(|i| a.particle(i).iter().zip(b.particle(p[i])).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
                .sum::<f64>()
                / n as f64
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn assignment_equals_brute_force() {
    let spec = DistributionSpec::gaussian(vec![0.0, 0.0], 1.0);
    for seed in 0..20 {
        let a = sample_cloud_from(&spec, 6, seed, "a", 0).unwrap();
        let b = sample_cloud_from(&spec, 6, seed, "b", 0).unwrap();
        let exact = w2_exact_assignment(&a, &b).unwrap();
        let brute = brute_force(&a, &b);
        assert!((exact - brute).abs() <= 1e-12 * (1.0 + brute), "seed {seed}: {exact} vs {brute}");
    }
}

fn cloud(n: usize) -> impl Strategy<Value = ParticleCloud> {
    prop::collection::vec(-3.0f64..3.0, 2 * n).prop_map(|p| ParticleCloud::from_positions(2, p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn assignment_w2_is_a_metric((a, b, c) in (1usize..=8).prop_flat_map(|n| (cloud(n), cloud(n), cloud(n)))) {
        let w = |x: &ParticleCloud, y: &ParticleCloud| w2_exact_assignment(x, y).unwrap().sqrt();
        prop_assert!(w(&a, &a) < 1e-12);
        prop_assert!((w(&a, &b) - w(&b, &a)).abs() < 1e-12);
        prop_assert!(w(&a, &c) <= w(&a, &b) + w(&b, &c) + 1e-9);
    }
}

#[test]
fn sinkhorn_error_shrinks_as_epsilon_halves_and_is_symmetric() {
    let spec = DistributionSpec::gaussian(vec![0.0, 0.0], 1.0);
    let a = sample_cloud_from(&spec, 24, 5, "a", 0).unwrap();
    let b = sample_cloud_from(&DistributionSpec::gaussian(vec![0.5, -0.3], 1.5), 24, 5, "b", 0).unwrap();
    let exact = w2_exact_assignment(&a, &b).unwrap();
    let mut last = f64::INFINITY;
    for eps in [0.16, 0.08, 0.04, 0.02, 0.01] {
        let opts = SinkhornOptions { relative_epsilon: eps, ..SinkhornOptions::default() };
        let ab = w2_sinkhorn(&a, &b, &opts).unwrap();
        let ba = w2_sinkhorn(&b, &a, &opts).unwrap();
        assert!(ab.converged && ba.converged);
        assert!((ab.cost - ba.cost).abs() < 1e-5 * exact, "eps {eps}: {} vs {}", ab.cost, ba.cost);
        let err = (ab.cost - exact).abs();
        assert!(err <= last + 1e-6 * exact, "eps {eps}: error {err} after {last}");
        last = err;
    }
}

/// Random mixture of two Gaussians on the grid.
fn random_density(rng: &mut impl Rng) -> GridDensity {
    let (m1, m2) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    let (v1, v2) = (rng.random_range(0.2..2.0), rng.random_range(0.2..2.0));
    let w: f64 = rng.random_range(0.05..0.95);
    GridDensity::from_fn(8.0, 512, |x| {
        w * (-(x - m1) * (x - m1) / (2.0 * v1)).exp() / v1.sqrt()
            + (1.0 - w) * (-(x - m2) * (x - m2) / (2.0 * v2)).exp() / v2.sqrt()
    })
    .unwrap()
}

#[test]
fn relative_entropy_is_nonnegative() {
    let mut rng = StreamKey::new(1, "densities").particle(0);
    for _ in 0..100 {
        let (p, q) = (random_density(&mut rng), random_density(&mut rng));
        assert!(relative_entropy_grid(&p, &q).unwrap() >= -1e-12);
    }
}

#[test]
fn chain_identity_on_random_joints() {
    let mut rng = StreamKey::new(2, "joints").particle(0);
    for _ in 0..1000 {
        let k = rng.random_range(1..=4);
        let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(2..=8)).collect();
        let j = DiscreteJoint::random_dirichlet(sizes, &mut rng).unwrap();
        let c = chain_entropy_check(&j);
        assert!(c.identity_error() <= 1e-10);
        assert!(c.inequality_holds(1e-10));
    }
}

#[test]
fn empirical_rate_is_reproducible_and_decreasing() {
    let spec = DistributionSpec::gaussian(vec![0.0], 1.0);
    let n_list = [16, 64, 256, 1024];
    let a = empirical_w2_rate(&spec, &n_list, 16, 3).unwrap();
    let b = empirical_w2_rate(&spec, &n_list, 16, 3).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.slope, b.slope);
    assert!(a.monotone_within_error());
    assert!(a.slope < 0.0);
}

#[test]
fn free_energy_of_zero_functional_relaxes_to_zero() {
    let (sigma, dt) = (1.0, 0.01);
    let zero = ZeroFunctional { dim: 1 };
    let u = ConfiningPotential::quadratic(1.0).unwrap();
    let problem = GridProblem::new(&zero, u, sigma, 8.0, 1024).unwrap();
    let init = DistributionSpec::gaussian(vec![2.0], 0.5);
    let mut clouds: Vec<ParticleCloud> =
        (0..8).map(|r| sample_cloud_from(&init, 2000, 7, "init", r).unwrap()).collect();
    let mut noises: Vec<NoiseStreams> = (0..8).map(|r| NoiseStreams::new(7, r, 2000, 1, 1)).collect();
    let mut xi = vec![0.0; 2000];
    let mut values = vec![free_energy_particle(&clouds, &zero, &problem, None).unwrap().value];
    for _ in 0..4 {
        for _ in 0..200 {
            for (c, nz) in clouds.iter_mut().zip(&mut noises) {
                nz.fill(dt, &mut xi);
                em_step_interacting(c, &zero, &u, sigma, dt, &xi).unwrap();
            }
        }
        values.push(free_energy_particle(&clouds, &zero, &problem, None).unwrap().value);
    }
    // Exact value at t = 0: ½ H(N(2, ½) | N(0, 1)) = ½ · ½(½ − 1 − ln ½ + 4).
    let h0 = 0.5 * (0.5 - 1.0 - 0.5f64.ln() + 4.0);
    assert!((values[0] - 0.5 * h0).abs() < 0.02, "{values:?}");
    assert!(values.windows(2).all(|w| w[1] < w[0] + 0.005), "{values:?}");
    assert!(values.last().unwrap().abs() < 0.01, "{values:?}");
}

#[test]
fn sample_of_reference_has_near_zero_entropy() {
    let zero = ZeroFunctional { dim: 1 };
    let problem = GridProblem::new(&zero, ConfiningPotential::quadratic(1.0).unwrap(), 1.3, 8.0, 1024).unwrap();
    let clouds: Vec<ParticleCloud> =
        (0..4).map(|s| sample_cloud(&DistributionSpec::gaussian(vec![0.0], 1.0), 20_000, s).unwrap()).collect();
    let e = free_energy_particle(&clouds, &zero, &problem, None).unwrap();
    assert!(e.value.abs() < 0.01, "{}", e.value);
}
