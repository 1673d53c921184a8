//! One coupled run: n interacting particles and n independent copies of
//! the mean-field process driven by the same Brownian motions.
//!
//! cargo run --release --example coupled_run -- [n]

use mfl_chaos::cloud::DistributionSpec;
use mfl_chaos::dynamics::{run_coupled, CoupledSystem, MeanFieldOracle, MeanFieldPath, SimParams};
use mfl_chaos::functionals::{CompositeExpectation, ConfiningPotential};
use mfl_chaos::grid1d::{GridDensity, GridProblem};
use std::sync::Arc;

fn main() -> mfl_chaos::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    let (sigma, dt, t_end): (f64, f64, f64) = (1.0, 0.01, 10.0);
    let f = CompositeExpectation::scalar_tanh(2.0, 0.5);
    let u = ConfiningPotential::quadratic(1.0)?;
    let problem = GridProblem::new(&f, u.clone(), sigma, 8.0, 1024)?;
    let steps = (t_end / dt).round() as usize;
    let path = MeanFieldPath::from_grid_flow(problem, GridDensity::gaussian(8.0, 1024, 1.0, 1.0)?, dt, steps, &[])?;
    let params = SimParams::with_regular_saves(sigma, dt, t_end, 1.0, 42)?;
    let init = DistributionSpec::gaussian(vec![1.0], 1.0);
    let mut sys = CoupledSystem::new(&init, n, &params, 0, MeanFieldOracle::Path(Arc::new(path)))?;
    let report = run_coupled(&mut sys, &f, &u, &params, &mut [])?;
    println!("n = {n}");
    println!("{:>6} {:>14} {:>14}", "t", "gap²/n", "mismatch");
    for r in &report.rows {
        println!("{:>6.2} {:>14.6e} {:>14.6e}", r.t, r.gap_sq_per_particle, r.drift_mismatch);
    }
    Ok(())
}
