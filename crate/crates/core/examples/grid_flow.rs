//! Mean-field Fokker-Planck flow on a grid: free-energy decay towards the
//! invariant measure and the oscillation of the Gibbs potential.
//!
//! cargo run --release --example grid_flow

use mfl_chaos::functionals::{CompositeExpectation, ConfiningPotential};
use mfl_chaos::grid1d::{GridDensity, GridFlow, GridProblem};

fn main() -> mfl_chaos::Result<()> {
    let f = CompositeExpectation::scalar_tanh(2.0, 0.5);
    let problem = GridProblem::new(&f, ConfiningPotential::quadratic(1.0)?, 1.0, 8.0, 1024)?;
    let star = problem.fixed_point_solve(0.5, 1e-13, 10_000)?;
    let f_star = problem.free_energy(&star.density)?;
    let mut flow = GridFlow::new(problem, GridDensity::gaussian(8.0, 1024, 1.0, 1.0)?, 0.01)?;
    println!("{:>6} {:>14} {:>12} {:>10}", "t", "F − F*", "mean", "osc(v)");
    for k in 0..=1000 {
        if k % 100 == 0 {
            let m = flow.density();
            println!(
                "{:>6.2} {:>14.6e} {:>12.6} {:>10.4}",
                flow.time(),
                problem.free_energy(m)? - f_star,
                m.mean(),
                problem.oscillation_of_v(m)?
            );
        }
        flow.step()?;
    }
    println!("distance to the fixed point {:.2e}", flow.density().sup_distance(&star.density));
    Ok(())
}
