//! Checks the first variation and intrinsic derivative of each built-in
//! functional against finite differences.
//!
//! cargo run --release --example validate_derivatives

use mfl_chaos::functionals::validate::{validate_derivatives, ProbeSpec};
use mfl_chaos::functionals::{
    CompositeExpectation, MeanFieldFunctional, PairwiseInteraction, TwoLayerNetLoss, ZeroFunctional,
};

fn main() -> mfl_chaos::Result<()> {
    let families: Vec<Box<dyn MeanFieldFunctional>> = vec![
        Box::new(ZeroFunctional { dim: 2 }),
        Box::new(PairwiseInteraction::gaussian(2, 1.0, 0.8)?),
        Box::new(CompositeExpectation::scalar_tanh(2.0, 0.5)),
        Box::new(TwoLayerNetLoss::new(
            vec![-1.0, -0.3, 0.4, 1.2],
            vec![0.5, -0.2, 0.1, 0.7],
            TwoLayerNetLoss::DEFAULT_TRUNCATION,
        )?),
    ];
    println!("{:<12} {:>12} {:>12} {:>12}", "functional", "linear", "intrinsic", "particle");
    for f in &families {
        let r = validate_derivatives(f.as_ref(), &ProbeSpec::default_for(f.dim(), 1));
        println!(
            "{:<12} {:>12.2e} {:>12.2e} {:>12.2e}",
            f.name(),
            r.linear_vs_perturbation,
            r.intrinsic_vs_gradient,
            r.particle_vs_finite_difference
        );
        for msg in &r.failures {
            println!("  {msg}");
        }
    }
    Ok(())
}
