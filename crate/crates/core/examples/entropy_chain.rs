//! Chain rule and full-conditional inequality for entropies of random
//! discrete joints.
//!
//! cargo run --release --example entropy_chain

use mfl_chaos::metrics::{chain_entropy_check, DiscreteJoint};
use mfl_chaos::rng::StreamKey;

fn main() -> mfl_chaos::Result<()> {
    let mut rng = StreamKey::new(5, "joints").particle(0);
    println!("{:<10} {:>12} {:>12} {:>12}", "sizes", "Σ H(i|−i)", "chain", "joint");
    for sizes in [vec![2, 2], vec![3, 4, 2], vec![2, 2, 2, 2], vec![8, 5, 3]] {
        let label = sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("x");
        let c = chain_entropy_check(&DiscreteJoint::random_dirichlet(sizes, &mut rng)?);
        println!("{label:<10} {:>12.6} {:>12.6} {:>12.6}", c.full_conditional, c.chain, c.joint);
    }
    Ok(())
}
