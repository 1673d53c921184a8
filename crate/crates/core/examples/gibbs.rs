//! Invariant measure of a one-dimensional problem by damped fixed-point
//! iteration on the Gibbs map.
//!
//! cargo run --release --example gibbs -- [config.json] [out_dir]

use std::path::PathBuf;

use mfl_chaos::harness::{cmd_gibbs, ExperimentConfig};

fn main() -> mfl_chaos::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let config = args
        .first()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/pairwise.json"));
    let cfg = ExperimentConfig::load(&config)?;
    let r = cmd_gibbs(&cfg, args.get(1).map(PathBuf::from).as_deref())?;
    println!("converged {} after {} iterations", r.converged, r.iterations);
    println!("first-order residual {:.2e}", r.residual);
    println!("mean {:.6}  second moment {:.6}", r.mean, r.second_moment);
    println!("free energy {:.8}", r.free_energy);
    Ok(())
}
