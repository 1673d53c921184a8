//! Exact assignment against entropic (Sinkhorn) W2 between two clouds.
//!
//! cargo run --release --example transport

use mfl_chaos::cloud::{sample_cloud_from, DistributionSpec};
use mfl_chaos::metrics::{w2_exact_assignment, w2_sinkhorn, SinkhornOptions};

fn main() -> mfl_chaos::Result<()> {
    let a = sample_cloud_from(&DistributionSpec::gaussian(vec![0.0, 0.0], 1.0), 128, 3, "a", 0)?;
    let b = sample_cloud_from(&DistributionSpec::gaussian(vec![1.0, 0.0], 2.0), 128, 3, "b", 0)?;
    let exact = w2_exact_assignment(&a, &b)?;
    println!("assignment W2² {exact:.6}");
    for eps in [0.1, 0.03, 0.01, 0.003] {
        let s = w2_sinkhorn(&a, &b, &SinkhornOptions { relative_epsilon: eps, ..SinkhornOptions::default() })?;
        println!(
            "sinkhorn eps {eps:<6} W2² {:.6}  rel. error {:.2e}  converged {}",
            s.cost,
            (s.cost - exact).abs() / exact,
            s.converged
        );
    }
    Ok(())
}
