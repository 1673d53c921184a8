//! Expected squared W2 distance between an i.i.d. sample and its law, with a
//! fitted power of n.
//!
//! cargo run --release --example empirical_rate

use mfl_chaos::cloud::DistributionSpec;
use mfl_chaos::metrics::empirical_w2_rate;

fn main() -> mfl_chaos::Result<()> {
    let n_list: Vec<usize> = (4..=12).map(|k| 1 << k).collect();
    for (name, law) in [
        ("N(0, 1)", DistributionSpec::gaussian(vec![0.0], 1.0)),
        ("U[-1, 1]", DistributionSpec::Uniform { low: -1.0, high: 1.0, dim: 1 }),
    ] {
        let r = empirical_w2_rate(&law, &n_list, 32, 7)?;
        println!("{name}");
        for row in &r.rows {
            println!("  n = {:>5}  E W2² = {:.4e} ± {:.1e}", row.n, row.mean_value, row.stderr);
        }
        println!("  slope {:+.3} [{:+.3}, {:+.3}]", r.slope, r.slope_interval.0, r.slope_interval.1);
    }
    Ok(())
}
