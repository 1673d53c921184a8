//! Propagation-of-chaos sweep: coupled gap, value gap and drift mismatch
//! against the number of particles.
//!
//! cargo run --release --example poc_sweep -- [config.json] [out_dir]

use std::path::PathBuf;
use std::time::Instant;

use mfl_chaos::harness::{cmd_poc_sweep, ExperimentConfig};

fn main() -> mfl_chaos::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let config = args.first().map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/poc_sweep.json")
    });
    let out = args.get(1).map(PathBuf::from);
    let cfg = ExperimentConfig::load(&config)?;
    let start = Instant::now();
    let report = cmd_poc_sweep(&cfg, out.as_deref())?;
    let a = &report.analysis;
    println!("finished in {:.1}s", start.elapsed().as_secs_f64());
    println!("{:>6} {:>12} {:>12} {:>12} {:>12} {:>8}", "n", "sup gap", "value gap", "mismatch", "H(m1|m̄)", "growth");
    for (k, l) in a.sup_gap.iter().enumerate() {
        let v = a.value_plateau.get(k).map_or(f64::NAN, |v| v.mean);
        let e = a.marginal_entropy_plateau.get(k).map_or(f64::NAN, |v| v.mean);
        println!(
            "{:>6} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>8.3}",
            l.n, l.mean, v, a.mismatch_plateau[k].mean, e, a.growth_ratio[k].mean
        );
    }
    let show = |name: &str, s: &mfl_chaos::harness::Slope| {
        println!("{name:<16} {:+.3}  [{:+.3}, {:+.3}]", s.slope, s.lower, s.upper)
    };
    show("sup gap slope", &a.sup_gap_slope);
    show("mismatch slope", &a.mismatch_slope);
    if let Some(s) = &a.value_slope {
        show("value slope", s);
    }
    for f in &a.early_fits {
        println!(
            "n = {:>4}: early value decay rate {:.3} [{:.3}, {:.3}], floor {:.3e}",
            f.n, f.fit.rate, f.rate_lower, f.rate_upper, f.fit.floor
        );
    }
    if let Some(h) = &report.halving {
        let worst = h.iter().map(|r| r.difference / r.half_width).fold(0.0, f64::max);
        println!("dt/2 check: {} of {} statistics within their interval (worst ratio {worst:.3})", h.iter().filter(|r| r.within).count(), h.len());
    }
    for f in &a.failures {
        println!("flagged: {f}");
    }
    Ok(())
}
