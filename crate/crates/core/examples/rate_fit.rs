//! Power-law and exponential-plus-floor fits with bootstrap intervals.
//!
//! cargo run --release --example rate_fit

use mfl_chaos::fit::{bootstrap_interval, fit_exp_plus_floor, fit_power_law, resample_indices};

fn main() -> mfl_chaos::Result<()> {
    let n: Vec<f64> = (3..=9).map(|k| f64::powi(2.0, k)).collect();
    let gap: Vec<f64> = n.iter().enumerate().map(|(k, n)| 0.6 / n * (1.0 + 0.05 * (k as f64).sin())).collect();
    let p = fit_power_law(&n, &gap)?;
    let (lo, hi) = bootstrap_interval(200, 0.95, 1, |rng| {
        let idx = resample_indices(rng, n.len());
        let (x, y): (Vec<f64>, Vec<f64>) = idx.iter().map(|&i| (n[i], gap[i])).unzip();
        fit_power_law(&x, &y).ok().map(|f| f.exponent)
    })?;
    println!("power law: exponent {:+.3} [{lo:+.3}, {hi:+.3}], prefactor {:.3}", p.exponent, p.prefactor);

    let t: Vec<f64> = (0..100).map(|k| 0.1 * k as f64).collect();
    let v: Vec<f64> = t.iter().map(|t| 0.4 * (-1.5 * t).exp() + 0.02 + 1e-3 * (7.0 * t).cos()).collect();
    let e = fit_exp_plus_floor(&t, &v)?;
    println!("exp + floor: amplitude {:.4}, rate {:.4}, floor {:.4}", e.amplitude, e.rate, e.floor);
    Ok(())
}
