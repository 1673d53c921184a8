//! Least-squares fits, bootstrap intervals and isotonic regression.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Default number of bootstrap resamples.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    weighted_linear_fit(x, y, None)
}

fn weighted_linear_fit(x: &[f64], y: &[f64], w: Option<&[f64]>) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::Degenerate("need at least two points".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(invalid("data", "must be finite"));
    }
    let weight = |i: usize| w.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..x.len()).map(weight).sum();
    let mx = (0..x.len()).map(|i| weight(i) * x[i]).sum::<f64>() / sw;
    let my = (0..x.len()).map(|i| weight(i) * y[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..x.len()).map(|i| weight(i) * (x[i] - mx).powi(2)).sum();
    let sxy: f64 = (0..x.len()).map(|i| weight(i) * (x[i] - mx) * (y[i] - my)).sum();
    let syy: f64 = (0..x.len()).map(|i| weight(i) * (y[i] - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("abscissae have zero variance".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { (sxy * sxy / (sxx * syy)).min(1.0) } else { 1.0 };
    Ok(LinearFit { slope, intercept: my - slope * mx, r_squared })
}

/// `y ≈ a·x^b` fitted on `(log x, log y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLaw {
    pub prefactor: f64,
    pub exponent: f64,
    pub r_squared: f64,
}

pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerLaw> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(invalid("data", "a power law needs positive values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let f = linear_fit(&lx, &ly)?;
    Ok(PowerLaw { prefactor: f.intercept.exp(), exponent: f.slope, r_squared: f.r_squared })
}

/// `y ≈ A e^{−r t} + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpPlusFloor {
    pub amplitude: f64,
    pub rate: f64,
    pub floor: f64,
    /// Sum of squared relative residuals.
    pub loss: f64,
}

impl ExpPlusFloor {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (-self.rate * t).exp() + self.floor
    }
}

/// For a fixed rate the model is linear in `(A, c)`; those are solved by
/// weighted least squares on relative residuals and the rate by a log-spaced
/// scan followed by golden-section refinement.
pub fn fit_exp_plus_floor(t: &[f64], y: &[f64]) -> Result<ExpPlusFloor> {
    if t.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: t.len(), got: y.len() });
    }
    if t.len() < 4 {
        return Err(Error::Degenerate("need at least four points".into()));
    }
    if y.iter().chain(t).any(|v| !v.is_finite()) {
        return Err(invalid("data", "must be finite"));
    }
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(scale > 0.0) {
        return Err(Error::Degenerate("values are identically zero".into()));
    }
    let (tmin, tmax) = t.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = tmax - tmin;
    if !(span > 0.0) {
        return Err(Error::Degenerate("times have zero spread".into()));
    }
    // Relative residuals, floored at the typical size of the late half so
    // noisy values near zero do not dominate.
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&i, &j| t[i].total_cmp(&t[j]));
    let mut tail: Vec<f64> = order[t.len() / 2..].iter().map(|&i| y[i].abs()).collect();
    tail.sort_by(f64::total_cmp);
    let floor = (1e-3 * scale).max(tail[tail.len() / 2]);
    let weights: Vec<f64> = y.iter().map(|v| 1.0 / v.abs().max(floor).powi(2)).collect();
    let at_rate = |r: f64| -> Option<ExpPlusFloor> {
        let e: Vec<f64> = t.iter().map(|&s| (-r * (s - tmin)).exp()).collect();
        let fit = weighted_linear_fit(&e, y, Some(&weights)).ok()?;
        let (a, c) = (fit.slope, fit.intercept);
        let loss = e.iter().zip(y).zip(&weights).map(|((ei, yi), w)| w * (a * ei + c - yi).powi(2)).sum();
        // Re-express the amplitude relative to t = 0.
        Some(ExpPlusFloor { amplitude: a * (r * tmin).exp(), rate: r, floor: c, loss })
    };
    // Slower rates are indistinguishable from a floor over the window.
    let (lo, hi) = ((0.1 / span).ln(), (1e3 / span).ln());
    let scan = 400;
    let mut best: Option<(f64, ExpPlusFloor)> = None;
    for k in 0..=scan {
        let lr = lo + (hi - lo) * k as f64 / scan as f64;
        if let Some(f) = at_rate(lr.exp()) {
            if best.is_none_or(|(_, b)| f.loss < b.loss) {
                best = Some((lr, f));
            }
        }
    }
    let (lr, mut fit) = best.ok_or_else(|| Error::Degenerate("no admissible rate".into()))?;
    let step = (hi - lo) / scan as f64;
    let (mut a, mut b) = (lr - step, lr + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        let fc = at_rate(c.exp()).map_or(f64::INFINITY, |f| f.loss);
        let fd = at_rate(d.exp()).map_or(f64::INFINITY, |f| f.loss);
        if fc < fd {
            b = d;
        } else {
            a = c;
        }
    }
    let mid = 0.5 * (a + b);
    if let Some(f) = at_rate(mid.exp()) {
        if f.loss <= fit.loss {
            fit = f;
        }
    }
    Ok(fit)
}

/// Percentile bootstrap interval. `statistic` recomputes the estimate on
/// one resample drawn from the supplied generator; resamples on which it is
/// undefined are skipped.
pub fn bootstrap_interval(
    resamples: usize,
    level: f64,
    seed: u64,
    mut statistic: impl FnMut(&mut ChaCha8Rng) -> Option<f64>,
) -> Result<(f64, f64)> {
    if resamples == 0 || !(level > 0.0 && level < 1.0) {
        return Err(invalid("bootstrap", "need resamples and a level in (0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        if let Some(s) = statistic(&mut rng).filter(|s| s.is_finite()) {
            stats.push(s);
        }
    }
    if stats.len() < resamples / 2 {
        return Err(Error::Degenerate("statistic undefined on most resamples".into()));
    }
    stats.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (stats.len() - 1) as f64;
        let (l, h) = (pos.floor() as usize, pos.ceil() as usize);
        stats[l] + (pos - l as f64) * (stats[h] - stats[l])
    };
    let alpha = 0.5 * (1.0 - level);
    Ok((q(alpha), q(1.0 - alpha)))
}

/// `len` indices drawn uniformly with replacement from `0..len`.
pub fn resample_indices(rng: &mut impl Rng, len: usize) -> Vec<usize> {
    (0..len).map(|_| rng.random_range(0..len)).collect()
}

/// Least-squares non-increasing fit (pool adjacent violators).
pub fn isotonic_nonincreasing(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a >= b {
                break;
            }
            blocks.pop();
            let n = na + nb;
            *blocks.last_mut().unwrap() = ((a * na as f64 + b * nb as f64) / n as f64, n);
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}

/// Fraction of the variance of `y` explained by `fit`.
pub fn explained_variance(y: &[f64], fit: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let total: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let resid: f64 = y.iter().zip(fit).map(|(a, b)| (a - b).powi(2)).sum();
    if total > 0.0 { 1.0 - resid / total } else { 1.0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_power_law() {
        let n = [8.0, 16.0, 32.0, 64.0, 128.0];
        let y: Vec<f64> = n.iter().map(|v| 3.0 / v).collect();
        let f = fit_power_law(&n, &y).unwrap();
        assert!((f.exponent + 1.0).abs() < 1e-12);
        assert!((f.prefactor - 3.0).abs() < 1e-10);
    }

    #[test]
    fn exp_plus_floor_recovers_parameters() {
        let t: Vec<f64> = (0..60).map(|k| k as f64 * 0.25).collect();
        let y: Vec<f64> = t.iter().map(|s| 2.0 * (-s).exp() + 0.01).collect();
        let f = fit_exp_plus_floor(&t, &y).unwrap();
        assert!((f.rate - 1.0).abs() < 0.05 * 1.0, "{f:?}");
        assert!((f.floor - 0.01).abs() < 0.05 * 0.01, "{f:?}");
        assert!((f.amplitude - 2.0).abs() < 0.05 * 2.0, "{f:?}");
    }

    #[test]
    fn degenerate_inputs() {
        assert!(linear_fit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_power_law(&[1.0, 2.0], &[0.0, 1.0]).is_err());
        assert!(fit_exp_plus_floor(&[0.0, 1.0, 2.0], &[1.0, 0.5, 0.2]).is_err());
    }

    #[test]
    fn pava_matches_hand_example() {
        let fit = isotonic_nonincreasing(&[3.0, 1.0, 2.0, 0.0]);
        assert_eq!(fit, vec![3.0, 1.5, 1.5, 0.0]);
        let mono = [5.0, 4.0, 4.0, 1.0];
        assert_eq!(isotonic_nonincreasing(&mono), mono.to_vec());
    }

    #[test]
    fn bootstrap_contains_estimate_for_exact_data() {
        let x: Vec<f64> = (1..=6).map(|k| (k as f64).ln()).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 0.5 * v).collect();
        let (lo, hi) = bootstrap_interval(200, 0.95, 1, |rng| {
            let idx = resample_indices(rng, 6);
            let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            linear_fit(&xs, &ys).ok().map(|f| f.slope)
        })
        .unwrap();
        assert!(lo <= -0.5 + 1e-12 && -0.5 - 1e-12 <= hi);
    }
}
