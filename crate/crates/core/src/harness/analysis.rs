use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{bootstrap_interval, fit_exp_plus_floor, fit_power_law, resample_indices, ExpPlusFloor, BOOTSTRAP_RESAMPLES};
use crate::grid1d::GridDensity;
use crate::metrics::entropy::split_marginal_entropy;

use super::config::ExperimentConfig;
use super::sweep::{grid_problem, SweepRun};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// A fitted log-log slope with a 95% normal interval from the replica
/// bootstrap spread, centered on the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Slope {
    pub slope: f64,
    pub prefactor: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Slope {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }

    pub fn within(&self, lo: f64, hi: f64) -> bool {
        (lo..=hi).contains(&self.slope)
    }
}

/// A per-`n` level with bootstrap spread over replicas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Level {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub lower: f64,
    pub upper: f64,
    pub replicas: usize,
}

impl Level {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
}

/// Per-`(n, t)` replica averages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeRow {
    pub t: f64,
    pub n: usize,
    pub gap: f64,
    pub gap_stderr: f64,
    pub drift_mismatch: f64,
    pub interaction: f64,
    /// `(1/n)F^{σ,n}` proxy minus `F^σ(m_*)`.
    pub value_gap: Option<f64>,
    /// Plug-in `H(m^{(n),1}_t | m̄_t)`.
    pub marginal_entropy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EarlyFit {
    pub n: usize,
    pub fit: ExpPlusFloor,
    /// 95% pairs-bootstrap interval of the rate over save times.
    pub rate_lower: f64,
    pub rate_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepAnalysis {
    pub sup_gap: Vec<Level>,
    pub sup_gap_slope: Slope,
    /// `max gap over the plateau window / max over [sup start, plateau start]`.
    pub growth_ratio: Vec<Level>,
    pub gap_slopes_at: Vec<(f64, f64)>,
    pub mismatch_plateau: Vec<Level>,
    pub mismatch_slope: Slope,
    pub value_plateau: Vec<Level>,
    pub value_slope: Option<Slope>,
    pub early_fits: Vec<EarlyFit>,
    pub marginal_entropy_plateau: Vec<Level>,
    pub table: Vec<TimeRow>,
    pub failures: Vec<String>,
}

/// Named statistic with the half-width of its 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Statistic {
    pub name: String,
    pub value: f64,
    pub half_width: f64,
}

impl SweepAnalysis {
    pub fn statistics(&self) -> Vec<Statistic> {
        let mut out = Vec::new();
        let mut slope = |name: &str, s: &Slope| {
            out.push(Statistic { name: name.into(), value: s.slope, half_width: s.half_width() })
        };
        slope("sup_gap_slope", &self.sup_gap_slope);
        slope("mismatch_slope", &self.mismatch_slope);
        if let Some(s) = &self.value_slope {
            slope("value_slope", s);
        }
        for f in &self.early_fits {
            out.push(Statistic {
                name: format!("early_rate[n={}]", f.n),
                value: f.fit.rate,
                half_width: 0.5 * (f.rate_upper - f.rate_lower),
            });
        }
        for (name, levels) in [
            ("growth_ratio", &self.growth_ratio),
            ("sup_gap", &self.sup_gap),
            ("mismatch_plateau", &self.mismatch_plateau),
            ("value_plateau", &self.value_plateau),
            ("marginal_entropy_plateau", &self.marginal_entropy_plateau),
        ] {
            for l in levels {
                out.push(Statistic { name: format!("{name}[n={}]", l.n), value: l.mean, half_width: l.half_width() });
            }
        }
        out
    }

    /// Means never increase with `n` beyond one combined standard error.
    pub fn marginal_entropy_monotone(&self) -> bool {
        self.marginal_entropy_plateau
            .windows(2)
            .all(|p| p[1].mean <= p[0].mean + (p[0].stderr.powi(2) + p[1].stderr.powi(2)).sqrt())
    }
}

/// Replica × save matrices for one `n`.
struct SizeData<'a> {
    n: usize,
    times: Vec<f64>,
    steps: Vec<usize>,
    gap: Vec<Vec<f64>>,
    mismatch: Vec<Vec<f64>>,
    interaction: Vec<Vec<f64>>,
    positions: Vec<Vec<&'a [f64]>>,
}

fn mean_over(idx: &[usize], m: &[Vec<f64>], s: usize) -> f64 {
    idx.iter().map(|&r| m[r][s]).sum::<f64>() / idx.len() as f64
}

fn window(times: &[f64], w: [f64; 2]) -> Vec<usize> {
    times.iter().enumerate().filter(|(_, &t)| t >= w[0] - 1e-9 && t <= w[1] + 1e-9).map(|(s, _)| s).collect()
}

struct Context<'a> {
    centering: Vec<Option<&'a GridDensity>>,
    mu: Option<GridDensity>,
    diffusivity: f64,
    free_energy_star: Option<f64>,
}

impl SizeData<'_> {
    fn sup(&self, idx: &[usize], saves: &[usize]) -> f64 {
        saves.iter().map(|&s| mean_over(idx, &self.gap, s)).fold(f64::NEG_INFINITY, f64::max)
    }

    fn plateau(&self, idx: &[usize], m: &[Vec<f64>], saves: &[usize]) -> f64 {
        saves.iter().map(|&s| mean_over(idx, m, s)).sum::<f64>() / saves.len() as f64
    }

    /// `(value gap, plug-in marginal entropy)` at save `s`.
    fn value(&self, idx: &[usize], s: usize, ctx: &Context<'_>) -> Result<Option<(f64, f64)>> {
        let (Some(mu), Some(f_star)) = (&ctx.mu, ctx.free_energy_star) else { return Ok(None) };
        let centering = ctx.centering[s].unwrap_or(mu);
        let pooled: Vec<f64> = idx.iter().flat_map(|&r| self.positions[r][s].iter().copied()).collect();
        let (local, cross) = split_marginal_entropy(&pooled, centering, mu)?;
        let interaction = mean_over(idx, &self.interaction, s);
        let value = interaction + ctx.diffusivity * (local.miller_madow() + cross) - f_star;
        Ok(Some((value, local.plug_in)))
    }
}

fn level(n: usize, replicas: usize, point: f64, boot: &[f64]) -> Level {
    let b: Vec<f64> = boot.iter().copied().filter(|v| v.is_finite()).collect();
    let m = b.iter().sum::<f64>() / b.len() as f64;
    let sd = (b.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (b.len().max(2) - 1) as f64).sqrt();
    Level { n, mean: point, stderr: sd, lower: point - Z95 * sd, upper: point + Z95 * sd, replicas }
}

fn slope(ns: &[f64], point: &[f64], boot: &[Vec<f64>]) -> Result<Slope> {
    let fit = fit_power_law(ns, point)?;
    let resamples = boot.first().map_or(0, Vec::len);
    let slopes: Vec<f64> = (0..resamples)
        .filter_map(|b| {
            let y: Vec<f64> = boot.iter().map(|v| v[b]).collect();
            fit_power_law(ns, &y).ok().map(|f| f.exponent)
        })
        .collect();
    if slopes.len() < resamples / 2 {
        return Err(Error::Degenerate("slope undefined on most bootstrap resamples".into()));
    }
    let (_, se) = crate::metrics::concentration::mean_stderr(&slopes);
    let sd = se * (slopes.len() as f64).sqrt();
    Ok(Slope { slope: fit.exponent, prefactor: fit.prefactor, lower: fit.exponent - Z95 * sd, upper: fit.exponent + Z95 * sd })
}

/// Gap, value, mismatch and entropy statistics of a sweep, with replica
/// bootstrap intervals.
pub fn analyze_sweep(cfg: &ExperimentConfig, run: &SweepRun) -> Result<SweepAnalysis> {
    let functional = cfg.functional()?;
    let one_dim = functional.dim() == 1;
    let a = &cfg.analysis;

    let mut data = Vec::new();
    for size in &run.sizes {
        let ok: Vec<_> = size.replicas.iter().filter(|r| r.report.completed).collect();
        if ok.len() < 2 {
            return Err(Error::Degenerate(format!("fewer than two completed replicas at n = {}", size.n)));
        }
        let rows = &ok[0].report.rows;
        let positions = if one_dim {
            ok.iter().map(|r| r.snapshots.iter().map(|(_, c)| c.positions()).collect()).collect()
        } else {
            Vec::new()
        };
        data.push(SizeData {
            n: size.n,
            times: rows.iter().map(|o| o.t).collect(),
            steps: rows.iter().map(|o| o.step).collect(),
            gap: ok.iter().map(|r| r.report.rows.iter().map(|o| o.gap_sq_per_particle).collect()).collect(),
            mismatch: ok.iter().map(|r| r.report.rows.iter().map(|o| o.drift_mismatch).collect()).collect(),
            interaction: ok.iter().map(|r| r.report.rows.iter().map(|o| o.interaction_energy).collect()).collect(),
            positions,
        });
    }
    let times = data[0].times.clone();
    let ctx = Context {
        centering: data[0].steps.iter().map(|&k| run.centering(k, &cfg.oracle)).collect(),
        mu: if one_dim { Some(grid_problem(cfg, functional.as_ref())?.reference_measure()?) } else { None },
        diffusivity: 0.5 * cfg.sigma * cfg.sigma,
        free_energy_star: run.free_energy_star,
    };
    let sup_w = window(&times, a.sup_window);
    let plateau_w = window(&times, a.plateau_window);
    let before_w = window(&times, [a.sup_window[0], a.plateau_window[0]]);
    let early_w = window(&times, a.early_window);
    if sup_w.is_empty() || plateau_w.is_empty() || before_w.is_empty() {
        return Err(Error::Config("analysis windows contain no save times".into()));
    }

    let mut table = Vec::new();
    let (mut sup_gap, mut mismatch_plateau, mut value_plateau, mut entropy_plateau) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let (mut boot_sup, mut boot_mismatch, mut boot_value) = (Vec::new(), Vec::new(), Vec::new());
    let mut growth_ratio = Vec::new();
    let mut early_fits = Vec::new();
    for (k, d) in data.iter().enumerate() {
        let r = d.gap.len();
        let all: Vec<usize> = (0..r).collect();
        let values: Vec<Option<(f64, f64)>> =
            (0..times.len()).map(|s| d.value(&all, s, &ctx)).collect::<Result<_>>()?;
        for (s, &t) in times.iter().enumerate() {
            let g: Vec<f64> = all.iter().map(|&i| d.gap[i][s]).collect();
            let (mean, se) = crate::metrics::concentration::mean_stderr(&g);
            table.push(TimeRow {
                t,
                n: d.n,
                gap: mean,
                gap_stderr: se,
                drift_mismatch: mean_over(&all, &d.mismatch, s),
                interaction: mean_over(&all, &d.interaction, s),
                value_gap: values[s].map(|v| v.0),
                marginal_entropy: values[s].map(|v| v.1),
            });
        }
        let growth = |idx: &[usize]| d.sup(idx, &plateau_w) / d.sup(idx, &before_w);

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(k as u64 + 1)));
        let (mut bs, mut bm, mut bv, mut be, mut bg) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for _ in 0..BOOTSTRAP_RESAMPLES {
            let idx = resample_indices(&mut rng, r);
            bs.push(d.sup(&idx, &sup_w));
            bg.push(growth(&idx));
            bm.push(d.plateau(&idx, &d.mismatch, &plateau_w));
            if one_dim && ctx.free_energy_star.is_some() {
                let mut v = 0.0;
                let mut e = 0.0;
                for &s in &plateau_w {
                    let (vs, es) = d.value(&idx, s, &ctx)?.expect("one-dimensional value");
                    v += vs;
                    e += es;
                }
                bv.push(v / plateau_w.len() as f64);
                be.push(e / plateau_w.len() as f64);
            }
        }
        sup_gap.push(level(d.n, r, d.sup(&all, &sup_w), &bs));
        growth_ratio.push(level(d.n, r, growth(&all), &bg));
        mismatch_plateau.push(level(d.n, r, d.plateau(&all, &d.mismatch, &plateau_w), &bm));
        if !bv.is_empty() {
            let pv = plateau_w.iter().map(|&s| values[s].expect("value").0).sum::<f64>() / plateau_w.len() as f64;
            let pe = plateau_w.iter().map(|&s| values[s].expect("value").1).sum::<f64>() / plateau_w.len() as f64;
            value_plateau.push(level(d.n, r, pv, &bv));
            entropy_plateau.push(level(d.n, r, pe, &be));
            let (et, ev): (Vec<f64>, Vec<f64>) =
                early_w.iter().map(|&s| (times[s], values[s].expect("value").0)).unzip();
            if let Ok(fit) = fit_exp_plus_floor(&et, &ev) {
                let (rate_lower, rate_upper) = bootstrap_interval(BOOTSTRAP_RESAMPLES, 0.95, cfg.seed ^ d.n as u64, |rng| {
                    let (bt, bv): (Vec<f64>, Vec<f64>) =
                        resample_indices(rng, et.len()).iter().map(|&i| (et[i], ev[i])).unzip();
                    fit_exp_plus_floor(&bt, &bv).ok().map(|f| f.rate)
                })?;
                early_fits.push(EarlyFit { n: d.n, fit, rate_lower, rate_upper });
            }
        }
        boot_sup.push(bs);
        boot_mismatch.push(bm);
        boot_value.push(bv);
    }

    let ns: Vec<f64> = data.iter().map(|d| d.n as f64).collect();
    let point = |levels: &[Level]| levels.iter().map(|l| l.mean).collect::<Vec<f64>>();
    let sup_gap_slope = slope(&ns, &point(&sup_gap), &boot_sup)?;
    let mismatch_slope = slope(&ns, &point(&mismatch_plateau), &boot_mismatch)?;
    let value_slope =
        if value_plateau.is_empty() { None } else { slope(&ns, &point(&value_plateau), &boot_value).ok() };
    let gap_slopes_at = a
        .slope_times
        .iter()
        .filter_map(|&t| {
            let s = times.iter().position(|&x| (x - t).abs() < 1e-9)?;
            let y: Vec<f64> = data.iter().map(|d| mean_over(&(0..d.gap.len()).collect::<Vec<_>>(), &d.gap, s)).collect();
            fit_power_law(&ns, &y).ok().map(|f| (t, f.exponent))
        })
        .collect();
    Ok(SweepAnalysis {
        sup_gap,
        sup_gap_slope,
        growth_ratio,
        gap_slopes_at,
        mismatch_plateau,
        mismatch_slope,
        value_plateau,
        value_slope,
        early_fits,
        marginal_entropy_plateau: entropy_plateau,
        table,
        failures: run.failures(),
    })
}
