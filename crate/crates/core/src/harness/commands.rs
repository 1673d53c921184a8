use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fit::{
    bootstrap_interval, fit_exp_plus_floor, fit_power_law, resample_indices, BOOTSTRAP_RESAMPLES,
};
use crate::functionals::validate::{validate_derivatives, DerivativeReport, ProbeSpec};
use crate::metrics::chain::{chain_entropy_check, DiscreteJoint};
use crate::metrics::concentration::{RateReport, RateRow};
use crate::metrics::entropy::split_marginal_entropy;

use super::analysis::{analyze_sweep, Statistic, SweepAnalysis};
use super::config::ExperimentConfig;
use super::sweep::{grid_problem, run_sweep, solve_fixed_point, SweepRun};

/// Provenance of a report: enough to reproduce every number in it.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub replicas: Vec<u64>,
    pub dt: Vec<f64>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig, dt: Vec<f64>) -> Self {
        let json = serde_json::to_string(cfg).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed: cfg.seed,
            replicas: (0..cfg.replicas as u64).collect(),
            dt,
            config: cfg.clone(),
        }
    }
}

fn out_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Option<PathBuf>> {
    let dir = out.map(Path::to_path_buf).or_else(|| cfg.output_dir.as_ref().map(PathBuf::from));
    if let Some(d) = &dir {
        fs::create_dir_all(d)?;
    }
    Ok(dir)
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join(name))?), value)?;
    Ok(())
}

fn write_rows<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join(name))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainSummary {
    pub joints: usize,
    pub max_identity_error: f64,
    /// Smallest `full_conditional − chain` over all joints.
    pub min_margin: f64,
    pub violations: usize,
}

impl ChainSummary {
    pub fn passed(&self, tol: f64) -> bool {
        self.violations == 0 && self.max_identity_error <= tol
    }
}

#[derive(Debug, Clone, Serialize)]
struct ChainRow {
    index: usize,
    sizes: String,
    full_conditional: f64,
    chain: f64,
    joint: f64,
}

/// Tolerance for the chain identity and inequality.
pub const CHAIN_TOL: f64 = 1e-10;

fn chain_sweep(cfg: &ExperimentConfig) -> Result<(ChainSummary, Vec<ChainRow>)> {
    let c = &cfg.chain;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(c.joints);
    let mut summary = ChainSummary { joints: c.joints, max_identity_error: 0.0, min_margin: f64::INFINITY, violations: 0 };
    for index in 0..c.joints {
        let k = rng.random_range(1..=c.max_variables);
        let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(2..=c.max_alphabet)).collect();
        let joint = DiscreteJoint::random_dirichlet(sizes.clone(), &mut rng)?;
        let e = chain_entropy_check(&joint);
        summary.max_identity_error = summary.max_identity_error.max(e.identity_error());
        summary.min_margin = summary.min_margin.min(e.full_conditional - e.chain);
        if !e.inequality_holds(CHAIN_TOL) {
            summary.violations += 1;
        }
        rows.push(ChainRow {
            index,
            sizes: sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("x"),
            full_conditional: e.full_conditional,
            chain: e.chain,
            joint: e.joint,
        });
    }
    Ok((summary, rows))
}

/// Random discrete joints checked against the chain identity and the
/// full-conditional inequality. Writes `entropy_chain.csv`.
pub fn cmd_entropy_chain(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ChainSummary> {
    let (summary, rows) = chain_sweep(cfg)?;
    if let Some(dir) = out_dir(cfg, out)? {
        write_rows(&dir, "entropy_chain.csv", &rows)?;
        write_json(&dir, "manifest.json", &Manifest::new("entropy-chain", cfg, vec![]))?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateReport {
    pub derivatives: DerivativeReport,
    pub chain: ChainSummary,
}

impl ValidateReport {
    pub fn passed(&self) -> bool {
        self.derivatives.passed() && self.chain.passed(CHAIN_TOL)
    }
}

/// Derivative consistency of the configured functional plus the discrete
/// entropy identities. Writes `validate.json`.
pub fn cmd_validate(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ValidateReport> {
    let functional = cfg.functional()?;
    let derivatives = validate_derivatives(functional.as_ref(), &ProbeSpec::default_for(functional.dim(), cfg.seed));
    let (chain, _) = chain_sweep(cfg)?;
    let report = ValidateReport { derivatives, chain };
    if let Some(dir) = out_dir(cfg, out)? {
        write_json(&dir, "validate.json", &report)?;
        write_json(&dir, "manifest.json", &Manifest::new("validate", cfg, vec![]))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct GibbsReport {
    pub residual: f64,
    pub iterations: usize,
    pub last_change: f64,
    pub converged: bool,
    pub free_energy: f64,
    pub mean: f64,
    pub second_moment: f64,
}

/// Invariant measure by damped fixed-point iteration. Writes
/// `gibbs_density.csv` and `gibbs.json`.
pub fn cmd_gibbs(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<GibbsReport> {
    let functional = cfg.functional()?;
    if functional.dim() != 1 {
        return Err(Error::Config("gibbs needs a one-dimensional functional".into()));
    }
    let fp = solve_fixed_point(cfg, functional.as_ref())?;
    let free_energy = grid_problem(cfg, functional.as_ref())?.free_energy(&fp.density)?;
    let report = GibbsReport {
        residual: fp.residual,
        iterations: fp.iterations,
        last_change: fp.last_change,
        converged: fp.converged,
        free_energy,
        mean: fp.density.mean(),
        second_moment: fp.density.moment(2),
    };
    if let Some(dir) = out_dir(cfg, out)? {
        fp.density.write_csv(BufWriter::new(File::create(dir.join("gibbs_density.csv"))?))?;
        write_json(&dir, "gibbs.json", &report)?;
        write_json(&dir, "manifest.json", &Manifest::new("gibbs", cfg, vec![]))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub n: usize,
    pub seed: u64,
    pub replica: u64,
    pub gap_sq_per_particle: f64,
    /// `F(m_X)` of this replica plus the entropy proxy pooled over replicas.
    pub free_energy_per_particle: Option<f64>,
    pub moment2: f64,
    pub drift_mismatch: f64,
}

fn trajectory_rows(cfg: &ExperimentConfig, run: &SweepRun) -> Result<Vec<TrajectoryRow>> {
    let functional = cfg.functional()?;
    let mu = if functional.dim() == 1 { Some(grid_problem(cfg, functional.as_ref())?.reference_measure()?) } else { None };
    let d = 0.5 * cfg.sigma * cfg.sigma;
    let mut rows = Vec::new();
    for size in &run.sizes {
        let ok: Vec<_> = size.replicas.iter().filter(|r| r.report.completed).collect();
        let saves = ok.first().map_or(0, |r| r.report.rows.len());
        for s in 0..saves {
            let step = ok[0].report.rows[s].step;
            let entropy = match &mu {
                Some(mu) if ok.len() >= 2 => {
                    let pooled: Vec<f64> = ok.iter().flat_map(|r| r.snapshots[s].1.positions().iter().copied()).collect();
                    let centering = run.centering(step, &cfg.oracle).unwrap_or(mu);
                    let (local, cross) = split_marginal_entropy(&pooled, centering, mu)?;
                    Some(local.miller_madow() + cross)
                }
                _ => None,
            };
            for r in &ok {
                let o = &r.report.rows[s];
                rows.push(TrajectoryRow {
                    t: o.t,
                    n: o.n,
                    seed: o.seed,
                    replica: o.replica,
                    gap_sq_per_particle: o.gap_sq_per_particle,
                    free_energy_per_particle: entropy.map(|h| o.interaction_energy + d * h),
                    moment2: o.moment2,
                    drift_mismatch: o.drift_mismatch,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub rows: usize,
    pub failures: Vec<String>,
}

/// Coupled runs for every `(n, replica)`. Writes `trajectories.csv` and the
/// final interacting cloud of replica 0 for each `n`.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<SimulateReport> {
    let params = cfg.sim_params()?;
    let run = run_sweep(cfg, &params)?;
    let rows = trajectory_rows(cfg, &run)?;
    if let Some(dir) = out_dir(cfg, out)? {
        write_rows(&dir, "trajectories.csv", &rows)?;
        for size in &run.sizes {
            if let Some((_, cloud)) = size.replicas.first().and_then(|r| r.snapshots.last()) {
                cloud.write_csv(BufWriter::new(File::create(dir.join(format!("cloud_n{}_final.csv", size.n)))?))?;
            }
        }
        write_json(&dir, "manifest.json", &Manifest::new("simulate", cfg, vec![params.dt]))?;
    }
    Ok(SimulateReport { rows: rows.len(), failures: run.failures() })
}

/// Change of one statistic when `dt` is halved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalvingRow {
    pub name: String,
    pub value: f64,
    pub value_half_dt: f64,
    pub difference: f64,
    pub half_width: f64,
    pub within: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PocReport {
    pub analysis: SweepAnalysis,
    pub halving: Option<Vec<HalvingRow>>,
}

fn compare(a: &[Statistic], b: &[Statistic]) -> Vec<HalvingRow> {
    a.iter()
        .filter_map(|s| {
            let t = b.iter().find(|t| t.name == s.name)?;
            let difference = (s.value - t.value).abs();
            Some(HalvingRow {
                name: s.name.clone(),
                value: s.value,
                value_half_dt: t.value,
                difference,
                half_width: s.half_width,
                within: difference < s.half_width,
            })
        })
        .collect()
}

fn rate_rows(levels: &[super::analysis::Level]) -> Vec<RateRow> {
    levels.iter().map(|l| RateRow { n: l.n, mean_value: l.mean, stderr: l.stderr, replicas: l.replicas }).collect()
}

/// Propagation-of-chaos sweep: coupled runs for every `n`, then gap, value
/// and mismatch tables with fitted slopes. With the halving check enabled
/// the sweep is repeated at `dt/2` on the same Brownian path.
pub fn cmd_poc_sweep(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<PocReport> {
    if cfg.replicas < 8 {
        return Err(Error::Config("poc-sweep needs at least 8 replicas".into()));
    }
    let params = cfg.sim_params()?;
    let run = run_sweep(cfg, &params)?;
    let analysis = analyze_sweep(cfg, &run)?;
    drop(run);
    let mut dts = vec![params.dt];
    let halving = if cfg.integrator.halving_check {
        let half = params.halved()?;
        dts.push(half.dt);
        let run = run_sweep(cfg, &half)?;
        let h = analyze_sweep(cfg, &run)?;
        Some(compare(&analysis.statistics(), &h.statistics()))
    } else {
        None
    };
    if let Some(dir) = out_dir(cfg, out)? {
        write_rows(&dir, "poc_time.csv", &analysis.table)?;
        write_rows(&dir, "poc_sup_gap.csv", &rate_rows(&analysis.sup_gap))?;
        write_rows(&dir, "poc_mismatch.csv", &rate_rows(&analysis.mismatch_plateau))?;
        if !analysis.value_plateau.is_empty() {
            write_rows(&dir, "poc_value.csv", &rate_rows(&analysis.value_plateau))?;
            write_rows(&dir, "poc_marginal_entropy.csv", &rate_rows(&analysis.marginal_entropy_plateau))?;
        }
        if let Some(h) = &halving {
            write_rows(&dir, "poc_halving.csv", h)?;
        }
        write_json(
            &dir,
            "poc_summary.json",
            &serde_json::json!({
                "sup_gap_slope": analysis.sup_gap_slope,
                "mismatch_slope": analysis.mismatch_slope,
                "value_slope": analysis.value_slope,
                "growth_ratio": analysis.growth_ratio,
                "gap_slopes_at": analysis.gap_slopes_at,
                "early_fits": analysis.early_fits,
                "marginal_entropy_monotone": analysis.marginal_entropy_monotone(),
                "failures": analysis.failures,
            }),
        )?;
        write_json(&dir, "manifest.json", &Manifest::new("poc-sweep", cfg, dts))?;
    }
    Ok(PocReport { analysis, halving })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Powerlaw,
    ExpPlusFloor,
}

impl FitModel {
    /// Default `(x, y)` column names.
    pub fn columns(&self) -> (&'static str, &'static str) {
        match self {
            Self::Powerlaw => ("n", "mean_value"),
            Self::ExpPlusFloor => ("t", "value"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRow {
    pub source: String,
    pub model: String,
    pub parameter: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

fn read_columns(path: &Path, x: &str, y: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Config(format!("{}: no column `{name}`", path.display())))
    };
    let (ix, iy) = (col(x)?, col(y)?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| {
            rec[i].trim().parse::<f64>().map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        };
        xs.push(parse(ix)?);
        ys.push(parse(iy)?);
    }
    Ok((xs, ys))
}

/// Fits `model` to each table with a pairs bootstrap (200 resamples).
/// Writes `rate_fit.csv` when `out` is given.
pub fn cmd_rate_fit(
    paths: &[PathBuf],
    model: FitModel,
    columns: Option<(&str, &str)>,
    seed: u64,
    out: Option<&Path>,
) -> Result<Vec<FitRow>> {
    let (cx, cy) = columns.unwrap_or(model.columns());
    let mut rows = Vec::new();
    for path in paths {
        let (x, y) = read_columns(path, cx, cy)?;
        rows.extend(fit_table(&path.display().to_string(), model, &x, &y, seed)?);
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_rows(dir, "rate_fit.csv", &rows)?;
    }
    Ok(rows)
}

/// Point estimates and pairs-bootstrap intervals of one fit.
pub fn fit_table(source: &str, model: FitModel, x: &[f64], y: &[f64], seed: u64) -> Result<Vec<FitRow>> {
    if x.len() < 4 {
        return Err(Error::Degenerate(format!("{source}: need at least four points, got {}", x.len())));
    }
    let pick = |idx: &[usize]| -> (Vec<f64>, Vec<f64>) { idx.iter().map(|&i| (x[i], y[i])).unzip() };
    let params: Vec<(&str, f64, Box<dyn Fn(&[f64], &[f64]) -> Option<f64>>)> = match model {
        FitModel::Powerlaw => {
            let f = fit_power_law(x, y)?;
            vec![
                ("exponent", f.exponent, Box::new(|x: &[f64], y: &[f64]| fit_power_law(x, y).ok().map(|f| f.exponent))),
                ("prefactor", f.prefactor, Box::new(|x: &[f64], y: &[f64]| fit_power_law(x, y).ok().map(|f| f.prefactor))),
            ]
        }
        FitModel::ExpPlusFloor => {
            let f = fit_exp_plus_floor(x, y)?;
            vec![
                ("rate", f.rate, Box::new(|x: &[f64], y: &[f64]| fit_exp_plus_floor(x, y).ok().map(|f| f.rate))),
                ("floor", f.floor, Box::new(|x: &[f64], y: &[f64]| fit_exp_plus_floor(x, y).ok().map(|f| f.floor))),
                ("amplitude", f.amplitude, Box::new(|x: &[f64], y: &[f64]| fit_exp_plus_floor(x, y).ok().map(|f| f.amplitude))),
            ]
        }
    };
    let name = match model {
        FitModel::Powerlaw => "powerlaw",
        FitModel::ExpPlusFloor => "exp_plus_floor",
    };
    params
        .into_iter()
        .map(|(parameter, estimate, stat)| {
            let (lower, upper) = bootstrap_interval(BOOTSTRAP_RESAMPLES, 0.95, seed, |rng| {
                let (bx, by) = pick(&resample_indices(rng, x.len()));
                stat(&bx, &by)
            })?;
            Ok(FitRow {
                source: source.into(),
                model: name.into(),
                parameter: parameter.into(),
                estimate,
                lower: lower.min(estimate),
                upper: upper.max(estimate),
                points: x.len(),
            })
        })
        .collect()
}

/// Writes a rate report in the `n,mean_value,stderr,replicas` layout.
pub fn write_rate_report(path: &Path, report: &RateReport) -> Result<()> {
    report.write_csv(BufWriter::new(File::create(path)?))
}
