use std::sync::Arc;

use rayon::prelude::*;

use crate::cloud::{DistributionSpec, ParticleCloud};
use crate::dynamics::{
    run_coupled, CoupledReport, CoupledSystem, MeanFieldOracle, MeanFieldPath, ReferenceCloud, SimParams,
    SnapshotRecorder,
};
use crate::error::{Error, Result};
use crate::functionals::MeanFieldFunctional;
use crate::grid1d::{FixedPoint, GridDensity, GridProblem};

use super::config::{ExperimentConfig, OracleSpec};

/// Cell averages of a one-dimensional initial law on the configured grid.
pub fn initial_density(spec: &DistributionSpec, half_width: f64, cells: usize) -> Result<GridDensity> {
    match spec {
        DistributionSpec::Gaussian { mean, variance } if mean.len() == 1 => {
            GridDensity::gaussian(half_width, cells, mean[0], *variance)
        }
        DistributionSpec::Uniform { low, high, dim: 1 } => {
            let h = 2.0 * half_width / cells as f64;
            GridDensity::from_fn(half_width, cells, |x| {
                let overlap = (x + 0.5 * h).min(*high) - (x - 0.5 * h).max(*low);
                overlap.max(0.0) / h
            })
        }
        DistributionSpec::Grid(g) if g.cells() == cells && g.half_width() == half_width => Ok(g.clone()),
        _ => Err(Error::Config("the initial law cannot be represented on the configured grid".into())),
    }
}

/// One replica of a coupled run.
pub struct ReplicaRun {
    pub replica: u64,
    pub report: CoupledReport,
    /// Interacting cloud at each save step (one-dimensional runs only).
    pub snapshots: Vec<(usize, ParticleCloud)>,
}

pub struct SizeRun {
    pub n: usize,
    pub replicas: Vec<ReplicaRun>,
}

/// All coupled runs of a configuration at one step size.
pub struct SweepRun {
    pub params: SimParams,
    pub sizes: Vec<SizeRun>,
    pub path: Option<Arc<MeanFieldPath>>,
    pub fixed_point: Option<FixedPoint>,
    /// `F^σ(m_*)` on the grid.
    pub free_energy_star: Option<f64>,
}

impl SweepRun {
    /// `m̄` at a save step, when a grid representation exists.
    pub fn centering(&self, step: usize, oracle: &OracleSpec) -> Option<&GridDensity> {
        match oracle {
            OracleSpec::Grid => self.path.as_ref().and_then(|p| p.snapshot(step)),
            OracleSpec::Stationary => self.fixed_point.as_ref().map(|f| &f.density),
            OracleSpec::Cloud { .. } => None,
        }
    }

    pub fn failures(&self) -> Vec<String> {
        self.sizes
            .iter()
            .flat_map(|s| {
                s.replicas.iter().filter_map(move |r| {
                    r.report.failure.as_ref().map(|f| format!("n = {}, replica {}: {f}", s.n, r.replica))
                })
            })
            .collect()
    }
}

pub(crate) fn grid_problem<'a>(cfg: &ExperimentConfig, functional: &'a dyn MeanFieldFunctional) -> Result<GridProblem<'a>> {
    GridProblem::new(functional, cfg.potential, cfg.sigma, cfg.grid.half_width, cfg.grid.cells)
}

pub(crate) fn solve_fixed_point(cfg: &ExperimentConfig, functional: &dyn MeanFieldFunctional) -> Result<FixedPoint> {
    let g = &cfg.grid;
    grid_problem(cfg, functional)?.fixed_point_solve(g.damping, g.tolerance, g.max_iterations)
}

/// Runs every `(n, replica)` pair of the configuration with `params`.
/// Replicas run in parallel on the current rayon pool.
pub fn run_sweep(cfg: &ExperimentConfig, params: &SimParams) -> Result<SweepRun> {
    params.validate()?;
    let functional = cfg.functional()?;
    let functional = functional.as_ref();
    let one_dim = functional.dim() == 1;
    let steps = params.steps()?;
    let saves = params.save_steps()?;

    let (fixed_point, free_energy_star) = if one_dim {
        let fp = solve_fixed_point(cfg, functional)?;
        if !fp.converged {
            return Err(Error::Degenerate(format!(
                "fixed-point iteration stopped after {} iterations with change {:e}; lower grid.damping",
                fp.iterations, fp.last_change
            )));
        }
        let f = grid_problem(cfg, functional)?.free_energy(&fp.density)?;
        (Some(fp), Some(f))
    } else {
        (None, None)
    };
    let path = match cfg.oracle {
        OracleSpec::Grid => {
            let init = initial_density(&cfg.initial, cfg.grid.half_width, cfg.grid.cells)?;
            let problem = grid_problem(cfg, functional)?;
            Some(Arc::new(MeanFieldPath::from_grid_flow(problem, init, params.dt, steps, &saves)?))
        }
        _ => None,
    };
    let initial = match (&cfg.oracle, &fixed_point) {
        (OracleSpec::Stationary, Some(fp)) => DistributionSpec::Grid(fp.density.clone()),
        _ => cfg.initial.clone(),
    };

    let jobs: Vec<(usize, u64)> =
        cfg.n_list.iter().flat_map(|&n| (0..cfg.replicas as u64).map(move |r| (n, r))).collect();
    let results: Vec<Result<ReplicaRun>> = jobs
        .par_iter()
        .map(|&(n, replica)| {
            let oracle = match &cfg.oracle {
                OracleSpec::Grid => MeanFieldOracle::Path(path.clone().expect("grid path")),
                OracleSpec::Stationary => {
                    let fp = fixed_point.as_ref().expect("fixed point in one dimension");
                    MeanFieldOracle::stationary(functional, fp.density.clone())
                }
                OracleSpec::Cloud { size } => MeanFieldOracle::Cloud(Box::new(ReferenceCloud::new(
                    &cfg.initial,
                    *size,
                    functional,
                    cfg.potential,
                    params.sigma,
                    params.dt,
                    params.seed,
                    replica,
                    params.brownian_refinement,
                )?)),
            };
            let mut system = CoupledSystem::new(&initial, n, params, replica, oracle)?;
            let mut recorder = SnapshotRecorder::default();
            let report = if one_dim {
                run_coupled(&mut system, functional, &cfg.potential, params, &mut [&mut recorder])?
            } else {
                run_coupled(&mut system, functional, &cfg.potential, params, &mut [])?
            };
            Ok(ReplicaRun { replica, report, snapshots: recorder.snapshots })
        })
        .collect();
    let mut sizes: Vec<SizeRun> = cfg.n_list.iter().map(|&n| SizeRun { n, replicas: Vec::new() }).collect();
    for (result, &(n, _)) in results.into_iter().zip(&jobs) {
        let run = result?;
        sizes.iter_mut().find(|s| s.n == n).expect("size").replicas.push(run);
    }
    Ok(SweepRun { params: params.clone(), sizes, path, fixed_point, free_energy_star })
}
