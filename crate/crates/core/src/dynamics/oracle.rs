use std::sync::Arc;

use crate::cloud::{sample_cloud_from, DistributionSpec, ParticleCloud};
use crate::error::{Error, Result};
use crate::functionals::{ConfiningPotential, FrozenField, MeanFieldFunctional};
use crate::grid1d::{GridDensity, GridFlow, GridProblem};
use crate::rng;

use super::params::NoiseStreams;
use super::step::advance;

/// Noise stream ids of reference-cloud oracles start here so they never
/// collide with the particles of the system they drive.
pub const ORACLE_STREAM_OFFSET: u64 = 1 << 40;

/// Precomputed grid trajectory of the mean-field flow: the frozen field of
/// `m̄_t` at every step and density snapshots at chosen steps. Shared
/// read-only across replicas.
pub struct MeanFieldPath {
    dt: f64,
    fields: Vec<Arc<dyn FrozenField>>,
    snapshots: Vec<(usize, GridDensity)>,
}

impl MeanFieldPath {
    /// Runs the grid flow for `steps` steps of size `dt`, keeping densities
    /// at the sorted `snapshot_steps`.
    pub fn from_grid_flow(
        problem: GridProblem<'_>,
        initial: GridDensity,
        dt: f64,
        steps: usize,
        snapshot_steps: &[usize],
    ) -> Result<Self> {
        let functional = problem.functional;
        let mut flow = GridFlow::new(problem, initial, dt)?;
        let mut fields = Vec::with_capacity(steps + 1);
        let mut snapshots = Vec::with_capacity(snapshot_steps.len());
        let mut next = snapshot_steps.iter().peekable();
        for k in 0..=steps {
            if k > 0 {
                flow.step()?;
            }
            fields.push(functional.freeze(flow.density()));
            while next.peek().is_some_and(|&&s| s == k) {
                snapshots.push((k, flow.density().clone()));
                next.next();
            }
        }
        Ok(Self { dt, fields, snapshots })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn field(&self, step: usize) -> Result<&Arc<dyn FrozenField>> {
        self.fields.get(step).ok_or(Error::OracleOutOfRange { step, last: self.steps() })
    }

    pub fn snapshot(&self, step: usize) -> Option<&GridDensity> {
        self.snapshots.binary_search_by_key(&step, |(k, _)| *k).ok().map(|i| &self.snapshots[i].1)
    }

    pub fn snapshots(&self) -> &[(usize, GridDensity)] {
        &self.snapshots
    }
}

/// Large interacting cloud standing in for `m̄_t` when no grid is
/// available. It advances in lockstep with the run it drives.
pub struct ReferenceCloud<'a> {
    cloud: ParticleCloud,
    noise: NoiseStreams,
    functional: &'a dyn MeanFieldFunctional,
    potential: ConfiningPotential,
    sigma: f64,
    dt: f64,
    step: usize,
    field: Arc<dyn FrozenField>,
    buffer: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> ReferenceCloud<'a> {
    /// `size` particles drawn from the `reference-init` substream.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        init: &DistributionSpec,
        size: usize,
        functional: &'a dyn MeanFieldFunctional,
        potential: ConfiningPotential,
        sigma: f64,
        dt: f64,
        seed: u64,
        replica: u64,
        refinement: usize,
    ) -> Result<Self> {
        let cloud = sample_cloud_from(init, size, seed, rng::REFERENCE_INIT, replica)?;
        let noise = NoiseStreams::with_offset(seed, replica, ORACLE_STREAM_OFFSET, size, cloud.dim(), refinement);
        let field = functional.freeze(&cloud);
        let buffer = vec![0.0; cloud.positions().len()];
        Ok(Self { cloud, noise, functional, potential, sigma, dt, step: 0, field, buffer, scratch: Vec::new() })
    }

    pub fn cloud(&self) -> &ParticleCloud {
        &self.cloud
    }

    fn advance_to(&mut self, step: usize) -> Result<()> {
        if step < self.step {
            return Err(Error::OracleOutOfRange { step, last: self.step });
        }
        while self.step < step {
            self.noise.fill(self.dt, &mut self.buffer);
            advance(
                &mut self.cloud,
                self.field.as_ref(),
                &self.potential,
                self.sigma,
                self.dt,
                &self.buffer,
                &mut self.scratch,
                self.step,
            )?;
            self.step += 1;
            self.field = self.functional.freeze(&self.cloud);
        }
        Ok(())
    }
}

/// Source of `D_mF(m̄_t, ·)` for the reference particles.
pub enum MeanFieldOracle<'a> {
    /// Grid flow of the mean-field equation (one dimension).
    Path(Arc<MeanFieldPath>),
    /// Time-independent `m̄`, e.g. the invariant measure `m_*`.
    Stationary { field: Arc<dyn FrozenField>, density: Option<Arc<GridDensity>> },
    /// Interacting cloud of size `N_ref`.
    Cloud(Box<ReferenceCloud<'a>>),
}

impl MeanFieldOracle<'_> {
    /// Oracle fixed at a grid density.
    pub fn stationary(functional: &dyn MeanFieldFunctional, density: GridDensity) -> Self {
        Self::Stationary { field: functional.freeze(&density), density: Some(Arc::new(density)) }
    }

    /// Frozen field of `m̄` at step `step`. Cloud oracles only move forward.
    pub fn field(&mut self, step: usize) -> Result<Arc<dyn FrozenField>> {
        match self {
            Self::Path(p) => p.field(step).cloned(),
            Self::Stationary { field, .. } => Ok(field.clone()),
            Self::Cloud(c) => {
                c.advance_to(step)?;
                Ok(c.field.clone())
            }
        }
    }

    /// Grid density of `m̄` at `step`, when the oracle has one.
    pub fn density(&self, step: usize) -> Option<&GridDensity> {
        match self {
            Self::Path(p) => p.snapshot(step),
            Self::Stationary { density, .. } => density.as_deref(),
            Self::Cloud(_) => None,
        }
    }
}

use crate::measure::Measure;
