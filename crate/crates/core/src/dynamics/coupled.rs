use std::io::Write;

use serde::Serialize;

use crate::cloud::{sample_cloud_from, DistributionSpec, ParticleCloud};
use crate::error::{Error, Result};
use crate::functionals::{ConfiningPotential, MeanFieldFunctional};
use crate::measure::Measure;
use crate::rng;

use super::oracle::MeanFieldOracle;
use super::params::{NoiseStreams, SimParams};
use super::step::{advance, drift_mismatch};

/// Interacting particles `Xⁱ` and independent mean-field particles `X̄ⁱ`
/// driven by the same Brownian increments, particle by particle.
pub struct CoupledSystem<'a> {
    interacting: ParticleCloud,
    reference: ParticleCloud,
    noise: NoiseStreams,
    oracle: MeanFieldOracle<'a>,
    replica: u64,
}

impl<'a> CoupledSystem<'a> {
    /// Both clouds start from the same draw of `init` (`X_0 = X̄_0`).
    pub fn new(
        init: &DistributionSpec,
        n: usize,
        params: &SimParams,
        replica: u64,
        oracle: MeanFieldOracle<'a>,
    ) -> Result<Self> {
        let interacting = sample_cloud_from(init, n, params.seed, rng::INIT, replica)?;
        let reference = interacting.clone();
        let noise = NoiseStreams::new(params.seed, replica, n, init.dim(), params.brownian_refinement);
        Self::from_clouds(interacting, reference, noise, oracle, replica)
    }

    pub fn from_clouds(
        interacting: ParticleCloud,
        reference: ParticleCloud,
        noise: NoiseStreams,
        oracle: MeanFieldOracle<'a>,
        replica: u64,
    ) -> Result<Self> {
        if interacting.dim() != reference.dim() {
            return Err(Error::DimensionMismatch { expected: interacting.dim(), got: reference.dim() });
        }
        if interacting.n() != reference.n() || noise.len() != interacting.n() {
            return Err(Error::DimensionMismatch { expected: interacting.n(), got: reference.n().min(noise.len()) });
        }
        Ok(Self { interacting, reference, noise, oracle, replica })
    }

    pub fn interacting(&self) -> &ParticleCloud {
        &self.interacting
    }

    pub fn reference(&self) -> &ParticleCloud {
        &self.reference
    }

    pub fn oracle(&self) -> &MeanFieldOracle<'a> {
        &self.oracle
    }

    pub fn replica(&self) -> u64 {
        self.replica
    }

    /// `(1/n) Σ |Xⁱ − X̄ⁱ|²`.
    pub fn gap_sq_per_particle(&self) -> f64 {
        let a = self.interacting.positions();
        let b = self.reference.positions();
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / self.interacting.n() as f64
    }
}

/// One saved time of a coupled run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub t: f64,
    pub step: usize,
    pub n: usize,
    pub seed: u64,
    pub replica: u64,
    pub gap_sq_per_particle: f64,
    /// `F(m_X)` of the interacting cloud.
    pub interaction_energy: f64,
    pub moment2: f64,
    pub drift_mismatch: f64,
}

/// Called at every save time after the built-in statistics are recorded.
pub trait Observer {
    fn observe(&mut self, obs: &Observation, system: &CoupledSystem<'_>) -> Result<()>;
}

/// Keeps the interacting cloud at every save time.
#[derive(Debug, Default, Clone)]
pub struct SnapshotRecorder {
    pub snapshots: Vec<(usize, ParticleCloud)>,
}

impl Observer for SnapshotRecorder {
    fn observe(&mut self, obs: &Observation, system: &CoupledSystem<'_>) -> Result<()> {
        self.snapshots.push((obs.step, system.interacting().clone()));
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledReport {
    pub rows: Vec<Observation>,
    /// False when the run stopped early; `failure` says why.
    pub completed: bool,
    pub failure: Option<String>,
}

impl CoupledReport {
    /// `t,n,seed,replica,gap_sq_per_particle,interaction_energy,moment2,drift_mismatch`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates the coupled system to `t_end`, recording [`Observation`]s at
/// the save times. Divergence or an observer error ends the run early and
/// is reported in the returned, partial report. Errors are returned only
/// for invalid inputs.
pub fn run_coupled(
    system: &mut CoupledSystem<'_>,
    functional: &dyn MeanFieldFunctional,
    potential: &ConfiningPotential,
    params: &SimParams,
    observers: &mut [&mut dyn Observer],
) -> Result<CoupledReport> {
    params.validate()?;
    if functional.dim() != system.interacting.dim() {
        return Err(Error::DimensionMismatch { expected: functional.dim(), got: system.interacting.dim() });
    }
    let steps = params.steps()?;
    let saves = params.save_steps()?;
    let mut rows = Vec::with_capacity(saves.len());
    let failure = integrate(system, functional, potential, params, steps, &saves, &mut rows, observers).err();
    Ok(CoupledReport { rows, completed: failure.is_none(), failure: failure.map(|e| e.to_string()) })
}

#[allow(clippy::too_many_arguments)]
fn integrate(
    system: &mut CoupledSystem<'_>,
    functional: &dyn MeanFieldFunctional,
    potential: &ConfiningPotential,
    params: &SimParams,
    steps: usize,
    saves: &[usize],
    rows: &mut Vec<Observation>,
    observers: &mut [&mut dyn Observer],
) -> Result<()> {
    let n = system.interacting.n();
    let (sigma, dt) = (params.sigma, params.dt);
    let mut noise = vec![0.0; system.interacting.positions().len()];
    let mut scratch = Vec::new();
    let mut next_save = saves.iter().peekable();
    for step in 0..=steps {
        let oracle_field = system.oracle.field(step)?;
        if next_save.next_if_eq(&&step).is_some() {
            let obs = Observation {
                t: step as f64 * dt,
                step,
                n,
                seed: params.seed,
                replica: system.replica,
                gap_sq_per_particle: system.gap_sq_per_particle(),
                interaction_energy: functional.value(&system.interacting),
                moment2: system.interacting.empirical_moment(2)?,
                drift_mismatch: drift_mismatch(&system.interacting, oracle_field.as_ref(), functional, sigma),
            };
            for o in observers.iter_mut() {
                o.observe(&obs, system)?;
            }
            rows.push(obs);
        }
        if step == steps {
            break;
        }
        system.noise.fill(dt, &mut noise);
        let field = functional.freeze(&system.interacting);
        advance(&mut system.interacting, field.as_ref(), potential, sigma, dt, &noise, &mut scratch, step)?;
        advance(&mut system.reference, oracle_field.as_ref(), potential, sigma, dt, &noise, &mut scratch, step)?;
    }
    Ok(())
}
