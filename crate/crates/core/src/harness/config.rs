use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cloud::DistributionSpec;
use crate::dynamics::SimParams;
use crate::error::{Error, Result};
use crate::functionals::{
    CompositeExpectation, ConfiningPotential, FlippedIntrinsic, MeanFieldFunctional, PairwiseInteraction,
    QuadraticOuter, TanhFeatures, TwoLayerNetLoss, ZeroFunctional,
};

/// Functional family and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionalSpec {
    Zero { dim: usize },
    Pairwise { dim: usize, amplitude: f64, length_scale: f64 },
    /// `g(y) = (κ/2)|y − target|²` of `tanh(w_j·x + b_j)` features.
    Composite { curvature: f64, target: Vec<f64>, weights: Vec<Vec<f64>>, biases: Vec<f64> },
    TwoLayer { inputs: Vec<f64>, targets: Vec<f64>, truncation: f64 },
}

impl FunctionalSpec {
    pub fn build(&self) -> Result<Box<dyn MeanFieldFunctional>> {
        Ok(match self {
            Self::Zero { dim } => {
                if *dim == 0 {
                    return Err(Error::Config("functional.dim must be at least 1".into()));
                }
                Box::new(ZeroFunctional { dim: *dim })
            }
            Self::Pairwise { dim, amplitude, length_scale } => {
                Box::new(PairwiseInteraction::gaussian(*dim, *amplitude, *length_scale)?)
            }
            Self::Composite { curvature, target, weights, biases } => {
                let features = TanhFeatures::new(weights.clone(), biases.clone())?;
                let outer = QuadraticOuter { curvature: *curvature, target: target.clone() };
                Box::new(CompositeExpectation::new(outer, std::sync::Arc::new(features))?)
            }
            Self::TwoLayer { inputs, targets, truncation } => {
                Box::new(TwoLayerNetLoss::new(inputs.clone(), targets.clone(), *truncation)?)
            }
        })
    }

    /// The composite functional itself, when this spec is one.
    pub fn build_composite(&self) -> Result<Option<CompositeExpectation>> {
        match self {
            Self::Composite { curvature, target, weights, biases } => {
                let features = TanhFeatures::new(weights.clone(), biases.clone())?;
                let outer = QuadraticOuter { curvature: *curvature, target: target.clone() };
                Ok(Some(CompositeExpectation::new(outer, std::sync::Arc::new(features))?))
            }
            _ => Ok(None),
        }
    }
}

/// Deliberate defects for checking that validation catches them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    FlipIntrinsicSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub half_width: f64,
    pub cells: usize,
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub dt: f64,
    pub dt_max: f64,
    pub t_end: f64,
    pub save_every: f64,
    /// Normals per Brownian increment; even values allow the `dt/2` check.
    pub brownian_refinement: usize,
    /// Repeat sweeps at `dt/2` on the same Brownian path and compare.
    pub halving_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    /// Grid flow of the mean-field equation from the initial law.
    Grid,
    /// Invariant measure `m_*` from the fixed-point solver, held fixed.
    Stationary,
    /// Interacting cloud of the given size, advanced alongside each replica.
    Cloud { size: usize },
}

/// Time windows used by the sweep analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    /// `[a, b]` over which the gap supremum is taken.
    pub sup_window: [f64; 2],
    /// Late window for plateau levels and the growth check.
    pub plateau_window: [f64; 2],
    /// Window fitted by the exponential-plus-floor model.
    pub early_window: [f64; 2],
    /// Times at which per-time gap slopes are reported.
    pub slope_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub joints: usize,
    pub max_variables: usize,
    pub max_alphabet: usize,
}

/// Complete description of a run. Every key is required except
/// `output_dir` and `fault`; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub functional: FunctionalSpec,
    pub potential: ConfiningPotential,
    pub sigma: f64,
    pub initial: DistributionSpec,
    pub grid: GridSpec,
    pub integrator: IntegratorSpec,
    pub n_list: Vec<usize>,
    pub replicas: usize,
    pub seed: u64,
    pub oracle: OracleSpec,
    pub analysis: AnalysisSpec,
    pub chain: ChainSpec,
    pub output_dir: Option<String>,
    pub fault: Option<Fault>,
}

fn cfg(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| cfg(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.functional()?;
        self.potential.validate()?;
        if !(self.sigma > 0.0) {
            return Err(cfg("sigma must be positive"));
        }
        self.initial.validate()?;
        if self.initial.dim() != f.dim() {
            return Err(cfg(format!("initial law has dimension {} but the functional {}", self.initial.dim(), f.dim())));
        }
        let g = &self.grid;
        if !(g.half_width > 0.0) || g.cells < 2 || !(g.damping > 0.0 && g.damping <= 1.0) || !(g.tolerance > 0.0) || g.max_iterations == 0 {
            return Err(cfg("grid needs half_width > 0, cells ≥ 2, damping in (0, 1], tolerance > 0, max_iterations ≥ 1"));
        }
        let i = &self.integrator;
        if !(i.dt > 0.0) || !(i.dt <= i.dt_max) {
            return Err(cfg(format!("dt = {} must lie in (0, dt_max = {}]", i.dt, i.dt_max)));
        }
        self.sim_params()?;
        if i.halving_check && i.brownian_refinement % 2 != 0 {
            return Err(cfg("halving_check needs an even brownian_refinement"));
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(cfg("n_list must be nonempty, positive and strictly ascending"));
        }
        if self.replicas < 2 {
            return Err(cfg("replicas must be at least 2"));
        }
        if let OracleSpec::Cloud { size } = self.oracle {
            if size < 2 {
                return Err(cfg("oracle cloud needs at least two particles"));
            }
        }
        if f.dim() != 1 && !matches!(self.oracle, OracleSpec::Cloud { .. }) {
            return Err(cfg("grid and stationary oracles need d = 1"));
        }
        let a = &self.analysis;
        for (name, w) in [("sup_window", a.sup_window), ("plateau_window", a.plateau_window), ("early_window", a.early_window)] {
            if !(w[0] <= w[1]) || w[0] < 0.0 || w[1] > i.t_end + 1e-12 {
                return Err(cfg(format!("analysis.{name} must be an ordered window inside [0, t_end]")));
            }
        }
        if a.slope_times.iter().any(|&t| !(0.0..=i.t_end).contains(&t)) {
            return Err(cfg("analysis.slope_times must lie in [0, t_end]"));
        }
        let c = &self.chain;
        if c.max_variables == 0 || c.max_variables > crate::metrics::chain::MAX_VARIABLES {
            return Err(cfg("chain.max_variables out of range"));
        }
        if c.max_alphabet < 2 || c.max_alphabet > crate::metrics::chain::MAX_ALPHABET {
            return Err(cfg("chain.max_alphabet out of range"));
        }
        Ok(())
    }

    /// The configured functional, with the fault applied.
    pub fn functional(&self) -> Result<Box<dyn MeanFieldFunctional>> {
        let f = self.functional.build()?;
        Ok(match self.fault {
            Some(Fault::FlipIntrinsicSign) => Box::new(FlippedIntrinsic(f)),
            None => f,
        })
    }

    pub fn sim_params(&self) -> Result<SimParams> {
        let i = &self.integrator;
        let mut p = SimParams::with_regular_saves(self.sigma, i.dt, i.t_end, i.save_every, self.seed)?;
        p.brownian_refinement = i.brownian_refinement;
        p.validate()?;
        Ok(p)
    }
}
