//! Euler–Maruyama integration of the `n`-particle Langevin system
//!
//! `dXⁱ = −(D_mF(m_X, Xⁱ) + (σ²/2)∇u(Xⁱ)) dt + σ dWⁱ`
//!
//! and of independent mean-field particles `X̄ⁱ` driven by `D_mF(m̄_t, ·)`,
//! synchronously coupled through shared Brownian increments.

mod coupled;
mod oracle;
mod params;
mod step;

pub use coupled::{run_coupled, CoupledReport, CoupledSystem, Observation, Observer, SnapshotRecorder};
pub use oracle::{MeanFieldOracle, MeanFieldPath, ReferenceCloud, ORACLE_STREAM_OFFSET};
pub use params::{NoiseStreams, SimParams};
pub use step::{drift_mismatch, em_step_interacting, em_step_reference, second_moment_bound};
