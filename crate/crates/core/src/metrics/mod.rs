//! Distances, entropies and rate diagnostics for particle systems.

pub mod chain;
pub mod concentration;
pub mod entropy;
pub mod sinkhorn;
pub mod transport;

pub use concentration::{empirical_w2_rate, leave_one_out_check, mean_field_fluctuation, RateReport, RateRow};
pub use chain::{chain_entropy_check, ChainEntropy, DiscreteJoint};
pub use entropy::{free_energy_particle, relative_entropy_1d, relative_entropy_grid, FreeEnergyEstimate};
pub use sinkhorn::{w2_sinkhorn, SinkhornOptions};
pub use transport::{w2_1d_exact, w2_1d_to_law, w2_exact_assignment, TransportMethod, TransportPlanResult};
