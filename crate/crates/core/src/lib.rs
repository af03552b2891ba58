//! Sparse phase retrieval from magnitude-only measurements by alternating
//! support matching, estimation on a small subspace, and pruning.

pub mod analysis;
pub mod error;
pub mod imaging;
pub mod io;
pub mod objective;
pub mod sampling;
pub mod signal;
pub mod spectral_init;
pub mod spr;
pub mod subspace_solver;
mod summation;

pub use error::{Result, SprError};
pub use sampling::{
    gen_gaussian_operator, gen_sparse_signal, observe, DftMode, Fourier2DOperator,
    GaussianOperator, RngSeed, Sampling, SignalFlavor,
};
pub use signal::{
    captured_energy, nmse, phase_dist, restrict, top_k_by, top_k_indices, ComplexSignal,
    Observations, RecoveryReport, SupportSet, DEFAULT_SUCCESS_THRESHOLD,
};
pub use subspace_solver::{default_z0, solve_on_support, SolverConfig, SolverOutcome};
pub use spr::{matching_indices, run_spr, run_spr_partitioned, SprConfig};
