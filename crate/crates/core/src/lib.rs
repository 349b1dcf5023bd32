//! Simulation of two-axis countertwisting spin squeezing in a large atomic
//! spin ensemble, the Faraday probe that reads it out, and the reconstruction
//! of the squeezed state from the probe records.
//!
//! Units: hbar = 1, times in ms, rates and energies in rad/ms. Spin matrices
//! use the basis `m = +F, ..., -F` (row 0 is `m = +F`).

pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod probe;
pub mod spin;
pub mod squeezing;
pub mod stats;
pub mod tomography;

pub use dynamics::{
    compensated_hamiltonian, evolve_lindblad, evolve_unitary, oat_hamiltonian, tact_hamiltonian,
    CompensatedHamiltonian, DecayChannels, Hamiltonian, LindbladPropagator,
};
pub use error::{Error, Result};
pub use experiment::{prepare_initial_state, run_sweep, ExperimentConfig, SweepResult, SweepRow};
pub use probe::{canonical_moments, simulate_records, CanonicalMoments, MeasurementRecord};
pub use spin::{css_x, spin_operators, QuantumState, SpinOperators, SpinQuantumNumber};
pub use squeezing::{husimi, squeezing_report, tact_optimum, HusimiGrid, SqueezingReport, TwistingOptimum};
pub use tomography::{
    correct_covariance, mle_reconstruct, variances_from_rho, CorrectedCovariance, MleOptions,
    OscillatorDensityMatrix,
};
