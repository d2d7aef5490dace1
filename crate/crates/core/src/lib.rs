//! Two-field reaction process on a cyclic lattice and the exact quantum
//! free-particle evolution it reproduces.
//!
//! A state holds two real fields `a_s`, `b_s` (A and B particle counts,
//! negative for antiparticles). Read as `c_s = a_s + i b_s`, the reaction
//! step is the linearized Schrödinger step `c ← c - i τ P² c` with the
//! momentum operator defined through the unbiased basis.

pub mod error;
pub mod evolution;
pub mod experiments;
pub mod io;
pub mod kernel;
pub mod lattice;
pub mod observables;
pub mod spectral;
pub mod state;

pub use error::{Error, Result};
pub use evolution::{
    euler_step, euler_step_spectral, even_naive_step, exact_step, run, run_with, translate,
    translate_spectral, EulerPath, EvolutionConfig, Propagator, RunOptions, Scheme, StepCheck,
};
pub use kernel::{kernel_f, kernel_f_spectral, kernel_g, kernel_g_spectral, KernelTable};
pub use lattice::{Lattice, Parity, Site};
pub use observables::{
    drift_velocity, gaussian_shape_residual, momentum_distribution, momentum_expectation,
    momentum_expectation_spectral, position_mean, position_spread, ObservableSnapshot, Observer,
    TimeSeries,
};
pub use spectral::{from_momentum_basis, to_momentum_basis, MomentumSpectrum, SpectralBasis};
pub use state::{gaussian_state, random_state, uniform_state, FieldState, Shape, StateSpec};
