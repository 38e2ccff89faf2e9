//! Numerical laboratory for the chemical diffusion master equation of
//! creation (`∅ → S`) and pairwise annihilation (`S + S → ∅`) with reflected
//! Brownian diffusion on `[0, 1]`.
//!
//! Three routes to the same law are provided and cross-checked:
//!
//! * [`generator`]: the coefficient hierarchy of the projected generating
//!   function, a linear ODE `dc/dt = L c` over mode multi-indices,
//!   assembled two independent ways;
//! * [`mcsim`]: an exact event-driven particle simulator;
//! * [`analysis`]: the spatially integrated chemical master equation and
//!   closed-form oracles.
//!
//! [`state`] reconstructs particle-number laws, intensities and kernels from
//! coefficient vectors.

pub mod analysis;
pub mod error;
pub mod generator;
pub mod mcsim;
pub mod spectral;
pub mod state;

pub use error::{CdmeError, Result};
pub use generator::{
    assemble_from_cdme, assemble_from_genfun, evolve, rk4_step, GeneratorMatrix, IntegratorConfig,
    IntegratorMethod,
};
pub use mcsim::{estimate, run_replica, McEstimate, ParticleEnsemble, SimConfig};
pub use spectral::{make_basis, project_creation_rate, CreationRate, ModeBasis, RateFn};
pub use state::{CoeffState, MultiIndexSpace, Observables};
