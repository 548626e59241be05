//! Finite-volume spectral analysis of one-dimensional alloy-type random
//! Schrödinger operators `H_ω = -d²/dx² + V_per + Σ_k ω_k u(x - k)`.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`]: the operator family, its canonical gauge, and coupling samples;
//! * [`operator`]: finite-difference assembly on a box, interior cuts;
//! * [`spectral`]: Sturm counts, bisection, inverse iteration, dense QL;
//! * [`ensemble`]: reproducible Monte Carlo over disorder realizations;
//! * [`analysis`]: IDS, Wegner statistics, Lipschitz modulus, localization;
//! * [`verify`]: numerical checks of Hellmann–Feynman, the derivative lower
//!   bound, unique continuation, and Dirichlet–Neumann bracketing.

pub mod analysis;
pub mod ensemble;
pub mod error;
pub mod model;
pub mod operator;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use model::{
    lattice_sites, sample_couplings, sample_realization, sample_total_potential, CanonicalModel,
    CouplingDensity, ModelSpec, PeriodicPotential, Realization, SingleSitePotential, StreamId,
};
pub use operator::{assemble, split_at, Boundary, GridSpec, StencilFault, TridiagonalOperator};
pub use spectral::{
    count_below, dense_eigensystem, dense_spectrum, eigenpair, eigenvalues_in, trace_projection, EigenPair,
    SpectralWindow,
};
