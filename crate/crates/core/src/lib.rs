//! Numerical model of a thin tumor layer growing on a flat substrate.
//!
//! The tumor occupies `{(x, y) : 0 < y < ρ(t, x)}` with `x` periodic. The
//! nutrient solves `Δσ = σ`, the pressure solves `Δp = -μ(σ - σ̃)` with
//! `p = γκ` on the free surface, and the surface moves with the normal
//! derivative of the pressure. The crate provides
//!
//! * the flat stationary state in closed form ([`stationary`]),
//! * the Fourier multipliers of the linearization about it ([`spectrum`]),
//! * the pulled-back elliptic problems on the fixed strip ([`elliptic`]),
//! * time integration of the nonlinear surface evolution ([`evolution`]).

pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod field;
pub mod fourier;
pub mod grid;
pub mod params;
pub mod spectrum;
pub mod stationary;
mod krylov;
mod tridiag;

pub use error::{Error, Result};
pub use elliptic::{Discretization, SolverKind, TransformedOperator};
pub use evolution::{evolve, fit_decay, BoundaryFlow, DecayEstimate, EvolutionConfig, EvolutionTrace, Stepper, Termination, TimeStep};
pub use field::StripField;
pub use fourier::{from_fourier, spectral_derivative, to_fourier, BoundaryProfile, DerivativeOrder, FourierCoeffs};
pub use grid::{PeriodicGrid, VerticalGrid};
pub use params::ModelParameters;
pub use spectrum::{gamma_threshold, lambda_k, spectrum, tail_ratio, SpectrumReport, ThresholdReport};
pub use stationary::{make_state, solve_rho_star, FlatStationaryState};
