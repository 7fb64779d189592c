//! Fixtures shared by the benchmarks.

use tumorstrip_core::evolution::BoundaryFlow;
use tumorstrip_core::stationary::make_state;
use tumorstrip_core::{BoundaryProfile, Discretization, ModelParameters, PeriodicGrid, SolverKind, VerticalGrid};

/// Reference flow on an `n × n` grid.
pub fn reference_flow(n: usize, solver: SolverKind) -> BoundaryFlow {
    let disc = Discretization::new(PeriodicGrid::new(n).unwrap(), VerticalGrid::new(n, 0.5).unwrap());
    BoundaryFlow::new(ModelParameters::reference(), disc).unwrap().with_solver(solver)
}

/// Equilibrium height plus a small first-mode wave.
pub fn perturbed_profile(n: usize, eps: f64) -> BoundaryProfile {
    let rho = make_state(&ModelParameters::reference()).unwrap().rho_star;
    BoundaryProfile::from_fn(PeriodicGrid::new(n).unwrap(), |x| rho + eps * x.cos()).unwrap()
}
