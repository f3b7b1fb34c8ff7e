//! Backward HJB solves on a 1-d grid against a frozen measure flow.

pub mod coupling;
pub mod grid;
pub mod hamiltonian;
pub mod solver;

pub use coupling::{BoundTerm, CouplingSpec, ScalarFn, Term};
pub use grid::{GridField, SpaceTimeGrid};
pub use hamiltonian::{convexity_witness, FnHamiltonian, Hamiltonian, HamiltonianKind, HamiltonianSpec, Mollified, Quadratic};
pub use solver::{feynman_kac_mean, solve_backward, solve_backward_values, HjbOptions};
