//! Numerical laboratory for mean-field-game master equations.
//!
//! Measures and Wasserstein distances ([`measures`]), the lattice mollifier
//! on measure space ([`mollifier`]), backward HJB solves ([`hjb`]), the
//! coupled value function `V(t, x, μ)` ([`mfg`]), its derivatives
//! ([`lions`]), N-player Nash oracles and convergence experiments
//! ([`nash`]) and the reproducible experiment shell ([`harness`]).

pub mod error;
pub mod harness;
pub mod hjb;
pub mod lions;
pub mod measures;
pub mod mfg;
pub mod mollifier;
pub mod nash;
pub mod quadrature;
pub mod rng;

pub use error::{MflabError, Result};
pub use measures::{DistributionSpec, EmpiricalMeasure};
