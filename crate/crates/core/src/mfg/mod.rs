//! The coupled solver: Picard iteration between the backward HJB solve and
//! the forward particle flow, the stitched value function `V(t, x, μ)` and
//! measurements of its properties.

pub mod flow;
pub mod picard;
pub mod probes;
pub mod problem;
pub mod value;

pub use flow::{forward_flow, FlowOptions, MeasureFlow, Particles};
pub use picard::{picard_local, LocalSolution, LocalSolveReport, TermTerminal, TerminalData};
pub use probes::{
    good_solution_consistency, regularity_probes, stability_curve, value_pairing, GoodSolutionReport, ProbeSet,
    RegularityReport, StabilityReport,
};
pub use problem::{MfgConfig, MfgProblem, PicardOptions, SpaceGrid};
pub use value::{solve_value, Section, ValueFunction};

use crate::error::Result;
use crate::measures::EmpiricalMeasure;

/// `∫ [Φ(x, μ1) - Φ(x, μ2)] (μ1 - μ2)(dx)`, summed exactly over the atoms.
pub fn monotonicity_pairing(
    phi: &dyn Fn(&[f64], &EmpiricalMeasure) -> Result<f64>,
    mu1: &EmpiricalMeasure,
    mu2: &EmpiricalMeasure,
) -> Result<f64> {
    let mut terms = Vec::with_capacity(mu1.len() + mu2.len());
    for (x, w) in mu1.atoms() {
        terms.push(w * (phi(x, mu1)? - phi(x, mu2)?));
    }
    for (x, w) in mu2.atoms() {
        terms.push(-w * (phi(x, mu1)? - phi(x, mu2)?));
    }
    Ok(crate::measures::compensated_sum(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hjb::Term;

    #[test]
    fn quadratic_pairing_identity() {
        let mu1 = EmpiricalMeasure::from_points(vec![-1.0, 0.5, 2.0], vec![0.2, 0.5, 0.3]).unwrap();
        let mu2 = EmpiricalMeasure::from_points(vec![0.0, 1.5], vec![0.6, 0.4]).unwrap();
        let q = Term::Quadratic { scale: 1.0 };
        let p = monotonicity_pairing(&|x, m| q.eval(x[0], m), &mu1, &mu2).unwrap();
        let dm = mu1.stats().unwrap().mean - mu2.stats().unwrap().mean;
        assert!((p + 2.0 * dm * dm).abs() < 1e-14);
        let free = monotonicity_pairing(&|x, _| Ok(x[0].sin()), &mu1, &mu2).unwrap();
        assert!(free.abs() < 1e-15);
    }
}
