//! Local fixed point between the backward HJB solve and the forward flow.

use serde::{Deserialize, Serialize};

use super::flow::{flow_from_particles, FlowOptions, MeasureFlow, Particles};
use super::problem::MfgProblem;
use crate::error::{MflabError, Result};
use crate::hjb::{solve_backward_values, BoundTerm, GridField, Term};
use crate::measures::EmpiricalMeasure;

/// Contraction history of one local solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalSolveReport {
    pub iterations: usize,
    /// `sup_t W1(ρ^{k-1}_t, ρ^k_t)` after iteration `k`.
    pub flow_gaps: Vec<f64>,
    pub converged: bool,
    pub horizon_used: f64,
}

impl LocalSolveReport {
    /// Successive gap ratios `gap_{k+1}/gap_k` while both are positive.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.flow_gaps
            .windows(2)
            .filter(|w| w[0] > 0.0 && w[1] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

/// Output of a local solve on global steps `first..=last`.
#[derive(Clone, Debug)]
pub struct LocalSolution {
    pub first: usize,
    pub last: usize,
    pub field: GridField,
    pub flow: MeasureFlow,
    pub report: LocalSolveReport,
}

impl LocalSolution {
    /// `u(t_first, x)`.
    pub fn value(&self, x: f64) -> f64 {
        self.field.value(0, x)
    }

    /// `∂x u(t_first, x)`.
    pub fn grad(&self, x: f64) -> f64 {
        self.field.grad(0, x)
    }
}

/// Terminal data of a local problem: the nodal values of `x ↦ Ψ(x, ρ)`.
pub trait TerminalData: Sync {
    fn values(&self, rho: &EmpiricalMeasure, xs: &[f64]) -> Result<Vec<f64>>;

    /// True when the values do not depend on `ρ`.
    fn is_frozen(&self) -> bool {
        false
    }
}

/// Terminal data given by a coupling term.
pub struct TermTerminal<'a>(pub &'a Term);

impl TerminalData for TermTerminal<'_> {
    fn values(&self, rho: &EmpiricalMeasure, xs: &[f64]) -> Result<Vec<f64>> {
        let b = self.0.bind(rho)?;
        Ok(xs.iter().map(|&x| b.eval(x)).collect())
    }
}

impl<F: Fn(&EmpiricalMeasure, &[f64]) -> Result<Vec<f64>> + Sync> TerminalData for F {
    fn values(&self, rho: &EmpiricalMeasure, xs: &[f64]) -> Result<Vec<f64>> {
        self(rho, xs)
    }
}

fn bind_running<'a>(term: &'a Term, flow: &MeasureFlow) -> Result<Option<Vec<BoundTerm<'a>>>> {
    if term.is_zero() {
        return Ok(None);
    }
    let mut out = Vec::with_capacity(flow.levels());
    for k in 0..flow.levels() {
        let b = if term.is_simple() {
            BoundTerm::Simple(term, flow.stats[k])
        } else {
            term.bind(flow.nearest(k))?
        };
        out.push(b);
    }
    Ok(Some(out))
}

/// Flow options for a local solve starting at global step `first`.
pub fn flow_options(problem: &MfgProblem, first: usize, seed: u64) -> FlowOptions {
    FlowOptions {
        particles: problem.particles,
        antithetic: problem.antithetic,
        seed,
        first_step: first as u64,
        snapshots: 11,
    }
}

/// Picard iteration on global steps `first..=last` from `rho0`.
///
/// The first guess is the driftless flow.  Each iteration solves the HJB
/// equation against the current flow and re-simulates the particles with
/// the same noise; it stops once two consecutive flows are within `tol`.
pub fn picard_local(
    problem: &MfgProblem,
    rho0: &EmpiricalMeasure,
    first: usize,
    last: usize,
    terminal: &dyn TerminalData,
    seed: u64,
) -> Result<LocalSolution> {
    if last <= first {
        return Err(MflabError::Invalid(format!("empty interval {first}..{last}")));
    }
    let grid = problem.space_time(first, last)?;
    let xs = grid.xs();
    let opts = flow_options(problem, first, seed);
    let start = Particles::for_flow(rho0, &opts)?;
    let h = problem.hamiltonian.as_ref();
    let mut prev = flow_from_particles(&start, &|_, _| 0.0, &grid, &opts)?;
    let mut prev_field: Option<GridField> = None;
    let mut gaps = Vec::new();
    let mut frozen: Option<Vec<f64>> = None;
    for it in 1..=problem.picard.max_iter {
        let term_values = match &frozen {
            Some(v) => v.clone(),
            None => {
                let v = terminal.values(prev.terminal(), &xs)?;
                if terminal.is_frozen() {
                    frozen = Some(v.clone());
                }
                v
            }
        };
        let running = bind_running(&problem.coupling.running, &prev)?;
        let source = |k: usize, x: f64| running.as_ref().map_or(0.0, |r| r[k].eval(x));
        let field = solve_backward_values(&grid, h, &source, term_values, &problem.hjb)?;
        let flow = {
            let new = |k: usize, x: f64| h.dp(x, field.grad(k, x));
            match (problem.picard.relaxation, &prev_field) {
                (Some(w), Some(old)) => {
                    let mixed = |k: usize, x: f64| w * new(k, x) + (1.0 - w) * h.dp(x, old.grad(k, x));
                    flow_from_particles(&start, &mixed, &grid, &opts)?
                }
                _ => flow_from_particles(&start, &new, &grid, &opts)?,
            }
        };
        let gap = flow.gap(&prev)?;
        gaps.push(gap);
        if gap <= problem.picard.tol {
            return Ok(LocalSolution {
                first,
                last,
                field,
                flow,
                report: LocalSolveReport {
                    iterations: it,
                    flow_gaps: gaps,
                    converged: true,
                    horizon_used: grid.t1 - grid.t0,
                },
            });
        }
        let n = gaps.len();
        if n >= 4 && gaps[n - 1] >= gaps[n - 2] && gaps[n - 2] >= gaps[n - 3] {
            return Err(MflabError::NoContraction { gaps });
        }
        prev = flow;
        prev_field = Some(field);
    }
    Err(MflabError::NoContraction { gaps })
}
