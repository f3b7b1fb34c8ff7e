//! Derivatives of the value function: `∂x V` from the local field, the
//! Lions derivative `∂μ V` by atom-shift finite differences, and a
//! tangent-process representation of `∂μ V(0, x, μ, x̃)` for couplings
//! whose HJB solution moves by translation with the population mean.
//!
//! For `G = g(x) + c·m_μ` the field `∂x u` does not depend on the flow, so
//! the tangent of a particle started at the probed atom is
//! `d∇X = κ ∇X dt`, `κ = ∂xp H + ∂pp H ∂xx u`, and
//! `∂μ V = c·E[∇X_T]`.
//!
//! For `G = s(x - m_μ)²` with `H` independent of `x`, `u(t, x) =
//! w(t, x - m_T)`, so a perturbation of the terminal mean `δm` moves the
//! drift by `-∂pp H ∂xx u δm`.  Tangents split as `∇X = A + B·M` with
//! `A' = κA`, `A_0 = 1` on the probed atom, `B' = κB - ∂pp H ∂xx u`,
//! `B_0 = 0`, and the mean perturbation closes as
//! `M = Σ w A_T / (1 - Σ w B_T)`.  By the envelope property the value moves
//! by `-E[∂x G(X^x_T, ρ_T)]·M` along the optimally controlled path from `x`.

use serde::{Deserialize, Serialize};

use crate::error::{MflabError, Result};
use crate::hjb::Term;
use crate::measures::EmpiricalMeasure;
use crate::mfg::flow::{level_positions, simulate_paths, Particles};
use crate::mfg::picard::flow_options;
use crate::mfg::ValueFunction;
use crate::rng::{tags, StreamKey};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub value: f64,
    pub oracle: f64,
    pub rel_err: f64,
    pub method: String,
}

impl DerivativeReport {
    pub fn new(value: f64, oracle: f64, floor: f64, method: &str) -> Self {
        DerivativeReport {
            value,
            oracle,
            rel_err: (value - oracle).abs() / oracle.abs().max(floor),
            method: method.to_string(),
        }
    }
}

/// Tangent values of every particle at every level, path-major.
#[derive(Clone, Debug)]
pub struct TangentPath {
    pub levels: usize,
    pub values: Vec<f64>,
}

impl TangentPath {
    pub fn at(&self, particle: usize, level: usize) -> f64 {
        self.values[particle * self.levels + level]
    }

    pub fn terminal(&self) -> Vec<f64> {
        level_positions(&self.values, self.levels, self.levels - 1)
    }
}

/// `∂x V(t, x, μ)`.
pub fn grad_x_v(v: &ValueFunction, t: f64, x: f64, mu: &EmpiricalMeasure) -> Result<f64> {
    v.grad_x(t, x, mu)
}

/// Symmetric difference quotient of `V(t, x, ·)` under a shift of atom `i`
/// by `±h`, divided by `2h·w_i`.
pub fn lions_derivative_fd(v: &ValueFunction, t: f64, x: f64, mu: &EmpiricalMeasure, atom: usize, h: f64) -> Result<f64> {
    if atom >= mu.len() {
        return Err(MflabError::Range(format!("atom {atom} of {}", mu.len())));
    }
    let p = &v.problem().grid;
    let dx = (p.x_max - p.x_min) / (p.nx - 1) as f64;
    if !(h >= 1e-3 * dx) {
        return Err(MflabError::Resolution(format!(
            "step h = {h:e} is below the grid resolution floor {:e}",
            1e-3 * dx
        )));
    }
    let up = v.eval(t, x, &mu.with_shifted_atom(atom, h)?)?;
    let down = v.eval(t, x, &mu.with_shifted_atom(atom, -h)?)?;
    Ok((up - down) / (2.0 * h * mu.weights()[atom]))
}

/// Default finite-difference step: `1e-2` times the spread of `μ`.
pub fn default_fd_step(mu: &EmpiricalMeasure) -> f64 {
    let s = mu.stats().map(|s| (s.second_moment - s.mean * s.mean).max(0.0).sqrt()).unwrap_or(0.0);
    1e-2 * if s > 0.0 { s } else { 1.0 }
}

/// Finite difference at `h` and `h/2`; the flag reports agreement within 10%.
pub fn lions_derivative_fd_checked(
    v: &ValueFunction,
    t: f64,
    x: f64,
    mu: &EmpiricalMeasure,
    atom: usize,
    h: f64,
) -> Result<(f64, bool)> {
    let a = lions_derivative_fd(v, t, x, mu, atom, h)?;
    let b = lions_derivative_fd(v, t, x, mu, atom, 0.5 * h)?;
    let agree = (a - b).abs() <= 0.1 * a.abs().max(b.abs()).max(1e-12);
    Ok((b, agree))
}

enum Family {
    MeanLinear { c: f64 },
    Translation,
}

fn family(v: &ValueFunction) -> Result<Family> {
    let p = v.problem();
    if !p.coupling.running.is_zero() {
        return Err(MflabError::Family("the representation needs F = 0".into()));
    }
    match &p.coupling.terminal {
        Term::Zero => Ok(Family::MeanLinear { c: 0.0 }),
        Term::MeanLinear { c, .. } => Ok(Family::MeanLinear { c: *c }),
        Term::Quadratic { .. } => {
            let h = p.hamiltonian.as_ref();
            let moves = [(-1.3, 0.4), (0.0, -2.0), (2.2, 1.1)]
                .iter()
                .any(|&(x, z)| h.dx(x, z) != 0.0 || h.dxp(x, z) != 0.0);
            if moves {
                return Err(MflabError::Family("the translation closure needs H independent of x".into()));
            }
            Ok(Family::Translation)
        }
        other => Err(MflabError::Family(format!("no representation for terminal coupling {other:?}"))),
    }
}

/// Tangent processes of the population particles: `(A, B)` with `A_0 = 1`
/// on the particles of `atom`.
pub fn population_tangents(
    v: &ValueFunction,
    mu: &EmpiricalMeasure,
    atom: usize,
    initial_tangent: f64,
) -> Result<(TangentPath, TangentPath, Vec<f64>)> {
    let local = v
        .local(0.0, mu)?
        .ok_or_else(|| MflabError::Family("no local solve at t = T".into()))?;
    let p = v.problem();
    let grid = p.space_time(local.first, local.last)?;
    let opts = flow_options(p, local.first, v.seed());
    let start = Particles::for_flow(mu, &opts)?;
    let h = p.hamiltonian.as_ref();
    let field = &local.field;
    let drift = |k: usize, x: f64| h.dp(x, field.grad(k, x));
    let paths = simulate_paths(&start, &drift, &grid, &opts)?;
    let levels = grid.nt + 1;
    let copies = start.len() / mu.len();
    let mut a = vec![0.0; paths.len()];
    let mut b = vec![0.0; paths.len()];
    for pidx in 0..start.len() {
        let base = pidx * levels;
        let mut av = if pidx / copies == atom { initial_tangent } else { 0.0 };
        let mut bv = 0.0;
        a[base] = av;
        for k in 0..grid.nt {
            let x = paths[base + k];
            let z = field.grad(k, x);
            let gamma = h.dpp(x, z) * field.hess(k, x);
            let kappa = h.dxp(x, z) + gamma;
            let dt = grid.t(k + 1) - grid.t(k);
            av *= 1.0 + kappa * dt;
            bv = bv * (1.0 + kappa * dt) - gamma * dt;
            a[base + k + 1] = av;
            b[base + k + 1] = bv;
        }
    }
    Ok((TangentPath { levels, values: a }, TangentPath { levels, values: b }, start.weights))
}

/// Representation of `∂μ V(0, x, μ, x_atom)` compared with the
/// finite-difference oracle.
pub fn lions_derivative_rep(v: &ValueFunction, x: f64, mu: &EmpiricalMeasure, atom: usize) -> Result<DerivativeReport> {
    let fam = family(v)?;
    let local = v
        .local(0.0, mu)?
        .ok_or_else(|| MflabError::Family("no local solve at t = T".into()))?;
    if local.last != v.problem().steps() {
        return Err(MflabError::Family("the representation needs a single-interval solve on [0, T]".into()));
    }
    let w_atom = mu.weights()[atom];
    let (a, b, weights) = population_tangents(v, mu, atom, 1.0)?;
    let sum_wa: f64 = a.terminal().iter().zip(&weights).map(|(t, w)| t * w).sum();
    let value = match fam {
        Family::MeanLinear { c } => c * sum_wa / w_atom,
        Family::Translation => {
            let sum_wb: f64 = b.terminal().iter().zip(&weights).map(|(t, w)| t * w).sum();
            let m = sum_wa / (1.0 - sum_wb);
            let p = v.problem();
            let grid = p.space_time(local.first, local.last)?;
            let mut opts = flow_options(p, local.first, StreamKey::root(v.seed()).child(tags::CONTROLLED).value());
            opts.antithetic = true;
            let start = Particles::for_flow(&EmpiricalMeasure::dirac(x), &opts)?;
            let h = p.hamiltonian.as_ref();
            let field = &local.field;
            let drift = |k: usize, y: f64| h.dp(y, field.grad(k, y));
            let paths = simulate_paths(&start, &drift, &grid, &opts)?;
            let end = level_positions(&paths, grid.nt + 1, grid.nt);
            let g = p.coupling.terminal.bind(local.flow.terminal())?;
            let mean_dx: f64 = end.iter().zip(&start.weights).map(|(y, w)| w * g.dx(*y)).sum();
            -mean_dx * m / w_atom
        }
    };
    let oracle = lions_derivative_fd(v, 0.0, x, mu, atom, default_fd_step(mu))?;
    Ok(DerivativeReport::new(value, oracle, 1e-8, "tangent"))
}

/// One-sided slopes of `ε ↦ V(0, x, L_{ξ + εξ})`, each from a quadratic
/// fit over the grid points on its side of zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateauxProbe {
    pub eps: Vec<f64>,
    pub values: Vec<f64>,
    pub left: f64,
    pub right: f64,
}

pub fn gateaux_probe(v: &ValueFunction, x: f64, mu: &EmpiricalMeasure, eps: &[f64]) -> Result<GateauxProbe> {
    let mut values = Vec::with_capacity(eps.len());
    for &e in eps {
        let scaled = mu.push_forward(|p| p.iter().map(|c| (1.0 + e) * c).collect())?;
        values.push(v.eval(0.0, x, &scaled)?);
    }
    let side = |positive: bool| -> Result<f64> {
        let pts: Vec<(f64, f64)> = eps
            .iter()
            .zip(&values)
            .filter(|(e, _)| if positive { **e > 0.0 } else { **e < 0.0 })
            .map(|(e, v)| (*e, *v))
            .collect();
        quadratic_slope_at_zero(&pts)
    };
    Ok(GateauxProbe {
        eps: eps.to_vec(),
        left: side(false)?,
        right: side(true)?,
        values,
    })
}

/// Linear coefficient of the least-squares quadratic through `pts`.
pub fn quadratic_slope_at_zero(pts: &[(f64, f64)]) -> Result<f64> {
    if pts.len() < 3 {
        return Err(MflabError::Invalid("a one-sided quadratic fit needs three points".into()));
    }
    // normal equations for y = c0 + c1 e + c2 e²
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for &(e, y) in pts {
        let basis = [1.0, e, e * e];
        for i in 0..3 {
            r[i] += basis[i] * y;
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
        }
    }
    let c = solve3(m, r).ok_or_else(|| MflabError::Invalid("degenerate eps grid".into()))?;
    Ok(c[1])
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| m[i][k] * x[k]).sum();
        x[i] = (r[i] - s) / m[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_fit_recovers_slope() {
        let pts: Vec<(f64, f64)> = (1..=6).map(|k| {
            let e = 0.05 * k as f64;
            (e, 0.3 + 0.56 * e - 0.2 * e * e)
        }).collect();
        assert!((quadratic_slope_at_zero(&pts).unwrap() - 0.56).abs() < 1e-10);
    }
}
