//! Backward solvers: the HJB equation `∂t u + ½∂xx u + H(x, ∂x u) + F = 0`
//! for a frozen flow, and the linear Feynman–Kac transport equation.
//!
//! Each step is explicit local Lax–Friedrichs in the Hamiltonian followed by
//! an implicit diffusion solve, so only the hyperbolic Courant number
//! limits the step.  The Lax–Friedrichs viscosity only covers the part of
//! the cell Péclet number `θ·dx` above one.  Steps whose Courant number would exceed the safety factor are
//! split into substeps.

use serde::{Deserialize, Serialize};

use super::grid::{GridField, SpaceTimeGrid};
use super::hamiltonian::Hamiltonian;
use crate::error::{MflabError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HjbOptions {
    /// Target hyperbolic Courant number per substep.
    #[serde(default = "default_safety")]
    pub cfl_safety: f64,
    /// More substeps than this per time step is a CFL failure.
    #[serde(default = "default_substeps")]
    pub max_substeps: usize,
    /// A-posteriori bound on `|∂x u|`; exceeded means a range error.
    #[serde(default)]
    pub grad_radius: Option<f64>,
}

fn default_safety() -> f64 {
    0.8
}
fn default_substeps() -> usize {
    64
}

impl Default for HjbOptions {
    fn default() -> Self {
        HjbOptions {
            cfl_safety: default_safety(),
            max_substeps: default_substeps(),
            grad_radius: None,
        }
    }
}

/// Solve `(I - c·D2) v = rhs` where rows 1 and n-2 are identities
/// (linear extrapolation at both ends), then extrapolate the end nodes.
fn implicit_diffusion(rhs: &[f64], c: f64, out: &mut [f64], scratch: &mut Vec<f64>) {
    let n = rhs.len();
    out[1] = rhs[1];
    out[n - 2] = rhs[n - 2];
    let m = n - 4; // unknowns 2..=n-3
    if m > 0 {
        // Thomas with constant coefficients a = -c, b = 1 + 2c
        scratch.clear();
        scratch.resize(m, 0.0);
        let b = 1.0 + 2.0 * c;
        let mut d: Vec<f64> = rhs[2..n - 2].to_vec();
        d[0] += c * out[1];
        d[m - 1] += c * out[n - 2];
        let mut denom = b;
        scratch[0] = -c / denom;
        d[0] /= denom;
        for j in 1..m {
            denom = b + c * scratch[j - 1];
            scratch[j] = -c / denom;
            d[j] = (d[j] + c * d[j - 1]) / denom;
        }
        for j in (0..m - 1).rev() {
            d[j] -= scratch[j] * d[j + 1];
        }
        out[2..n - 2].copy_from_slice(&d);
    }
    out[0] = 2.0 * out[1] - out[2];
    out[n - 1] = 2.0 * out[n - 2] - out[n - 3];
}

/// Backward HJB solve against a frozen flow.
///
/// `source(k, x)` is `F` at time level `k`, `terminal(x)` is `u(t1, x)`.
pub fn solve_backward(
    grid: &SpaceTimeGrid,
    h: &dyn Hamiltonian,
    source: &(dyn Fn(usize, f64) -> f64 + Sync),
    terminal: &(dyn Fn(f64) -> f64 + Sync),
    opts: &HjbOptions,
) -> Result<GridField> {
    let values: Vec<f64> = grid.xs().iter().map(|&x| terminal(x)).collect();
    solve_backward_values(grid, h, source, values, opts)
}

/// As [`solve_backward`] with the terminal condition given at the nodes.
pub fn solve_backward_values(
    grid: &SpaceTimeGrid,
    h: &dyn Hamiltonian,
    source: &(dyn Fn(usize, f64) -> f64 + Sync),
    terminal: Vec<f64>,
    opts: &HjbOptions,
) -> Result<GridField> {
    grid.validate()?;
    let nx = grid.nx;
    if terminal.len() != nx {
        return Err(MflabError::Dim(format!("terminal has {} values for {nx} nodes", terminal.len())));
    }
    let dx = grid.dx();
    let xs = grid.xs();
    let mut levels = vec![Vec::new(); grid.nt + 1];
    let mut cur = terminal.clone();
    if cur.iter().any(|v| !v.is_finite()) {
        return Err(MflabError::Blowup { step: grid.nt });
    }
    let mut rhs = vec![0.0; nx];
    let mut next = vec![0.0; nx];
    let mut scratch = Vec::new();
    let mut ham = vec![0.0; nx];
    let mut max_courant: f64 = 0.0;
    let mut substeps = 0;
    for k in (0..grid.nt).rev() {
        let f: Vec<f64> = xs.iter().map(|&x| source(k + 1, x)).collect();
        let mut remaining = grid.t(k + 1) - grid.t(k);
        let mut count = 0;
        while remaining > 1e-15 * grid.dt() {
            let mut theta_max: f64 = 0.0;
            for i in 1..nx - 1 {
                let pm = (cur[i] - cur[i - 1]) / dx;
                let pp = (cur[i + 1] - cur[i]) / dx;
                let th = h.dp(xs[i], pm).abs().max(h.dp(xs[i], pp).abs());
                // the physical ½∂xx already keeps the scheme monotone while θ·dx ≤ 1
                let visc = (th - 1.0 / dx).max(0.0);
                ham[i] = h.h(xs[i], 0.5 * (pm + pp)) + 0.5 * visc * (pp - pm);
                theta_max = theta_max.max(th);
            }
            let limit = if theta_max > 0.0 {
                opts.cfl_safety * dx / theta_max
            } else {
                f64::INFINITY
            };
            // split the remaining interval evenly instead of leaving a sliver
            let pieces = (remaining / limit).ceil().max(1.0);
            let dts = remaining / pieces;
            count += 1;
            if count > opts.max_substeps {
                return Err(MflabError::Cfl(format!(
                    "step {k}: more than {} substeps needed (theta = {theta_max:.3e}, dx = {dx:.3e})",
                    opts.max_substeps
                )));
            }
            max_courant = max_courant.max(theta_max * dts / dx);
            for i in 1..nx - 1 {
                rhs[i] = cur[i] + dts * (ham[i] + f[i]);
            }
            implicit_diffusion(&rhs, 0.5 * dts / (dx * dx), &mut next, &mut scratch);
            std::mem::swap(&mut cur, &mut next);
            remaining -= dts;
            if cur.iter().any(|v| !v.is_finite()) {
                return Err(MflabError::Blowup { step: k });
            }
        }
        substeps += count;
        levels[k] = cur.clone();
    }
    levels[grid.nt] = terminal;
    let mut field = GridField::from_values(grid.clone(), levels);
    field.max_courant = max_courant;
    field.substeps = substeps;
    if let Some(r) = opts.grad_radius {
        if field.max_grad > r {
            return Err(MflabError::Range(format!(
                "measured |du| = {:.4} exceeds the configured gradient radius {r}",
                field.max_grad
            )));
        }
    }
    Ok(field)
}

/// `w(t, x) = E[X_T | X_t = x]` for `dX = b dt + dB`: solves
/// `∂t w + b ∂x w + ½∂xx w = 0`, `w(T, x) = x`, with the same viscosity rule as the HJB solve.
///
/// `drift(k, x)` is `b` at time level `k`.
pub fn feynman_kac_mean(grid: &SpaceTimeGrid, drift: &(dyn Fn(usize, f64) -> f64 + Sync), opts: &HjbOptions) -> Result<GridField> {
    grid.validate()?;
    let nx = grid.nx;
    let dx = grid.dx();
    let xs = grid.xs();
    let mut levels = vec![Vec::new(); grid.nt + 1];
    let mut cur = xs.clone();
    let mut rhs = vec![0.0; nx];
    let mut next = vec![0.0; nx];
    let mut scratch = Vec::new();
    let mut max_courant: f64 = 0.0;
    let mut substeps = 0;
    levels[grid.nt] = cur.clone();
    for k in (0..grid.nt).rev() {
        let b: Vec<f64> = xs.iter().map(|&x| drift(k + 1, x)).collect();
        let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let dt = grid.t(k + 1) - grid.t(k);
        let pieces = if bmax > 0.0 {
            (dt * bmax / (opts.cfl_safety * dx)).ceil().max(1.0) as usize
        } else {
            1
        };
        if pieces > opts.max_substeps {
            return Err(MflabError::Cfl(format!(
                "step {k}: drift {bmax:.3e} needs {pieces} substeps"
            )));
        }
        let dts = dt / pieces as f64;
        max_courant = max_courant.max(bmax * dts / dx);
        for _ in 0..pieces {
            for i in 1..nx - 1 {
                let central = (cur[i + 1] - cur[i - 1]) / (2.0 * dx);
                let visc = (b[i].abs() - 1.0 / dx).max(0.0);
                rhs[i] = cur[i] + dts * (b[i] * central + 0.5 * visc * (cur[i + 1] - 2.0 * cur[i] + cur[i - 1]) / dx);
            }
            implicit_diffusion(&rhs, 0.5 * dts / (dx * dx), &mut next, &mut scratch);
            std::mem::swap(&mut cur, &mut next);
        }
        substeps += pieces;
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(MflabError::Blowup { step: k });
        }
        levels[k] = cur.clone();
    }
    let mut field = GridField::from_values(grid.clone(), levels);
    field.max_courant = max_courant;
    field.substeps = substeps;
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hjb::hamiltonian::Quadratic;
    use crate::quadrature::normal_expectation;

    fn grid(t: f64) -> SpaceTimeGrid {
        SpaceTimeGrid::standard(0.0, t, 0.005).unwrap()
    }

    #[test]
    fn constants_are_preserved() {
        let f = solve_backward(&grid(1.0), &Quadratic, &|_, _| 0.0, &|_| 2.5, &HjbOptions::default()).unwrap();
        for row in &f.u {
            assert!(row.iter().all(|v| (v - 2.5).abs() < 1e-12));
        }
        assert!(f.max_grad < 1e-9);
    }

    #[test]
    fn cole_hopf_reference() {
        // u = ln E[exp g(x + B_T)] solves the quadratic HJB
        let g = |x: f64| 1.0 / (1.0 + x.exp());
        let f = solve_backward(&grid(1.0), &Quadratic, &|_, _| 0.0, &g, &HjbOptions::default()).unwrap();
        for x in [-1.0, 0.0, 0.5] {
            let reference = normal_expectation(80, |z| g(x + z).exp()).ln();
            assert!((f.value(0, x) - reference).abs() < 1e-3, "{x}: {} vs {reference}", f.value(0, x));
        }
    }

    #[test]
    fn comparison_for_fixed_flow() {
        let ga = |x: f64| (x * 0.7).sin();
        let gb = |x: f64| (x * 0.7).sin() + 0.1 * (-x * x).exp();
        let a = solve_backward(&grid(0.5), &Quadratic, &|_, _| 0.0, &ga, &HjbOptions::default()).unwrap();
        let b = solve_backward(&grid(0.5), &Quadratic, &|_, _| 0.0, &gb, &HjbOptions::default()).unwrap();
        for (ra, rb) in a.u.iter().zip(&b.u) {
            assert!(ra.iter().zip(rb).all(|(x, y)| x <= &(y + 1e-14)));
        }
    }

    #[test]
    fn feynman_kac_linear_cases() {
        let g = grid(1.0);
        let w0 = feynman_kac_mean(&g, &|_, _| 0.0, &HjbOptions::default()).unwrap();
        let w1 = feynman_kac_mean(&g, &|_, _| 1.0, &HjbOptions::default()).unwrap();
        for x in [-3.0, 0.0, 2.2] {
            assert!((w0.value(0, x) - x).abs() < 1e-10);
            assert!((w1.value(0, x) - (x + 1.0)).abs() < 1e-10);
            assert!((w1.value(100, x) - (x + 0.5)).abs() < 1e-10);
        }
    }

    #[test]
    fn steep_drift_fails_with_cfl() {
        let opts = HjbOptions {
            max_substeps: 2,
            ..Default::default()
        };
        let e = feynman_kac_mean(&grid(1.0), &|_, _| 1e4, &opts).unwrap_err();
        assert_eq!(e.kind(), "cfl");
    }
}
