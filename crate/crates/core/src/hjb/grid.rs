//! Uniform space-time grids and the fields solved on them.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{MflabError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub t0: f64,
    pub t1: f64,
    /// Number of time steps; there are `nt + 1` time levels.
    pub nt: usize,
}

impl SpaceTimeGrid {
    pub fn new(x_min: f64, x_max: f64, nx: usize, t0: f64, t1: f64, nt: usize) -> Result<Self> {
        let g = SpaceTimeGrid {
            x_min,
            x_max,
            nx,
            t0,
            t1,
            nt,
        };
        g.validate()?;
        Ok(g)
    }

    /// `nx = 801` on `[-8, 8]`, time step close to `dt`.
    pub fn standard(t0: f64, t1: f64, dt: f64) -> Result<Self> {
        let nt = (((t1 - t0) / dt).round() as usize).max(1);
        Self::new(-8.0, 8.0, 801, t0, t1, nt)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min < self.x_max) || !self.x_min.is_finite() || !self.x_max.is_finite() {
            return Err(MflabError::Invalid("grid needs x_min < x_max".into()));
        }
        if self.nx < 5 {
            return Err(MflabError::Invalid("grid needs nx >= 5".into()));
        }
        if !(self.t0 < self.t1) {
            return Err(MflabError::Invalid("grid needs t0 < t1".into()));
        }
        if self.nt == 0 {
            return Err(MflabError::Invalid("grid needs nt >= 1".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.nt as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn t(&self, k: usize) -> f64 {
        if k == self.nt {
            self.t1
        } else {
            self.t0 + k as f64 * self.dt()
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    /// Time level nearest to `t`.
    pub fn step_of(&self, t: f64) -> usize {
        (((t - self.t0) / self.dt()).round().max(0.0) as usize).min(self.nt)
    }

    /// Same space grid on `[t0, t1]` with `nt` steps.
    pub fn with_time(&self, t0: f64, t1: f64, nt: usize) -> Result<Self> {
        Self::new(self.x_min, self.x_max, self.nx, t0, t1, nt)
    }

    /// The parabolic CFL limit `dx²/(1 + dx·slope)` of a fully explicit step.
    pub fn explicit_cfl_limit(&self, max_slope: f64) -> f64 {
        let dx = self.dx();
        dx * dx / (1.0 + dx * max_slope)
    }
}

/// Solution of a backward equation on a [`SpaceTimeGrid`].
#[derive(Clone, Debug)]
pub struct GridField {
    pub grid: SpaceTimeGrid,
    /// `u[k][i]` at time level `k`, node `i`.
    pub u: Vec<Vec<f64>>,
    pub du: Vec<Vec<f64>>,
    pub ddu: Vec<Vec<f64>>,
    /// Largest `|∂x u|` over the field.
    pub max_grad: f64,
    /// Largest hyperbolic Courant number `θ·dt/dx` used by any substep.
    pub max_courant: f64,
    /// Total number of substeps taken.
    pub substeps: usize,
}

impl GridField {
    pub(crate) fn from_values(grid: SpaceTimeGrid, u: Vec<Vec<f64>>) -> Self {
        let (du, ddu): (Vec<_>, Vec<_>) = u.iter().map(|row| derivatives(row, grid.dx())).unzip();
        let max_grad = du.iter().flatten().fold(0.0f64, |m, v: &f64| m.max(v.abs()));
        GridField {
            grid,
            u,
            du,
            ddu,
            max_grad,
            max_courant: 0.0,
            substeps: 0,
        }
    }

    /// Cell index and local coordinate for `x`, clamped to the grid.
    fn locate(&self, x: f64) -> (usize, f64) {
        let g = &self.grid;
        let s = ((x - g.x_min) / g.dx()).clamp(0.0, (g.nx - 1) as f64);
        let i = (s.floor() as usize).min(g.nx - 2);
        (i, s - i as f64)
    }

    /// `u(t_k, x)` by cubic Hermite interpolation; linear beyond the ends.
    pub fn value(&self, k: usize, x: f64) -> f64 {
        let g = &self.grid;
        let (u, du) = (&self.u[k], &self.du[k]);
        if x <= g.x_min {
            return u[0] + du[0] * (x - g.x_min);
        }
        if x >= g.x_max {
            return u[g.nx - 1] + du[g.nx - 1] * (x - g.x_max);
        }
        let (i, s) = self.locate(x);
        let h = g.dx();
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * u[i]
            + (s3 - 2.0 * s2 + s) * h * du[i]
            + (-2.0 * s3 + 3.0 * s2) * u[i + 1]
            + (s3 - s2) * h * du[i + 1]
    }

    /// `∂x u(t_k, x)` by linear interpolation; constant beyond the ends.
    pub fn grad(&self, k: usize, x: f64) -> f64 {
        let (i, s) = self.locate(x);
        let d = &self.du[k];
        d[i] + s * (d[i + 1] - d[i])
    }

    /// `∂xx u(t_k, x)` by linear interpolation.
    pub fn hess(&self, k: usize, x: f64) -> f64 {
        let (i, s) = self.locate(x);
        let d = &self.ddu[k];
        d[i] + s * (d[i + 1] - d[i])
    }

    /// `u(t, x)` with linear interpolation between time levels.
    pub fn value_at(&self, t: f64, x: f64) -> f64 {
        let g = &self.grid;
        let s = ((t - g.t0) / g.dt()).clamp(0.0, g.nt as f64);
        let k = (s.floor() as usize).min(g.nt - 1);
        let r = s - k as f64;
        (1.0 - r) * self.value(k, x) + r * self.value(k + 1, x)
    }

    /// `∂x u(t, x)` with linear interpolation between time levels.
    pub fn grad_at(&self, t: f64, x: f64) -> f64 {
        let g = &self.grid;
        let s = ((t - g.t0) / g.dt()).clamp(0.0, g.nt as f64);
        let k = (s.floor() as usize).min(g.nt - 1);
        let r = s - k as f64;
        (1.0 - r) * self.grad(k, x) + r * self.grad(k + 1, x)
    }

    /// Write `t,x,u,du` rows, keeping every `stride_t`-th level and
    /// `stride_x`-th node.
    pub fn write_csv<W: Write>(&self, w: W, stride_t: usize, stride_x: usize) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        wr.write_record(["t", "x", "u", "du"])?;
        let g = &self.grid;
        let st = stride_t.max(1);
        let sx = stride_x.max(1);
        let mut levels: Vec<usize> = (0..=g.nt).step_by(st).collect();
        if levels.last() != Some(&g.nt) {
            levels.push(g.nt);
        }
        for k in levels {
            for i in (0..g.nx).step_by(sx) {
                wr.write_record([
                    format!("{:?}", g.t(k)),
                    format!("{:?}", g.x(i)),
                    format!("{:?}", self.u[k][i]),
                    format!("{:?}", self.du[k][i]),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Largest Lipschitz constant of `∂x u` in x over all levels.
    pub fn grad_lipschitz(&self) -> f64 {
        let dx = self.grid.dx();
        self.du
            .iter()
            .flat_map(|row| row.windows(2).map(move |w| ((w[1] - w[0]) / dx).abs()))
            .fold(0.0, f64::max)
    }
}

/// Central differences inside, one-sided at the ends; second difference
/// vanishes at the ends (linear extrapolation).
pub(crate) fn derivatives(u: &[f64], dx: f64) -> (Vec<f64>, Vec<f64>) {
    let n = u.len();
    let mut du = vec![0.0; n];
    let mut ddu = vec![0.0; n];
    for i in 1..n - 1 {
        du[i] = (u[i + 1] - u[i - 1]) / (2.0 * dx);
        ddu[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx);
    }
    du[0] = (u[1] - u[0]) / dx;
    du[n - 1] = (u[n - 1] - u[n - 2]) / dx;
    (du, ddu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_cubics_inside() {
        let g = SpaceTimeGrid::new(-2.0, 2.0, 81, 0.0, 1.0, 1).unwrap();
        let f = |x: f64| 0.5 * x * x - x + 1.0;
        let row: Vec<f64> = g.xs().iter().map(|&x| f(x)).collect();
        let field = GridField::from_values(g, vec![row.clone(), row]);
        for x in [-1.234, 0.0, 0.777, 1.9] {
            assert!((field.value(0, x) - f(x)).abs() < 1e-12);
            assert!((field.grad(1, x) - (x - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = SpaceTimeGrid::new(0.0, 1.0, 5, 0.0, 1.0, 2).unwrap();
        let field = GridField::from_values(g, vec![vec![0.0; 5]; 3]);
        let mut buf = Vec::new();
        field.write_csv(&mut buf, 1, 1).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,x,u,du\n"));
        assert_eq!(s.lines().count(), 1 + 15);
    }
}
