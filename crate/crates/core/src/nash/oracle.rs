//! N-player Nash values `v^{N,i}(t, x⃗)` from closed forms, a Riccati
//! ansatz and a direct two-player grid solve.
//!
//! Every oracle is checked against the Nash system
//!
//! ```text
//! ∂t v^i + ½ Σ_j ∂jj v^i + H(x_i, ∂i v^i) + Σ_{j≠i} ∂pH(x_j, ∂j v^j) ∂j v^i = 0
//! ```
//!
//! by central differences at random points before it is handed out.

use serde::{Deserialize, Serialize};

use crate::error::{MflabError, Result};
use crate::hjb::{feynman_kac_mean, solve_backward, GridField, HamiltonianSpec, HjbOptions, Quadratic, ScalarFn, SpaceTimeGrid};
use crate::rng::{tags, StreamKey};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NashFamily {
    Separable,
    Lq,
    Grid2p,
}

impl NashFamily {
    pub fn name(self) -> &'static str {
        match self {
            NashFamily::Separable => "separable",
            NashFamily::Lq => "lq",
            NashFamily::Grid2p => "grid2p",
        }
    }
}

/// Largest Nash-system residual found at the probe points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualCertificate {
    pub max_residual: f64,
    pub tol: f64,
    pub points: usize,
}

impl ResidualCertificate {
    pub fn passes(&self) -> bool {
        self.max_residual <= self.tol
    }
}

/// Coefficients `(a, b, c, e, k)` of
/// `v^i = a x_i² + b x_i m + c m² + e q + k`, where `m` and `q` are the
/// mean and mean square of the other `M = N - 1` players.
#[derive(Clone, Debug)]
pub struct LqCoefficients {
    pub others: f64,
    pub horizon: f64,
    step: f64,
    /// `table[j]` holds the coefficients at `t = T - j·step`.
    table: Vec<[f64; 5]>,
}

pub const LQ_TERMINAL: [f64; 5] = [1.0, -2.0, 1.0, 0.0, 0.0];

/// `d/dτ (a, b, c, e, k)` in reversed time `τ = T - t`, with `M` others.
pub fn lq_rhs(y: &[f64; 5], m: f64) -> [f64; 5] {
    let [a, b, c, e, _] = *y;
    let alpha = 2.0 * a - b / m;
    [
        2.0 * a * a + b * b / m,
        4.0 * a * b + b * b + (2.0 * b * c - b * b + 2.0 * e * b) / m,
        0.5 * b * b + 2.0 * c * alpha + 2.0 * b * c + 2.0 * e * b,
        2.0 * e * alpha,
        a + c / m + e,
    ]
}

fn rk4(y: &[f64; 5], m: f64, h: f64) -> [f64; 5] {
    let add = |y: &[f64; 5], k: &[f64; 5], s: f64| -> [f64; 5] { std::array::from_fn(|i| y[i] + s * k[i]) };
    let k1 = lq_rhs(y, m);
    let k2 = lq_rhs(&add(y, &k1, h / 2.0), m);
    let k3 = lq_rhs(&add(y, &k2, h / 2.0), m);
    let k4 = lq_rhs(&add(y, &k3, h), m);
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

impl LqCoefficients {
    /// RK4 backward from `T` with `steps` steps.
    pub fn solve(players: usize, horizon: f64, steps: usize) -> Result<Self> {
        if players < 2 {
            return Err(MflabError::Invalid(format!("need at least two players, got {players}")));
        }
        if !(horizon > 0.0) || steps == 0 {
            return Err(MflabError::Invalid(format!("horizon {horizon} with {steps} steps")));
        }
        let m = (players - 1) as f64;
        let step = horizon / steps as f64;
        let mut table = Vec::with_capacity(steps + 1);
        let mut y = LQ_TERMINAL;
        table.push(y);
        for j in 0..steps {
            y = rk4(&y, m, step);
            if y.iter().any(|v| !v.is_finite() || v.abs() > 1e8) {
                return Err(MflabError::Blowup { step: steps - 1 - j });
            }
            table.push(y);
        }
        Ok(LqCoefficients {
            others: m,
            horizon,
            step,
            table,
        })
    }

    /// Coefficients at time `t`, one RK4 step from the nearest stored level above.
    pub fn at(&self, t: f64) -> [f64; 5] {
        let tau = (self.horizon - t).clamp(0.0, self.horizon);
        let j = ((tau / self.step).floor() as usize).min(self.table.len() - 1);
        let rest = tau - j as f64 * self.step;
        if rest <= 0.0 {
            self.table[j]
        } else {
            rk4(&self.table[j], self.others, rest)
        }
    }
}

/// Sizes of the direct two-player solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid2pOptions {
    /// The square `[-L, L]²`.
    pub half_width: f64,
    pub nx: usize,
    /// Time step as a fraction of `dx²`.
    pub dt_factor: f64,
}

impl Default for Grid2pOptions {
    fn default() -> Self {
        Grid2pOptions {
            half_width: 4.0,
            nx: 161,
            dt_factor: 0.25,
        }
    }
}

/// `v¹` on a square grid; `v²(x1, x2) = v¹(x2, x1)`.
#[derive(Clone, Debug)]
pub struct Grid2p {
    pub half_width: f64,
    pub nx: usize,
    pub dt: f64,
    /// Row-major `v¹` at each time level, level 0 at `t = 0`.
    pub levels: Vec<Vec<f64>>,
}

impl Grid2p {
    fn dx(&self) -> f64 {
        2.0 * self.half_width / (self.nx - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dx()
    }

    /// Tensor cubic Lagrange interpolation on the 4×4 stencil around `(x, y)`.
    fn interp(&self, level: usize, x: f64, y: f64) -> f64 {
        let n = self.nx;
        let h = self.dx();
        let stencil = |z: f64| -> (usize, [f64; 4]) {
            let s = ((z + self.half_width) / h).clamp(0.0, (n - 1) as f64);
            let start = (s.floor() as usize).saturating_sub(1).min(n - 4);
            let u = s - start as f64;
            let w = [
                -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0,
                u * (u - 2.0) * (u - 3.0) / 2.0,
                -u * (u - 1.0) * (u - 3.0) / 2.0,
                u * (u - 1.0) * (u - 2.0) / 6.0,
            ];
            (start, w)
        };
        let (i0, wx) = stencil(x);
        let (j0, wy) = stencil(y);
        let v = &self.levels[level];
        let mut acc = 0.0;
        for (a, wa) in wx.iter().enumerate() {
            let row = (i0 + a) * n + j0;
            acc += wa * (0..4).map(|b| wy[b] * v[row + b]).sum::<f64>();
        }
        acc
    }

    /// `v¹(t, x1, x2)`, linear between time levels.
    pub fn value(&self, t: f64, x1: f64, x2: f64) -> f64 {
        let nt = self.levels.len() - 1;
        let s = (t / self.dt).clamp(0.0, nt as f64);
        let k = (s.floor() as usize).min(nt - 1);
        let r = s - k as f64;
        (1.0 - r) * self.interp(k, x1, x2) + r * self.interp(k + 1, x1, x2)
    }
}

/// Explicit RK4 solve of the two-player Nash system on `[-L, L]²`.
///
/// Boundary nodes use one-sided second-order differences, which are exact
/// when the solution is a quadratic polynomial.
pub fn solve_grid2p(
    hamiltonian: &HamiltonianSpec,
    terminal: &dyn Fn(f64, f64) -> f64,
    horizon: f64,
    opts: &Grid2pOptions,
) -> Result<Grid2p> {
    let n = opts.nx;
    if n < 8 || !(opts.half_width > 0.0) || !(horizon > 0.0) || !(opts.dt_factor > 0.0) {
        return Err(MflabError::Invalid("grid2p needs nx ≥ 8 and positive sizes".into()));
    }
    let h = 2.0 * opts.half_width / (n - 1) as f64;
    let nt = (horizon / (opts.dt_factor * h * h)).ceil() as usize;
    let dt = horizon / nt as f64;
    let xs: Vec<f64> = (0..n).map(|i| -opts.half_width + i as f64 * h).collect();
    let ham = hamiltonian.as_ref();
    let mut v: Vec<f64> = (0..n * n).map(|p| terminal(xs[p / n], xs[p % n])).collect();
    // first and second differences along one axis, one-sided at the ends
    let d1 = |f: &dyn Fn(usize) -> f64, i: usize| -> f64 {
        if i == 0 {
            (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h)
        } else if i == n - 1 {
            (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) / (2.0 * h)
        } else {
            (f(i + 1) - f(i - 1)) / (2.0 * h)
        }
    };
    let d2 = |f: &dyn Fn(usize) -> f64, i: usize| -> f64 {
        if i == 0 {
            (2.0 * f(0) - 5.0 * f(1) + 4.0 * f(2) - f(3)) / (h * h)
        } else if i == n - 1 {
            (2.0 * f(n - 1) - 5.0 * f(n - 2) + 4.0 * f(n - 3) - f(n - 4)) / (h * h)
        } else {
            (f(i + 1) - 2.0 * f(i) + f(i - 1)) / (h * h)
        }
    };
    // dv/dτ for τ = T - t
    let rhs = |v: &[f64]| -> Vec<f64> {
        let mut g1 = vec![0.0; n * n];
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                g1[i * n + j] = d1(&|r| v[r * n + j], i);
            }
        }
        for i in 0..n {
            for j in 0..n {
                let p = i * n + j;
                let own = g1[p];
                let across = d1(&|c| v[i * n + c], j);
                // ∂2 v² at (x1, x2) is ∂1 v¹ at (x2, x1)
                let other = g1[j * n + i];
                let lap = d2(&|r| v[r * n + j], i) + d2(&|c| v[i * n + c], j);
                out[p] = 0.5 * lap + ham.h(xs[i], own) + ham.dp(xs[j], other) * across;
            }
        }
        out
    };
    let mut levels = vec![Vec::new(); nt + 1];
    levels[nt] = v.clone();
    for k in (0..nt).rev() {
        let stage = |base: &[f64], k: &[f64], s: f64| -> Vec<f64> { base.iter().zip(k).map(|(a, b)| a + s * b).collect() };
        let k1 = rhs(&v);
        let k2 = rhs(&stage(&v, &k1, dt / 2.0));
        let k3 = rhs(&stage(&v, &k2, dt / 2.0));
        let k4 = rhs(&stage(&v, &k3, dt));
        for p in 0..n * n {
            v[p] += dt / 6.0 * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p]);
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(MflabError::Blowup { step: k });
        }
        levels[k] = v.clone();
    }
    Ok(Grid2p {
        half_width: opts.half_width,
        nx: n,
        dt,
        levels,
    })
}

#[derive(Clone, Debug)]
enum Model {
    Separable { u: GridField, w: GridField, c0: f64 },
    Lq(LqCoefficients),
    Grid2p(Grid2p),
}

/// A residual-certified N-player Nash value.
#[derive(Clone, Debug)]
pub struct NashOracle {
    players: usize,
    horizon: f64,
    hamiltonian: HamiltonianSpec,
    model: Model,
    certificate: ResidualCertificate,
}

/// Probe points for the certificate.
pub const CERTIFICATE_POINTS: usize = 64;

impl NashOracle {
    pub fn players(&self) -> usize {
        self.players
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn hamiltonian(&self) -> &HamiltonianSpec {
        &self.hamiltonian
    }

    pub fn family(&self) -> NashFamily {
        match self.model {
            Model::Separable { .. } => NashFamily::Separable,
            Model::Lq(_) => NashFamily::Lq,
            Model::Grid2p(_) => NashFamily::Grid2p,
        }
    }

    pub fn certificate(&self) -> &ResidualCertificate {
        &self.certificate
    }

    pub fn lq_coefficients(&self) -> Option<&LqCoefficients> {
        match &self.model {
            Model::Lq(c) => Some(c),
            _ => None,
        }
    }

    /// `v^{N,i}(t, x⃗)`.
    pub fn value(&self, i: usize, t: f64, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.players);
        match &self.model {
            Model::Separable { u, w, c0 } => {
                let others: f64 = x
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, &y)| w.value_at(t, y))
                    .sum();
                u.value_at(t, x[i]) + c0 * others / (self.players - 1) as f64
            }
            Model::Lq(coef) => {
                let [a, b, c, e, k] = coef.at(t);
                let (m, q) = others_moments(i, x);
                a * x[i] * x[i] + b * x[i] * m + c * m * m + e * q + k
            }
            Model::Grid2p(g) => g.value(t, x[i], x[1 - i]),
        }
    }

    /// `∂_{x_i} v^{N,i}(t, x⃗)`.
    pub fn grad(&self, i: usize, t: f64, x: &[f64]) -> f64 {
        match &self.model {
            Model::Separable { u, .. } => u.grad_at(t, x[i]),
            Model::Lq(coef) => {
                let [a, b, ..] = coef.at(t);
                let (m, _) = others_moments(i, x);
                2.0 * a * x[i] + b * m
            }
            Model::Grid2p(g) => {
                let h = 2.0 * g.half_width / (g.nx - 1) as f64;
                (g.value(t, x[i] + h, x[1 - i]) - g.value(t, x[i] - h, x[1 - i])) / (2.0 * h)
            }
        }
    }

    /// Equilibrium drift `∂pH(x_i, ∂i v^i)` of player `i`.
    pub fn drift(&self, i: usize, t: f64, x: &[f64]) -> f64 {
        self.hamiltonian.dp(x[i], self.grad(i, t, x))
    }

    /// Drifts of all players at once, in `O(N)` for the closed forms.
    pub fn drifts(&self, t: f64, x: &[f64]) -> Vec<f64> {
        match &self.model {
            Model::Lq(coef) => {
                let [a, b, ..] = coef.at(t);
                let total: f64 = x.iter().sum();
                let m = (x.len() - 1) as f64;
                x.iter()
                    .map(|&xi| self.hamiltonian.dp(xi, 2.0 * a * xi + b * (total - xi) / m))
                    .collect()
            }
            Model::Separable { u, .. } => x.iter().map(|&xi| self.hamiltonian.dp(xi, u.grad_at(t, xi))).collect(),
            Model::Grid2p(_) => (0..x.len()).map(|i| self.drift(i, t, x)).collect(),
        }
    }

    /// `∂x u(t, x)` of the single-player part of a separable oracle.
    pub fn separable_grad(&self, t: f64, x: f64) -> Option<f64> {
        match &self.model {
            Model::Separable { u, .. } => Some(u.grad_at(t, x)),
            _ => None,
        }
    }

    /// Nash-system residual of player `i` at `(t, x⃗)` by central differences.
    pub fn residual(&self, i: usize, t: f64, x: &[f64], hx: f64, ht: f64) -> f64 {
        let v = |t: f64, y: &[f64]| self.value(i, t, y);
        let vt = (8.0 * (v(t + ht, x) - v(t - ht, x)) - (v(t + 2.0 * ht, x) - v(t - 2.0 * ht, x))) / (12.0 * ht);
        let v0 = v(t, x);
        let mut y = x.to_vec();
        let mut lap = 0.0;
        let mut own = 0.0;
        let mut cross = 0.0;
        for j in 0..x.len() {
            y[j] = x[j] + hx;
            let p = v(t, &y);
            y[j] = x[j] - hx;
            let q = v(t, &y);
            y[j] = x[j];
            lap += (p - 2.0 * v0 + q) / (hx * hx);
            let d = (p - q) / (2.0 * hx);
            if j == i {
                own = d;
            } else {
                cross += self.drift(j, t, x) * d;
            }
        }
        vt + 0.5 * lap + self.hamiltonian.h(x[i], own) + cross
    }

    fn certify(mut self, hx: f64, ht: f64, tol: f64) -> Result<Self> {
        let mut s = StreamKey::root(0).child(tags::PLAYERS).child(self.players as u64).stream();
        let mut worst: f64 = 0.0;
        for _ in 0..CERTIFICATE_POINTS {
            let t = 2.0 * ht + (self.horizon - 4.0 * ht) * s.uniform();
            let x: Vec<f64> = (0..self.players).map(|_| 4.0 * s.uniform() - 2.0).collect();
            let i = ((s.uniform() * self.players as f64) as usize).min(self.players - 1);
            worst = worst.max(self.residual(i, t, &x, hx, ht).abs());
        }
        self.certificate = ResidualCertificate {
            max_residual: worst,
            tol,
            points: CERTIFICATE_POINTS,
        };
        if !(worst <= tol) {
            return Err(MflabError::Ansatz { residual: worst, tol });
        }
        Ok(self)
    }
}

/// Mean and mean square of all coordinates but `i`.
pub fn others_moments(i: usize, x: &[f64]) -> (f64, f64) {
    let m = (x.len() - 1) as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for (j, &y) in x.iter().enumerate() {
        if j != i {
            s1 += y;
            s2 += y * y;
        }
    }
    (s1 / m, s2 / m)
}

fn pending(players: usize, horizon: f64, hamiltonian: HamiltonianSpec, model: Model) -> NashOracle {
    NashOracle {
        players,
        horizon,
        hamiltonian,
        model,
        certificate: ResidualCertificate {
            max_residual: f64::NAN,
            tol: 0.0,
            points: 0,
        },
    }
}

/// Terminal data `g(x_i) + c0·mean_{j≠i} x_j`: every player's drift depends
/// on its own state only, so `v^i = u(t, x_i) + c0/(N-1) Σ_{j≠i} w(t, x_j)`
/// with `u` the HJB solution for `g` and `w = E[X_T | X_t = x]`.
///
/// The certificate tolerance is ten times `dt + dx`, the order of the
/// first-order scheme.
pub fn nash_separable(
    players: usize,
    g: &ScalarFn,
    c0: f64,
    hamiltonian: HamiltonianSpec,
    grid: &SpaceTimeGrid,
    hjb: &HjbOptions,
) -> Result<NashOracle> {
    if players < 2 {
        return Err(MflabError::Invalid(format!("need at least two players, got {players}")));
    }
    if grid.t0 != 0.0 {
        return Err(MflabError::Invalid("the separable oracle starts at t = 0".into()));
    }
    let u = solve_backward(grid, hamiltonian.as_ref(), &|_, _| 0.0, &|x| g.value(x), hjb)?;
    let ham = hamiltonian.clone();
    let w = feynman_kac_mean(grid, &|k, x| ham.dp(x, u.grad(k, x)), hjb)?;
    let (hx, ht) = (grid.dx(), grid.dt());
    let horizon = grid.t1;
    pending(players, horizon, hamiltonian, Model::Separable { u, w, c0 }).certify(hx, ht, 10.0 * (ht + hx))
}

/// Tolerance of the LQ certificate: the ansatz is exact, so only RK4 and
/// rounding in the difference quotients remain.
pub const LQ_TOL: f64 = 1e-6;

/// `G(x, μ) = (x - m_μ)²`, `H = z²/2`, `F = 0`, by the quadratic ansatz.
pub fn nash_lq(players: usize, horizon: f64) -> Result<NashOracle> {
    let steps = ((horizon / 1e-3).ceil() as usize).max(16);
    let coarse = LqCoefficients::solve(players, horizon, steps)?;
    // the time scale shrinks like 1/a towards blowup: refine the table and
    // the certificate's time step with it
    let a0 = coarse.at(0.0)[0].max(1.0);
    let coef = LqCoefficients::solve(players, horizon, steps * (a0 * a0).ceil() as usize)?;
    pending(players, horizon, std::sync::Arc::new(Quadratic), Model::Lq(coef)).certify(1e-3, 1e-4 / a0, LQ_TOL)
}

/// Two-player Nash system for `G(x, μ) = (x - m_μ)²` and `H = z²/2`,
/// solved directly on a grid.
pub fn nash_grid2p(horizon: f64, opts: &Grid2pOptions) -> Result<NashOracle> {
    let h: HamiltonianSpec = std::sync::Arc::new(Quadratic);
    let g = solve_grid2p(&h, &|x, y| (x - y) * (x - y), horizon, opts)?;
    let dx = 2.0 * g.half_width / (g.nx - 1) as f64;
    let dt = g.dt;
    pending(2, horizon, h, Model::Grid2p(g)).certify(dx, dt, 10.0 * (dt + dx * dx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lq_terminal_and_limit() {
        let c = LqCoefficients::solve(5, 0.2, 200).unwrap();
        assert_eq!(c.at(0.2), LQ_TERMINAL);
        // e stays zero and M → ∞ reduces to a(x - m)² with a = 1/(1 - 2τ)
        let big = LqCoefficients::solve(1_000_000_000, 0.2, 200).unwrap();
        let [a, b, cc, e, _] = big.at(0.0);
        let exact = 1.0 / (1.0 - 0.4);
        assert!((a - exact).abs() < 1e-6 && (b + 2.0 * exact).abs() < 1e-6 && (cc - exact).abs() < 1e-6);
        assert_eq!(e, 0.0);
    }

    #[test]
    fn lq_certificate() {
        let o = nash_lq(6, 0.2).unwrap();
        assert!(o.certificate().passes(), "{:?}", o.certificate());
        assert_eq!(o.certificate().points, CERTIFICATE_POINTS);
    }

    #[test]
    fn lq_blowup_past_half() {
        assert_eq!(nash_lq(4, 0.6).unwrap_err().kind(), "blowup");
    }

    #[test]
    fn separable_zero_g() {
        let grid = SpaceTimeGrid::standard(0.0, 0.5, 0.01).unwrap();
        let o = nash_separable(4, &ScalarFn::Zero, 1.5, std::sync::Arc::new(Quadratic), &grid, &HjbOptions::default()).unwrap();
        let x = [0.3, -1.0, 0.4, 2.0];
        let v = o.value(0, 0.0, &x);
        assert!((v - 1.5 * (1.4 / 3.0)).abs() < 1e-9, "{v}");
        let two = nash_separable(2, &ScalarFn::Zero, 0.7, std::sync::Arc::new(Quadratic), &grid, &HjbOptions::default()).unwrap();
        assert!((two.value(0, 0.0, &[0.0, 1.0]) - 0.7).abs() < 1e-9);
    }
}
