//! Smooth mollifier on Wasserstein space.
//!
//! A measure μ is first pushed onto the lattice `Z^d ∩ Q_{2n²}` (scaled by
//! `1/n`) with the bump partition of unity `φ_i` and the truncation `h`,
//! giving weights `ψ_i(μ)`.  The weights are then lifted off the boundary of
//! the simplex by a uniform floor `1/N²` and a random perturbation
//! `y ∈ Δ_n`, and the functional is averaged over `y`:
//!
//! ```text
//! μ_n(y) = N/(N+1) Σ_i [ψ_i(μ) + 1/N² + y_i] δ_{i/n},   U_n(μ) = ∫ ζ_n(y) U(μ_n(y)) dy
//! ```
//!
//! In d = 1 with `n ≤ dense_limit` the full lattice vector is materialized.
//! Otherwise only the support of `ψ` is kept (renormalized), except for
//! linear functionals where the floor is summed in closed form.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MflabError, Result};
use crate::measures::{w1_distance, w2_distance, EmpiricalMeasure, Functional};
use crate::quadrature::{
    bump, gauss_legendre, gentle_step, gentle_step_deriv, plateau, plateau_integral, smoothstep,
    smoothstep_integral,
};
use crate::rng::{tags, StreamKey};

/// Configuration of the mollifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifierParams {
    pub n: usize,
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    #[serde(default = "default_exponent")]
    pub simplex_exponent: u32,
    #[serde(default)]
    pub seed: u64,
    /// Largest `n` for which the full d=1 lattice vector is materialized.
    #[serde(default = "default_dense_limit")]
    pub dense_limit: usize,
}

fn default_mc() -> usize {
    256
}
fn default_exponent() -> u32 {
    3
}
fn default_dense_limit() -> usize {
    16
}

impl MollifierParams {
    pub fn new(n: usize, mc_samples: usize, simplex_exponent: u32, seed: u64) -> Result<Self> {
        let p = MollifierParams {
            n,
            mc_samples,
            simplex_exponent,
            seed,
            dense_limit: default_dense_limit(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(MflabError::Invalid(format!("mollifier needs n >= 3, got {}", self.n)));
        }
        if self.mc_samples == 0 {
            return Err(MflabError::Invalid("mc_samples must be positive".into()));
        }
        if !(3..=4).contains(&self.simplex_exponent) {
            return Err(MflabError::Invalid("simplex_exponent must be 3 or 4".into()));
        }
        Ok(())
    }

    /// Lattice size `N_n = (4n²+1)^d` (as a float; it overflows integers fast).
    pub fn lattice_size(&self, dim: usize) -> f64 {
        ((4 * self.n * self.n + 1) as f64).powi(dim as i32)
    }

    /// Support radius `N_n^{-e}` of each simplex coordinate.
    pub fn simplex_radius(&self, dim: usize) -> f64 {
        self.lattice_size(dim).powi(-(self.simplex_exponent as i32))
    }

    fn dense(&self, dim: usize) -> bool {
        dim == 1 && self.n <= self.dense_limit
    }
}

/// Shape constants of the clamp function for a given `n`.
struct Clamp {
    a: f64,
    delta: f64,
    b: f64,
    len: f64,
    lift: f64,
}

impl Clamp {
    fn new(n: usize) -> Self {
        let nf = n as f64;
        let a = nf.powi(-3);
        let delta = a;
        let b = 1.0 / nf;
        let len = b - a - delta;
        // overshoot so that ∫_0^b r = b
        let lift = (a + 0.5 * delta) / (0.75 * len);
        Clamp { a, delta, b, len, lift }
    }

    /// `r = -I'` on `[0, 1/2]`.
    fn rate(&self, t: f64) -> f64 {
        if t <= self.a {
            0.0
        } else if t < self.a + self.delta {
            smoothstep((t - self.a) / self.delta)
        } else if t < self.b {
            1.0 + self.lift * plateau((t - self.a - self.delta) / self.len)
        } else {
            1.0
        }
    }

    /// `R(x) = ∫_0^x r` on `[0, 1/2]`.
    fn ramp(&self, x: f64) -> f64 {
        if x <= self.a {
            0.0
        } else if x <= self.a + self.delta {
            self.delta * smoothstep_integral((x - self.a) / self.delta)
        } else if x < self.b {
            let s = x - self.a - self.delta;
            0.5 * self.delta + s + self.lift * self.len * plateau_integral(s / self.len)
        } else {
            x
        }
    }
}

fn clamp_unchecked(x: f64, n: usize) -> f64 {
    let c = Clamp::new(n);
    if x <= 0.5 {
        1.0 - c.ramp(x)
    } else {
        c.ramp(1.0 - x)
    }
}

fn clamp_deriv_unchecked(x: f64, n: usize) -> f64 {
    let c = Clamp::new(n);
    if x <= 0.5 {
        -c.rate(x)
    } else {
        -c.rate(1.0 - x)
    }
}

/// The clamp `I_n` on `[0, 1]`: 1 near 0, `1 - x` on `[1/n, 1-1/n]`, 0 near 1.
pub fn clamp_i(x: f64, n: usize) -> Result<f64> {
    check_clamp_arg(x, n)?;
    Ok(clamp_unchecked(x, n))
}

/// Derivative `I_n'(x)`.
pub fn clamp_i_deriv(x: f64, n: usize) -> Result<f64> {
    check_clamp_arg(x, n)?;
    Ok(clamp_deriv_unchecked(x, n))
}

fn check_clamp_arg(x: f64, n: usize) -> Result<()> {
    if n < 3 {
        return Err(MflabError::Invalid(format!("n >= 3 required, got {n}")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(MflabError::Range(format!("clamp argument {x} outside [0, 1]")));
    }
    Ok(())
}

fn phi_1d(i: i64, x: f64, n: usize) -> f64 {
    let s = (n as f64 * x - i as f64).abs();
    if s >= 1.0 {
        0.0
    } else {
        clamp_unchecked(s, n)
    }
}

fn phi_1d_deriv(i: i64, x: f64, n: usize) -> f64 {
    let u = n as f64 * x - i as f64;
    if u.abs() >= 1.0 {
        0.0
    } else {
        n as f64 * u.signum() * clamp_deriv_unchecked(u.abs(), n)
    }
}

/// Lattice bump `φ_i(x) = Π_k I(|n x_k - i_k|)`.
pub fn bump_phi(i: &[i64], x: &[f64], n: usize) -> Result<f64> {
    if i.len() != x.len() {
        return Err(MflabError::Dim("index and point dimensions differ".into()));
    }
    if n < 3 {
        return Err(MflabError::Invalid(format!("n >= 3 required, got {n}")));
    }
    Ok(i.iter().zip(x).map(|(&ik, &xk)| phi_1d(ik, xk, n)).product())
}

fn trunc_1d(x: f64, n: usize) -> f64 {
    let nf = n as f64;
    1.0 - gentle_step((x.abs() - nf) / (0.5 * nf))
}

fn trunc_1d_deriv(x: f64, n: usize) -> f64 {
    let nf = n as f64;
    -x.signum() * gentle_step_deriv((x.abs() - nf) / (0.5 * nf)) / (0.5 * nf)
}

/// Truncation `h`: 1 on `Q_n`, 0 off `Q_{3n/2}`.
pub fn truncation(x: &[f64], n: usize) -> f64 {
    x.iter().map(|&c| trunc_1d(c, n)).product()
}

/// Sparse lattice weights `ψ_i(μ)`, sorted by index.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeWeights {
    pub n: usize,
    pub dim: usize,
    pub entries: Vec<(Vec<i64>, f64)>,
}

impl LatticeWeights {
    pub fn total(&self) -> f64 {
        crate::measures::compensated_sum(self.entries.iter().map(|e| &e.1))
    }

    pub fn get(&self, i: &[i64]) -> f64 {
        self.entries
            .binary_search_by(|e| e.0.as_slice().cmp(i))
            .map(|k| self.entries[k].1)
            .unwrap_or(0.0)
    }
}

/// Discretization weights of `μ` on the lattice.
pub fn psi_weights(mu: &EmpiricalMeasure, n: usize) -> Result<LatticeWeights> {
    if n < 3 {
        return Err(MflabError::Invalid(format!("n >= 3 required, got {n}")));
    }
    let d = mu.dim();
    let mut map: std::collections::BTreeMap<Vec<i64>, f64> = std::collections::BTreeMap::new();
    let origin = vec![0i64; d];
    let nf = n as f64;
    for (x, w) in mu.atoms() {
        if w == 0.0 {
            continue;
        }
        let hx = truncation(x, n);
        if hx < 1.0 {
            *map.entry(origin.clone()).or_insert(0.0) += w * (1.0 - hx);
        }
        if hx == 0.0 {
            continue;
        }
        let base: Vec<i64> = x.iter().map(|&c| (nf * c).floor() as i64).collect();
        for corner in 0..(1usize << d) {
            let mut idx = base.clone();
            let mut v = w * hx;
            for k in 0..d {
                if corner >> k & 1 == 1 {
                    idx[k] += 1;
                }
                v *= phi_1d(idx[k], x[k], n);
            }
            if v > 0.0 {
                *map.entry(idx).or_insert(0.0) += v;
            }
        }
    }
    Ok(LatticeWeights {
        n,
        dim: d,
        entries: map.into_iter().collect(),
    })
}

/// Contract for a functional of measures.
pub trait ScalarMeasureFunctional: Sync {
    fn eval(&self, mu: &EmpiricalMeasure) -> Result<f64>;

    /// Analytic Lions gradient `∂_μ U(μ, x)`, when known.
    fn lions_gradient(&self, _mu: &EmpiricalMeasure, _x: &[f64]) -> Option<f64> {
        None
    }

    /// `Some(f(x))` when `U(μ) = ∫ f dμ`.
    fn linear_integrand(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

/// `U ≡ c`.
pub struct Constant(pub f64);

impl ScalarMeasureFunctional for Constant {
    fn eval(&self, _mu: &EmpiricalMeasure) -> Result<f64> {
        Ok(self.0)
    }
    fn lions_gradient(&self, _mu: &EmpiricalMeasure, _x: &[f64]) -> Option<f64> {
        Some(0.0)
    }
}

/// Built-in moment functionals.
pub struct Moment(pub Functional);

impl ScalarMeasureFunctional for Moment {
    fn eval(&self, mu: &EmpiricalMeasure) -> Result<f64> {
        mu.functional(self.0)
    }
    fn lions_gradient(&self, mu: &EmpiricalMeasure, x: &[f64]) -> Option<f64> {
        match self.0 {
            Functional::Mean => Some(1.0),
            Functional::SecondMoment => Some(2.0 * x[0]),
            Functional::AbsDeviation => {
                let m = mu.stats().ok()?.mean;
                Some((x[0] - m).signum())
            }
        }
    }
    fn linear_integrand(&self, x: &[f64]) -> Option<f64> {
        match self.0 {
            Functional::Mean => Some(x[0]),
            Functional::SecondMoment => Some(x.iter().map(|c| c * c).sum()),
            Functional::AbsDeviation => None,
        }
    }
}

/// `U(μ) = ∫ f dμ` for a 1-d profile with known derivative.
pub struct LinearIntegral<F, G> {
    pub f: F,
    pub df: G,
}

impl<F: Fn(f64) -> f64 + Sync, G: Fn(f64) -> f64 + Sync> ScalarMeasureFunctional for LinearIntegral<F, G> {
    fn eval(&self, mu: &EmpiricalMeasure) -> Result<f64> {
        Ok(mu.integrate(|x| (self.f)(x[0])))
    }
    fn lions_gradient(&self, _mu: &EmpiricalMeasure, x: &[f64]) -> Option<f64> {
        Some((self.df)(x[0]))
    }
    fn linear_integrand(&self, x: &[f64]) -> Option<f64> {
        Some((self.f)(x[0]))
    }
}

/// Wasserstein distance to a fixed reference measure.
pub struct DistanceTo {
    pub reference: EmpiricalMeasure,
    pub order: u8,
}

impl ScalarMeasureFunctional for DistanceTo {
    fn eval(&self, mu: &EmpiricalMeasure) -> Result<f64> {
        let d = if self.order == 2 {
            w2_distance(mu, &self.reference)
        } else {
            w1_distance(mu, &self.reference)
        };
        d.map_err(|e| MflabError::Functional(e.to_string()))
    }
}

/// Any closure over measures.
pub struct FnFunctional<F>(pub F);

impl<F: Fn(&EmpiricalMeasure) -> Result<f64> + Sync> ScalarMeasureFunctional for FnFunctional<F> {
    fn eval(&self, mu: &EmpiricalMeasure) -> Result<f64> {
        (self.0)(mu)
    }
}

/// Inverse-CDF table of the normalized bump density on `[-1, 1]`.
fn bump_inverse_cdf() -> &'static Vec<f64> {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let m = 8192;
        let xs: Vec<f64> = (0..=m).map(|k| -1.0 + 2.0 * k as f64 / m as f64).collect();
        let mut cdf = vec![0.0; m + 1];
        let (gx, gw) = gauss_legendre(8);
        for k in 0..m {
            let (a, b) = (xs[k], xs[k + 1]);
            let h = 0.5 * (b - a);
            let s: f64 = gx.iter().zip(&gw).map(|(x, w)| w * h * bump(0.5 * (a + b) + h * x)).sum();
            cdf[k + 1] = cdf[k] + s;
        }
        let total = cdf[m];
        cdf.iter_mut().for_each(|c| *c /= total);
        let q = 4096;
        let mut inv = Vec::with_capacity(q + 1);
        let mut k = 0;
        for j in 0..=q {
            let u = j as f64 / q as f64;
            while k + 1 < m && cdf[k + 1] < u {
                k += 1;
            }
            let (c0, c1) = (cdf[k], cdf[k + 1]);
            let frac = if c1 > c0 { ((u - c0) / (c1 - c0)).clamp(0.0, 1.0) } else { 0.0 };
            inv.push(xs[k] + frac * (xs[k + 1] - xs[k]));
        }
        inv[0] = -1.0;
        inv[q] = 1.0;
        inv
    })
}

/// Draw from the normalized bump density on `[-1, 1]`; symmetric by construction.
fn bump_draw(u: f64) -> f64 {
    let inv = bump_inverse_cdf();
    let q = (inv.len() - 1) as f64;
    let v = if u > 0.5 { 1.0 - u } else { u };
    let pos = v * q;
    let k = (pos.floor() as usize).min(inv.len() - 2);
    let s = inv[k] + (pos - k as f64) * (inv[k + 1] - inv[k]);
    if u > 0.5 {
        -s
    } else {
        s
    }
}

/// Perturbed lattice measure `μ_n(y_k)` for Monte Carlo sample `k`.
pub struct Discretizer<'a> {
    params: &'a MollifierParams,
    psi: LatticeWeights,
    dense: bool,
}

impl<'a> Discretizer<'a> {
    pub fn new(mu: &EmpiricalMeasure, params: &'a MollifierParams) -> Result<Self> {
        params.validate()?;
        let psi = psi_weights(mu, params.n)?;
        Ok(Discretizer {
            params,
            dense: params.dense(mu.dim()),
            psi,
        })
    }

    pub fn psi(&self) -> &LatticeWeights {
        &self.psi
    }

    pub fn is_dense(&self) -> bool {
        self.dense
    }

    /// `μ_n(y)` with `y` drawn from stream `k`; `k = None` gives `y = 0`.
    pub fn measure(&self, k: Option<usize>) -> Result<EmpiricalMeasure> {
        let n = self.params.n;
        let d = self.psi.dim;
        let big_n = self.params.lattice_size(d);
        let r = self.params.simplex_radius(d);
        let scale = big_n / (big_n + 1.0);
        let floor = 1.0 / (big_n * big_n);
        let mut stream = k.map(|k| {
            StreamKey::root(self.params.seed)
                .child(tags::MOLLIFIER)
                .child(k as u64)
                .stream()
        });
        let mut draw = move || match stream.as_mut() {
            Some(s) => r * bump_draw(s.uniform()),
            None => 0.0,
        };
        let nf = n as f64;
        if self.dense {
            let half = (2 * n * n) as i64;
            let len = (2 * half + 1) as usize;
            let mut y = vec![0.0; len];
            let mut ysum = 0.0;
            for (j, yj) in y.iter_mut().enumerate() {
                if j as i64 != half {
                    *yj = draw();
                    ysum += *yj;
                }
            }
            y[half as usize] = -ysum;
            let mut w = vec![0.0; len];
            for (idx, v) in &self.psi.entries {
                w[(idx[0] + half) as usize] += v;
            }
            let positions: Vec<f64> = (0..len).map(|j| (j as i64 - half) as f64 / nf).collect();
            let weights: Vec<f64> = w
                .iter()
                .zip(&y)
                .map(|(p, yj)| scale * (p + floor + yj))
                .collect();
            return EmpiricalMeasure::new(1, positions, weights);
        }
        // sparse: support of ψ only, renormalized
        let m = self.psi.entries.len();
        let mut y: Vec<f64> = (0..m).map(|_| draw()).collect();
        if let Some(origin) = self.psi.entries.iter().position(|e| e.0.iter().all(|&c| c == 0)) {
            let s: f64 = y.iter().enumerate().filter(|(j, _)| *j != origin).map(|(_, v)| v).sum();
            y[origin] = -s;
        }
        let mut positions = Vec::with_capacity(m * d);
        let mut weights: Vec<f64> = Vec::with_capacity(m);
        for ((idx, v), yj) in self.psi.entries.iter().zip(&y) {
            positions.extend(idx.iter().map(|&c| c as f64 / nf));
            weights.push((v + floor + yj).max(0.0));
        }
        let total = crate::measures::compensated_sum(&weights);
        weights.iter_mut().for_each(|w| *w /= total);
        let rest = crate::measures::compensated_sum(&weights[..m - 1]);
        weights[m - 1] = 1.0 - rest;
        EmpiricalMeasure::new(d, positions, weights)
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
}

impl McEstimate {
    /// Welford mean; exact for constant inputs.
    pub fn from_samples(xs: &[f64]) -> Self {
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (k, &x) in xs.iter().enumerate() {
            let delta = x - mean;
            mean += delta / (k + 1) as f64;
            m2 += delta * (x - mean);
        }
        let n = xs.len() as f64;
        let stderr = if xs.len() > 1 { (m2 / (n - 1.0) / n).sqrt() } else { 0.0 };
        McEstimate { value: mean, stderr }
    }
}

/// Evaluate `f` on `μ_n(y_k)` for every Monte Carlo sample, in sample order.
pub fn over_simplex<T: Send>(
    mu: &EmpiricalMeasure,
    params: &MollifierParams,
    f: impl Fn(&EmpiricalMeasure) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let disc = Discretizer::new(mu, params)?;
    (0..params.mc_samples)
        .into_par_iter()
        .map(|k| disc.measure(Some(k)).and_then(|m| f(&m)))
        .collect()
}

fn lattice_floor_sum(params: &MollifierParams, dim: usize, f: &dyn Fn(&[f64]) -> Option<f64>) -> Option<f64> {
    let side = 4 * params.n * params.n + 1;
    if (side as f64).powi(dim as i32) > 1e7 {
        return None;
    }
    let half = (2 * params.n * params.n) as i64;
    let nf = params.n as f64;
    let total = side.pow(dim as u32);
    let mut acc = 0.0;
    let mut x = vec![0.0; dim];
    for lin in 0..total {
        let mut rem = lin;
        for c in x.iter_mut() {
            *c = ((rem % side) as i64 - half) as f64 / nf;
            rem /= side;
        }
        acc += f(&x)?;
    }
    Some(acc)
}

/// `U_n(μ)` with its Monte Carlo standard error.
pub fn mollify_estimate(
    u: &dyn ScalarMeasureFunctional,
    mu: &EmpiricalMeasure,
    params: &MollifierParams,
) -> Result<McEstimate> {
    params.validate()?;
    let d = mu.dim();
    if u.linear_integrand(mu.position(0)).is_some() {
        // E_y[y_i] = 0, so the average over Δ_n is available in closed form
        let psi = psi_weights(mu, params.n)?;
        let nf = params.n as f64;
        let mut acc = 0.0;
        for (idx, v) in &psi.entries {
            let x: Vec<f64> = idx.iter().map(|&c| c as f64 / nf).collect();
            acc += v * u.linear_integrand(&x).expect("linear");
        }
        let big_n = params.lattice_size(d);
        let floor = lattice_floor_sum(params, d, &|x| u.linear_integrand(x)).unwrap_or(0.0);
        let value = big_n / (big_n + 1.0) * (acc + floor / (big_n * big_n));
        return Ok(McEstimate { value, stderr: 0.0 });
    }
    let vals = over_simplex(mu, params, |m| {
        u.eval(m).map_err(|e| match e {
            MflabError::Functional(_) => e,
            other => MflabError::Functional(other.to_string()),
        })
    })?;
    Ok(McEstimate::from_samples(&vals))
}

/// `U_n(μ)`.
pub fn mollify(u: &dyn ScalarMeasureFunctional, mu: &EmpiricalMeasure, params: &MollifierParams) -> Result<f64> {
    mollify_estimate(u, mu, params).map(|e| e.value)
}

/// Discrete smoothing kernel in x: nodes and probability weights.
#[derive(Clone, Debug, PartialEq)]
pub struct XKernel {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl XKernel {
    /// Symmetric product bump supported in the unit ball (Gauss–Legendre
    /// nodes with bump weights).
    pub fn standard(dim: usize) -> Self {
        let per = if dim == 1 { 16 } else { 6 };
        let (gx, gw) = gauss_legendre(per);
        let r = 1.0 / (dim as f64).sqrt();
        let w1: Vec<f64> = gx.iter().zip(&gw).map(|(x, w)| w * bump(*x)).collect();
        let s: f64 = w1.iter().sum();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for lin in 0..per.pow(dim as u32) {
            let mut rem = lin;
            let mut node = Vec::with_capacity(dim);
            let mut w = 1.0;
            for _ in 0..dim {
                let k = rem % per;
                rem /= per;
                node.push(r * gx[k]);
                w *= w1[k] / s;
            }
            nodes.push(node);
            weights.push(w);
        }
        XKernel { nodes, weights }
    }

    /// One-dimensional bump of half-width `width` centred at `center`.
    pub fn shifted(center: f64, width: f64) -> Self {
        let (gx, gw) = gauss_legendre(16);
        let w1: Vec<f64> = gx.iter().zip(&gw).map(|(x, w)| w * bump(*x)).collect();
        let s: f64 = w1.iter().sum();
        XKernel {
            nodes: gx.iter().map(|x| vec![center + width * x]).collect(),
            weights: w1.iter().map(|w| w / s).collect(),
        }
    }

    /// Mean of the kernel (1-d).
    pub fn mean(&self) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(y, w)| w * y[0]).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(y, w)| w * y.iter().map(|c| c * c).sum::<f64>())
            .sum()
    }
}

/// `U_n(x, μ) = ∫ U^μ_n(x - y/n, μ) ζ_0(y) dy`, with the μ-mollification
/// sharing its simplex draws across the x-quadrature nodes.
pub fn mollify_xmu_estimate(
    u: &(dyn Fn(&[f64], &EmpiricalMeasure) -> Result<f64> + Sync),
    x: &[f64],
    mu: &EmpiricalMeasure,
    params: &MollifierParams,
) -> Result<McEstimate> {
    if x.len() != mu.dim() {
        return Err(MflabError::Dim("point and measure dimensions differ".into()));
    }
    let kernel = XKernel::standard(x.len());
    let nf = params.n as f64;
    let shifted: Vec<Vec<f64>> = kernel
        .nodes
        .iter()
        .map(|y| x.iter().zip(y).map(|(a, b)| a - b / nf).collect())
        .collect();
    let vals = over_simplex(mu, params, |m| {
        let mut acc = 0.0;
        for (p, w) in shifted.iter().zip(&kernel.weights) {
            acc += w * u(p, m).map_err(|e| MflabError::Functional(e.to_string()))?;
        }
        Ok(acc)
    })?;
    Ok(McEstimate::from_samples(&vals))
}

pub fn mollify_xmu(
    u: &(dyn Fn(&[f64], &EmpiricalMeasure) -> Result<f64> + Sync),
    x: &[f64],
    mu: &EmpiricalMeasure,
    params: &MollifierParams,
) -> Result<f64> {
    mollify_xmu_estimate(u, x, mu, params).map(|e| e.value)
}

/// Result of the W2 blow-up probe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct W2Blowup {
    pub m: usize,
    /// `|U^m_m(μ^m) - U^m_m(ν^m)| / W2(μ^m, ν^m)` with `U^m = W2(·, ν^m_m(0))`.
    pub ratio_w2: f64,
    /// Same pair with `U^m = W1(·, ν^m_m(0))`, divided by `W1(μ^m, ν^m)`.
    pub ratio_w1: f64,
}

/// Two Diracs at distance `2/m²` straddling the middle of the first lattice
/// cell at `n = m`: the W2-Lipschitz ratio of the mollified distance grows
/// like `√m` while the W1 ratio stays bounded.
pub fn w2_blowup_probe(m: usize, mc_samples: usize, seed: u64) -> Result<W2Blowup> {
    if m < 4 {
        return Err(MflabError::Invalid(format!("w2 blow-up probe needs m >= 4, got {m}")));
    }
    let mf = m as f64;
    let mu = EmpiricalMeasure::dirac((mf + 2.0) / (2.0 * mf * mf));
    let nu = EmpiricalMeasure::dirac((mf - 2.0) / (2.0 * mf * mf));
    let params = MollifierParams {
        n: m,
        mc_samples,
        simplex_exponent: 4,
        seed,
        dense_limit: m.max(default_dense_limit()),
    };
    let reference = Discretizer::new(&nu, &params)?.measure(None)?;
    let base2 = w2_distance(&mu, &nu)?;
    let base1 = w1_distance(&mu, &nu)?;
    let mut out = [0.0; 2];
    for (slot, order) in [(0usize, 2u8), (1, 1)] {
        let u = DistanceTo {
            reference: reference.clone(),
            order,
        };
        // common draws for both measures
        let a = mollify_estimate(&u, &mu, &params)?.value;
        let b = mollify_estimate(&u, &nu, &params)?.value;
        out[slot] = (a - b).abs() / if order == 2 { base2 } else { base1 };
    }
    Ok(W2Blowup {
        m,
        ratio_w2: out[0],
        ratio_w1: out[1],
    })
}

/// A smooth compactly supported test profile on the line.
pub struct TestProfile {
    pub value: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub deriv: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub support: f64,
}

impl TestProfile {
    /// `g(x) = e·x·bump(x/2)`: odd, supported on `[-2, 2]`, `g'(0) = 1`.
    pub fn odd_bump() -> Self {
        let e = std::f64::consts::E;
        TestProfile {
            value: Box::new(move |x| e * x * bump(x / 2.0)),
            deriv: Box::new(move |x| {
                let s = x / 2.0;
                if s.abs() >= 1.0 {
                    return 0.0;
                }
                let b = bump(s);
                // d/dx bump(x/2) = bump(s) · (-2s/(1-s²)²) / 2
                e * (b + x * b * (-s / ((1.0 - s * s) * (1.0 - s * s))))
            }),
            support: 2.0,
        }
    }

    pub fn zero() -> Self {
        TestProfile {
            value: Box::new(|_| 0.0),
            deriv: Box::new(|_| 0.0),
            support: 0.0,
        }
    }
}

/// `|∂_μ U_n(δ_0, x) - g'(x)|` for `U(μ) = ∫ g dμ`, from the closed-form
/// lattice expression `N/(N+1) Σ_i g(i/n) ∂_x[φ_i h](x)` (plus the
/// truncation term at index 0).
pub fn pointwise_gradient_gap(g: &TestProfile, n: usize, x: f64) -> Result<f64> {
    if n < 3 {
        return Err(MflabError::Invalid(format!("n >= 3 required, got {n}")));
    }
    if g.support > n as f64 {
        return Err(MflabError::Support(format!(
            "profile support {} exceeds [-{n}, {n}]",
            g.support
        )));
    }
    let nf = n as f64;
    let big_n = (4 * n * n + 1) as f64;
    let j = (nf * x).floor() as i64;
    let (h, dh) = (trunc_1d(x, n), trunc_1d_deriv(x, n));
    let mut acc = 0.0;
    for i in [j - 1, j, j + 1, j + 2] {
        let gi = (g.value)(i as f64 / nf);
        acc += gi * (phi_1d_deriv(i, x, n) * h + phi_1d(i, x, n) * dh);
    }
    acc -= (g.value)(0.0) * dh;
    let grad = big_n / (big_n + 1.0) * acc;
    Ok((grad - (g.deriv)(x)).abs())
}

/// Pairing of the x-mollified radial coupling `Φ(x, μ) = (x² - m2_μ)²`:
/// returns `(numerical pairing, closed form -2Δm2² + 4ε m_ζ Δm Δm2)`.
pub fn x_mollified_pairing(
    mu1: &EmpiricalMeasure,
    mu2: &EmpiricalMeasure,
    eps: f64,
    kernel: &XKernel,
) -> Result<(f64, f64)> {
    let phi = |x: f64, m2: f64| {
        kernel
            .nodes
            .iter()
            .zip(&kernel.weights)
            .map(|(y, w)| {
                let z = x - eps * y[0];
                w * (z * z - m2).powi(2)
            })
            .sum::<f64>()
    };
    let pairing = crate::mfg::monotonicity_pairing(
        &|x: &[f64], mu: &EmpiricalMeasure| -> Result<f64> {
            Ok(phi(x[0], mu.stats()?.second_moment))
        },
        mu1,
        mu2,
    )?;
    let (s1, s2) = (mu1.stats()?, mu2.stats()?);
    let dm = s1.mean - s2.mean;
    let dm2 = s1.second_moment - s2.second_moment;
    let formula = -2.0 * dm2 * dm2 + 4.0 * eps * kernel.mean() * dm * dm2;
    Ok((pairing, formula))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_examples() {
        for n in [3usize, 4, 8, 16] {
            assert_eq!(clamp_i(0.5, n).unwrap(), 0.5);
            assert_eq!(clamp_i(0.0, n).unwrap(), 1.0);
            assert_eq!(clamp_i(1.0, n).unwrap(), 0.0);
            assert_eq!(clamp_i(1.0 / n as f64, n).unwrap(), 1.0 - 1.0 / n as f64);
        }
        assert_eq!(clamp_i(1.2, 4).unwrap_err().kind(), "range");
        assert_eq!(clamp_i(-0.1, 4).unwrap_err().kind(), "range");
    }

    #[test]
    fn clamp_is_continuous_at_band_edges() {
        for n in [3usize, 5, 10] {
            let c = Clamp::new(n);
            for edge in [c.a, c.a + c.delta, c.b] {
                let l = clamp_unchecked(edge - 1e-12, n);
                let r = clamp_unchecked(edge + 1e-12, n);
                assert!((l - r).abs() < 1e-10, "n={n} edge={edge}");
            }
        }
    }

    #[test]
    fn dirac_on_lattice_and_midpoint() {
        let n = 5;
        let w = psi_weights(&EmpiricalMeasure::dirac(3.0 / 5.0), n).unwrap();
        assert_eq!(w.entries, vec![(vec![3], 1.0)]);
        let w = psi_weights(&EmpiricalMeasure::dirac(3.5 / 5.0), n).unwrap();
        assert_eq!(w.entries, vec![(vec![3], 0.5), (vec![4], 0.5)]);
    }

    #[test]
    fn truncation_mass_goes_to_origin() {
        let n = 4;
        let w = psi_weights(&EmpiricalMeasure::dirac(100.0), n).unwrap();
        assert_eq!(w.entries, vec![(vec![0], 1.0)]);
    }

    #[test]
    fn bump_draws_are_symmetric_and_bounded() {
        for k in 0..=100 {
            let u = k as f64 / 100.0;
            let s = bump_draw(u.max(1e-12));
            assert!(s.abs() <= 1.0);
        }
        assert!((bump_draw(0.3) + bump_draw(0.7)).abs() < 1e-15);
    }

    #[test]
    fn gradient_gap_examples() {
        let g = TestProfile::odd_bump();
        for n in [4, 8, 16] {
            assert!(pointwise_gradient_gap(&g, n, 0.0).unwrap() >= 1.0 - 1e-12);
        }
        assert_eq!(pointwise_gradient_gap(&TestProfile::zero(), 6, 0.0).unwrap(), 0.0);
        let wide = TestProfile {
            support: 10.0,
            ..TestProfile::odd_bump()
        };
        assert_eq!(pointwise_gradient_gap(&wide, 4, 0.0).unwrap_err().kind(), "support");
    }
}
