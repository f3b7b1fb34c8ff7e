//! Hamiltonians `H(x, z) = sup_a [a·z - L(x, a)]` and their derivatives.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::quadrature::{bump, gauss_legendre};
use crate::rng::StreamKey;

/// Evaluation contract for a convex Hamiltonian.
pub trait Hamiltonian: Send + Sync + fmt::Debug {
    fn h(&self, x: f64, z: f64) -> f64;
    /// `∂_p H`.
    fn dp(&self, x: f64, z: f64) -> f64;
    /// `∂_x H`.
    fn dx(&self, _x: f64, _z: f64) -> f64 {
        0.0
    }
    /// `∂_pp H`.
    fn dpp(&self, x: f64, z: f64) -> f64;
    /// `∂_xp H`.
    fn dxp(&self, _x: f64, _z: f64) -> f64 {
        0.0
    }
}

pub type HamiltonianSpec = Arc<dyn Hamiltonian>;

/// `H(x, z) = z²/2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Quadratic;

impl Hamiltonian for Quadratic {
    fn h(&self, _x: f64, z: f64) -> f64 {
        0.5 * z * z
    }
    fn dp(&self, _x: f64, z: f64) -> f64 {
        z
    }
    fn dpp(&self, _x: f64, _z: f64) -> f64 {
        1.0
    }
}

type Fx2 = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// User-supplied smooth Hamiltonian given by closures.
pub struct FnHamiltonian {
    pub h: Fx2,
    pub dp: Fx2,
    pub dx: Fx2,
    pub dpp: Fx2,
    pub dxp: Fx2,
}

impl fmt::Debug for FnHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnHamiltonian")
    }
}

impl Hamiltonian for FnHamiltonian {
    fn h(&self, x: f64, z: f64) -> f64 {
        (self.h)(x, z)
    }
    fn dp(&self, x: f64, z: f64) -> f64 {
        (self.dp)(x, z)
    }
    fn dx(&self, x: f64, z: f64) -> f64 {
        (self.dx)(x, z)
    }
    fn dpp(&self, x: f64, z: f64) -> f64 {
        (self.dpp)(x, z)
    }
    fn dxp(&self, x: f64, z: f64) -> f64 {
        (self.dxp)(x, z)
    }
}

/// `H_n(x, z) = ∫∫ H(x - a/n, z - b/n) ζ(a) ζ(b) da db` with a symmetric
/// bump `ζ` on `[-1, 1]`, by tensor Gauss–Legendre quadrature.
#[derive(Debug)]
pub struct Mollified {
    inner: HamiltonianSpec,
    offsets: Vec<f64>,
    weights: Vec<f64>,
}

impl Mollified {
    pub fn new(inner: HamiltonianSpec, n: usize) -> Self {
        let (x, w) = gauss_legendre(8);
        let raw: Vec<f64> = x.iter().zip(&w).map(|(x, w)| w * bump(*x)).collect();
        let s: f64 = raw.iter().sum();
        Mollified {
            inner,
            offsets: x.iter().map(|x| x / n as f64).collect(),
            weights: raw.iter().map(|w| w / s).collect(),
        }
    }

    fn avg(&self, x: f64, z: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (a, wa) in self.offsets.iter().zip(&self.weights) {
            for (b, wb) in self.offsets.iter().zip(&self.weights) {
                acc += wa * wb * f(x - a, z - b);
            }
        }
        acc
    }
}

impl Hamiltonian for Mollified {
    fn h(&self, x: f64, z: f64) -> f64 {
        self.avg(x, z, |x, z| self.inner.h(x, z))
    }
    fn dp(&self, x: f64, z: f64) -> f64 {
        self.avg(x, z, |x, z| self.inner.dp(x, z))
    }
    fn dx(&self, x: f64, z: f64) -> f64 {
        self.avg(x, z, |x, z| self.inner.dx(x, z))
    }
    fn dpp(&self, x: f64, z: f64) -> f64 {
        self.avg(x, z, |x, z| self.inner.dpp(x, z))
    }
    fn dxp(&self, x: f64, z: f64) -> f64 {
        self.avg(x, z, |x, z| self.inner.dxp(x, z))
    }
}

/// Serializable Hamiltonian choice for configs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    #[default]
    Quadratic,
}

impl HamiltonianKind {
    pub fn build(self) -> HamiltonianSpec {
        match self {
            HamiltonianKind::Quadratic => Arc::new(Quadratic),
        }
    }
}

/// Smallest value of `H(x,z2) - H(x,z1) - ∂pH(x,z1)(z2-z1)` over random
/// points with `|x|, |z| ≤ radius`; nonnegative for convex `H`.
pub fn convexity_witness(h: &dyn Hamiltonian, radius: f64, samples: usize, seed: u64) -> f64 {
    let mut s = StreamKey::root(seed).child(0x4858).stream();
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let x = radius * (2.0 * s.uniform() - 1.0);
        let z1 = radius * (2.0 * s.uniform() - 1.0);
        let z2 = radius * (2.0 * s.uniform() - 1.0);
        let gap = h.h(x, z2) - h.h(x, z1) - h.dp(x, z1) * (z2 - z1);
        worst = worst.min(gap);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_convex() {
        assert!(convexity_witness(&Quadratic, 10.0, 1000, 1) >= 0.0);
    }

    #[test]
    fn mollified_quadratic_shifts_by_kernel_variance() {
        let m = Mollified::new(Arc::new(Quadratic), 4);
        let var: f64 = m.offsets.iter().zip(&m.weights).map(|(a, w)| w * a * a).sum();
        for z in [-2.0, 0.0, 1.5] {
            assert!((m.h(0.3, z) - (0.5 * z * z + 0.5 * var)).abs() < 1e-14);
            assert!((m.dp(0.3, z) - z).abs() < 1e-14);
        }
        assert!(convexity_witness(&m, 5.0, 200, 2) >= -1e-12);
    }
}
