//! Gauss–Legendre and Gauss–Hermite rules, plus the smooth transition
//! functions built on `exp(-1/t)` that the mollifier and kernels share.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss–Hermite rule for the standard normal: `E[f(Z)] ≈ Σ w_k f(x_k)`.
pub fn gauss_hermite_normal(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Physicists' rule for weight e^{-t^2}, then t = x/√2.
    let mut t = vec![0.0; n];
    let mut w = vec![0.0; n];
    let pim4 = PI.powf(-0.25);
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z: f64 = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * t[0],
            3 => 1.91 * z - 0.91 * t[1],
            _ => 2.0 * z - t[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-14 {
                break;
            }
        }
        t[i] = z;
        t[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let s = PI.sqrt();
    let x = t.iter().map(|t| t * 2f64.sqrt()).collect();
    let w = w.iter().map(|w| w / s).collect();
    (x, w)
}

/// `E[f(Z)]` for standard normal `Z` by an `n`-point Gauss–Hermite rule.
pub fn normal_expectation(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_hermite_normal(n);
    x.iter().zip(&w).map(|(x, w)| w * f(*x)).sum()
}

#[inline]
fn expinv(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        (-1.0 / u).exp()
    }
}

/// C^∞ step: 0 for `u ≤ 0`, 1 for `u ≥ 1`, `f(u)/(f(u)+f(1-u))` between.
pub fn smoothstep(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = expinv(u);
        a / (a + expinv(1.0 - u))
    }
}

/// Derivative of [`smoothstep`].
pub fn smoothstep_deriv(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        let a = expinv(u);
        let b = expinv(1.0 - u);
        let da = a / (u * u);
        let db = -b / ((1.0 - u) * (1.0 - u));
        (da * (a + b) - a * (da + db)) / ((a + b) * (a + b))
    }
}

/// `∫_0^u smoothstep`, for `u` in `[0, 1]`; equals `1/2` at `u = 1`.
pub fn smoothstep_integral(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 0.5 + (u - 1.0);
    }
    // smoothstep(s) + smoothstep(1-s) = 1, so integrate over the shorter side
    if u > 0.5 {
        return u - 0.5 + smoothstep_integral(1.0 - u);
    }
    thread_local! {
        static GL: (Vec<f64>, Vec<f64>) = gauss_legendre(24);
    }
    GL.with(|(x, w)| {
        // two panels, the integrand is flat near 0
        let mut acc = 0.0;
        for (a, b) in [(0.0, 0.5 * u), (0.5 * u, u)] {
            let h = 0.5 * (b - a);
            let c = 0.5 * (a + b);
            for (xi, wi) in x.iter().zip(w) {
                acc += h * wi * smoothstep(c + h * xi);
            }
        }
        acc
    })
}

/// Plateau bump on `[0,1]`: rises on the first quarter, flat on the middle
/// half, falls on the last quarter.  Integral over `[0,1]` is `3/4`.
pub fn plateau(u: f64) -> f64 {
    smoothstep(4.0 * u) * smoothstep(4.0 * (1.0 - u))
}

/// `∫_0^u plateau`.
pub fn plateau_integral(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u <= 0.25 {
        smoothstep_integral(4.0 * u) / 4.0
    } else if u <= 0.75 {
        0.125 + (u - 0.25)
    } else if u < 1.0 {
        0.625 + 0.25 * (0.5 - smoothstep_integral(4.0 * (1.0 - u)))
    } else {
        0.75
    }
}

/// Monotone C^∞ step on `[0,1]` with slope at most `4/3`.
pub fn gentle_step(u: f64) -> f64 {
    plateau_integral(u.clamp(0.0, 1.0)) / 0.75
}

/// Derivative of [`gentle_step`].
pub fn gentle_step_deriv(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        plateau(u) / 0.75
    }
}

/// Unnormalized smooth bump `exp(-1/(1-s²))` on `(-1, 1)`.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-13);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn hermite_matches_normal_moments() {
        assert!((normal_expectation(20, |_| 1.0) - 1.0).abs() < 1e-12);
        assert!((normal_expectation(20, |x| x * x) - 1.0).abs() < 1e-12);
        assert!((normal_expectation(20, |x| x.powi(4)) - 3.0).abs() < 1e-11);
        // E[e^Z] = e^{1/2}
        assert!((normal_expectation(40, f64::exp) - 0.5f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn smoothstep_integral_consistent() {
        assert!((smoothstep_integral(1.0) - 0.5).abs() < 1e-14);
        let (x, w) = gauss_legendre(60);
        for &u in &[0.1, 0.3, 0.5, 0.7, 0.95] {
            let reference: f64 = x
                .iter()
                .zip(&w)
                .map(|(xi, wi)| 0.5 * u * wi * smoothstep(0.5 * u * (xi + 1.0)))
                .sum();
            assert!((smoothstep_integral(u) - reference).abs() < 1e-10, "{u}");
        }
    }

    #[test]
    fn gentle_step_bounds() {
        assert_eq!(gentle_step(0.0), 0.0);
        assert!((gentle_step(1.0) - 1.0).abs() < 1e-14);
        let mut prev = 0.0;
        for k in 1..=1000 {
            let u = k as f64 / 1000.0;
            let g = gentle_step(u);
            assert!(g >= prev - 1e-15);
            assert!(gentle_step_deriv(u) <= 4.0 / 3.0 + 1e-12);
            prev = g;
        }
    }
}
