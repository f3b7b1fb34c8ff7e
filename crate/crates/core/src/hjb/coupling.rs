//! Couplings `F(x, μ)` and `G(x, μ)`.
//!
//! The built-ins depend on μ only through its mean, second moment and mean
//! absolute deviation, so a term is *bound* to a measure once and then
//! evaluated cheaply on a whole grid.  Mollified terms bind to the Monte
//! Carlo family of discretized measures instead.

use serde::{Deserialize, Serialize};

use crate::error::{MflabError, Result};
use crate::measures::{EmpiricalMeasure, MeasureStats};
use crate::mollifier::{over_simplex, MollifierParams, XKernel};

/// `2/√π = E|B_1 - B'_1|`... the constant in the abs-deviation coupling.
pub const TWO_OVER_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Smooth scalar profiles used inside couplings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFn {
    #[default]
    Zero,
    /// `1/(1+e^x)`.
    Logistic,
    Linear { slope: f64, intercept: f64 },
    Sine { amplitude: f64, frequency: f64 },
    /// `scale·x²`.
    Square { scale: f64 },
}

impl ScalarFn {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Zero => 0.0,
            ScalarFn::Logistic => 1.0 / (1.0 + x.exp()),
            ScalarFn::Linear { slope, intercept } => slope * x + intercept,
            ScalarFn::Sine { amplitude, frequency } => amplitude * (frequency * x).sin(),
            ScalarFn::Square { scale } => scale * x * x,
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Zero => 0.0,
            ScalarFn::Logistic => {
                let e = x.exp();
                -e / ((1.0 + e) * (1.0 + e))
            }
            ScalarFn::Linear { slope, .. } => *slope,
            ScalarFn::Sine { amplitude, frequency } => amplitude * frequency * (frequency * x).cos(),
            ScalarFn::Square { scale } => 2.0 * scale * x,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ScalarFn::Zero)
    }
}

/// One coupling term (`F` or `G`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Term {
    #[default]
    Zero,
    /// `g(x) + c·m_μ`.
    MeanLinear {
        #[serde(default)]
        g: ScalarFn,
        c: f64,
    },
    /// `scale·(x - m_μ)²`.
    Quadratic {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `|E|ξ - Eξ| - 2/√π|`, independent of x.
    AbsDeviation,
    /// `base + eps·direction(x)`.
    Perturbed {
        base: Box<Term>,
        eps: f64,
        direction: ScalarFn,
    },
    /// Mollified in `(x, μ)` with the lattice mollifier.
    Mollified { base: Box<Term>, params: MollifierParams },
}

fn one() -> f64 {
    1.0
}

impl Term {
    pub fn validate(&self) -> Result<()> {
        match self {
            Term::Quadratic { scale } if !scale.is_finite() => {
                Err(MflabError::Invalid("quadratic scale must be finite".into()))
            }
            Term::Perturbed { base, .. } => base.validate(),
            Term::Mollified { base, params } => {
                params.validate()?;
                if !base.is_simple() {
                    return Err(MflabError::Invalid("only built-in terms can be mollified".into()));
                }
                base.validate()
            }
            _ => Ok(()),
        }
    }

    /// Depends on μ only through [`MeasureStats`].
    pub fn is_simple(&self) -> bool {
        matches!(
            self,
            Term::Zero | Term::MeanLinear { .. } | Term::Quadratic { .. } | Term::AbsDeviation
        )
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Term::Zero => true,
            Term::MeanLinear { g, c } => g.is_zero() && *c == 0.0,
            Term::Quadratic { scale } => *scale == 0.0,
            _ => false,
        }
    }

    pub fn is_x_free(&self) -> bool {
        match self {
            Term::Zero | Term::AbsDeviation => true,
            Term::MeanLinear { g, .. } => g.is_zero(),
            Term::Quadratic { scale } => *scale == 0.0,
            Term::Perturbed { base, direction, eps } => base.is_x_free() && (direction.is_zero() || *eps == 0.0),
            Term::Mollified { base, .. } => base.is_x_free(),
        }
    }

    fn eval_simple(&self, x: f64, s: &MeasureStats) -> f64 {
        match self {
            Term::Zero => 0.0,
            Term::MeanLinear { g, c } => g.value(x) + c * s.mean,
            Term::Quadratic { scale } => scale * (x - s.mean) * (x - s.mean),
            Term::AbsDeviation => (s.abs_deviation - TWO_OVER_SQRT_PI).abs(),
            _ => unreachable!("not a simple term"),
        }
    }

    fn dx_simple(&self, x: f64, s: &MeasureStats) -> f64 {
        match self {
            Term::MeanLinear { g, .. } => g.deriv(x),
            Term::Quadratic { scale } => 2.0 * scale * (x - s.mean),
            _ => 0.0,
        }
    }

    /// Declared Lipschitz constant in μ (W1) for `|x|, |m_μ| ≤ radius`.
    pub fn lipschitz_mu(&self, radius: f64) -> Option<f64> {
        match self {
            Term::Zero => Some(0.0),
            Term::MeanLinear { c, .. } => Some(c.abs()),
            Term::Quadratic { scale } => Some(4.0 * scale.abs() * radius),
            Term::AbsDeviation => Some(2.0),
            Term::Perturbed { base, .. } => base.lipschitz_mu(radius),
            Term::Mollified { .. } => None,
        }
    }

    /// Analytic Lions derivative `∂_μ Φ(x, μ, x̃)` when the term is smooth in μ.
    pub fn lions(&self, x: f64, s: &MeasureStats, _xt: f64) -> Option<f64> {
        match self {
            Term::Zero => Some(0.0),
            Term::MeanLinear { c, .. } => Some(*c),
            Term::Quadratic { scale } => Some(-2.0 * scale * (x - s.mean)),
            Term::Perturbed { base, .. } => base.lions(x, s, _xt),
            _ => None,
        }
    }

    /// Bind to a measure for repeated evaluation in x.
    pub fn bind(&self, mu: &EmpiricalMeasure) -> Result<BoundTerm<'_>> {
        self.bind_with(mu, None)
    }

    /// As [`Term::bind`], reusing precomputed moments for simple terms.
    pub fn bind_with(&self, mu: &EmpiricalMeasure, stats: Option<MeasureStats>) -> Result<BoundTerm<'_>> {
        let stats = match stats {
            Some(s) => s,
            None => mu.stats()?,
        };
        Ok(match self {
            Term::Perturbed { base, eps, direction } => BoundTerm::Perturbed {
                base: Box::new(base.bind_with(mu, Some(stats))?),
                eps: *eps,
                direction,
            },
            Term::Mollified { base, params } => {
                let samples = over_simplex(mu, params, |m| m.stats())?;
                let (shifts, weights) = if base.is_x_free() {
                    (vec![0.0], vec![1.0])
                } else {
                    let k = XKernel::standard(1);
                    let nf = params.n as f64;
                    (k.nodes.iter().map(|y| y[0] / nf).collect(), k.weights)
                };
                BoundTerm::Mollified {
                    inner: base,
                    samples,
                    shifts,
                    weights,
                }
            }
            simple => BoundTerm::Simple(simple, stats),
        })
    }

    pub fn eval(&self, x: f64, mu: &EmpiricalMeasure) -> Result<f64> {
        Ok(self.bind(mu)?.eval(x))
    }
}

/// A term with its measure dependence resolved.
pub enum BoundTerm<'a> {
    Simple(&'a Term, MeasureStats),
    Perturbed {
        base: Box<BoundTerm<'a>>,
        eps: f64,
        direction: &'a ScalarFn,
    },
    Mollified {
        inner: &'a Term,
        samples: Vec<MeasureStats>,
        shifts: Vec<f64>,
        weights: Vec<f64>,
    },
}

impl BoundTerm<'_> {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            BoundTerm::Simple(t, s) => t.eval_simple(x, s),
            BoundTerm::Perturbed { base, eps, direction } => base.eval(x) + eps * direction.value(x),
            BoundTerm::Mollified {
                inner,
                samples,
                shifts,
                weights,
            } => {
                let mut acc = 0.0;
                for s in samples {
                    for (y, w) in shifts.iter().zip(weights) {
                        acc += w * inner.eval_simple(x - y, s);
                    }
                }
                acc / samples.len() as f64
            }
        }
    }

    pub fn dx(&self, x: f64) -> f64 {
        match self {
            BoundTerm::Simple(t, s) => t.dx_simple(x, s),
            BoundTerm::Perturbed { base, eps, direction } => base.dx(x) + eps * direction.deriv(x),
            BoundTerm::Mollified {
                inner,
                samples,
                shifts,
                weights,
            } => {
                let mut acc = 0.0;
                for s in samples {
                    for (y, w) in shifts.iter().zip(weights) {
                        acc += w * inner.dx_simple(x - y, s);
                    }
                }
                acc / samples.len() as f64
            }
        }
    }
}

/// Running cost `F` and terminal cost `G`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    #[serde(default)]
    pub running: Term,
    #[serde(default)]
    pub terminal: Term,
}

impl CouplingSpec {
    pub fn terminal(terminal: Term) -> Self {
        CouplingSpec {
            running: Term::Zero,
            terminal,
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// `G = g(x) + c·m_μ`.
    pub fn mean_linear(g: ScalarFn, c: f64) -> Self {
        Self::terminal(Term::MeanLinear { g, c })
    }

    /// `G = (x - m_μ)²`.
    pub fn quadratic() -> Self {
        Self::terminal(Term::Quadratic { scale: 1.0 })
    }

    /// `G = |E|ξ - Eξ| - 2/√π|`.
    pub fn abs_deviation() -> Self {
        Self::terminal(Term::AbsDeviation)
    }

    pub fn validate(&self) -> Result<()> {
        self.running.validate()?;
        self.terminal.validate()
    }

    /// Both terms mollified with the same parameters.
    pub fn mollified(&self, params: &MollifierParams) -> Self {
        let wrap = |t: &Term| {
            if t.is_zero() {
                Term::Zero
            } else {
                Term::Mollified {
                    base: Box::new(t.clone()),
                    params: params.clone(),
                }
            }
        };
        CouplingSpec {
            running: wrap(&self.running),
            terminal: wrap(&self.terminal),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{sample, w1_distance, DistributionSpec};

    #[test]
    fn lipschitz_witness_for_builtins() {
        let radius = 3.0;
        let terms = [
            Term::Zero,
            Term::MeanLinear { g: ScalarFn::Logistic, c: 1.7 },
            Term::Quadratic { scale: 1.0 },
            Term::AbsDeviation,
        ];
        for seed in 0..20u64 {
            let mu = sample(&DistributionSpec::Uniform { a: -1.0, b: 1.0 }, 30, seed).unwrap();
            let nu = sample(&DistributionSpec::Gaussian { mean: 0.3, var: 0.5 }, 30, seed + 100).unwrap();
            let w = w1_distance(&mu, &nu).unwrap();
            for t in &terms {
                let l = t.lipschitz_mu(radius).unwrap();
                for x in [-1.5, 0.0, 2.0] {
                    let d = (t.eval(x, &mu).unwrap() - t.eval(x, &nu).unwrap()).abs();
                    assert!(d <= l * w + 1e-12, "{t:?} {d} > {l}·{w}");
                }
            }
        }
    }

    #[test]
    fn abs_deviation_at_gaussian_law_is_near_zero() {
        let mu = DistributionSpec::standard_normal().quantile_grid(20_000).unwrap();
        // E|ξ| = √(2/π) for N(0,1); the coupling compares with 2/√π
        let v = Term::AbsDeviation.eval(0.0, &mu).unwrap();
        assert!((v - (TWO_OVER_SQRT_PI - (2.0 / std::f64::consts::PI).sqrt())).abs() < 1e-4);
    }

    #[test]
    fn serde_round_trip() {
        let c = CouplingSpec {
            running: Term::Zero,
            terminal: Term::Perturbed {
                base: Box::new(Term::Quadratic { scale: 1.0 }),
                eps: 0.1,
                direction: ScalarFn::Sine { amplitude: 1.0, frequency: 2.0 },
            },
        };
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<CouplingSpec>(&s).unwrap(), c);
    }
}
