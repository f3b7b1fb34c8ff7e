//! Measurements on a value function: Lipschitz and Hölder ratios, data
//! stability, monotonicity of `V(t, ·, ·)` and convergence of the
//! mollified-data solutions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::MfgProblem;
use super::value::ValueFunction;
use crate::error::Result;
use crate::hjb::{CouplingSpec, ScalarFn, Term};
use crate::measures::{w1_distance, DistributionSpec, EmpiricalMeasure};
use crate::mollifier::{mollify_xmu_estimate, MollifierParams};
use crate::rng::{tags, StreamKey};

/// Probe points and measure pairs.
#[derive(Clone, Debug)]
pub struct ProbeSet {
    pub xs: Vec<f64>,
    pub pairs: Vec<(EmpiricalMeasure, EmpiricalMeasure)>,
}

impl ProbeSet {
    /// `nx` points on `[-2, 2]` and `pairs` pairs of Gaussian quantile
    /// grids with random means in `[-1, 1]` and variances in `[0.25, 1]`.
    pub fn random(nx: usize, pairs: usize, atoms: usize, seed: u64) -> Result<Self> {
        let xs = (0..nx)
            .map(|i| -2.0 + 4.0 * i as f64 / (nx.max(2) - 1) as f64)
            .collect();
        let mut s = StreamKey::root(seed).child(tags::PROBES).stream();
        let mut draw = || -> Result<EmpiricalMeasure> {
            let mean = 2.0 * s.uniform() - 1.0;
            let var = 0.25 + 0.75 * s.uniform();
            DistributionSpec::Gaussian { mean, var }.quantile_grid(atoms)
        };
        let pairs = (0..pairs)
            .map(|_| Ok((draw()?, draw()?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ProbeSet { xs, pairs })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    /// `max |V(0,x,μ) - V(0,x',μ)| / |x - x'|` over adjacent probe points.
    pub lip_x: f64,
    /// `max |V(0,x,μ1) - V(0,x,μ2)| / W1(μ1, μ2)`.
    pub lip_mu: f64,
    /// `max |V(t,x,μ) - V(0,x,μ)| / √t`.
    pub holder_t: f64,
}

/// Lipschitz and Hölder ratios of `V` over the probe set, at the given
/// positive probe times for the Hölder ratio.
pub fn regularity_probes(v: &ValueFunction, probes: &ProbeSet, times: &[f64]) -> Result<RegularityReport> {
    let xs = &probes.xs;
    let per_pair: Vec<(f64, f64, f64)> = probes
        .pairs
        .par_iter()
        .map(|(m1, m2)| -> Result<(f64, f64, f64)> {
            let a = v.eval_many(0.0, xs, m1)?;
            let b = v.eval_many(0.0, xs, m2)?;
            let mut lip_x: f64 = 0.0;
            for vals in [&a, &b] {
                for i in 1..xs.len() {
                    lip_x = lip_x.max((vals[i] - vals[i - 1]).abs() / (xs[i] - xs[i - 1]));
                }
            }
            let w = w1_distance(m1, m2)?;
            let lip_mu = a
                .iter()
                .zip(&b)
                .map(|(p, q)| (p - q).abs() / w)
                .fold(0.0, f64::max);
            let mut holder: f64 = 0.0;
            for &t in times {
                let c = v.eval_many(t, xs, m1)?;
                for (p, q) in a.iter().zip(&c) {
                    holder = holder.max((p - q).abs() / t.sqrt());
                }
            }
            Ok((lip_x, lip_mu, holder))
        })
        .collect::<Result<Vec<_>>>()?;
    let fold = |f: fn(&(f64, f64, f64)) -> f64| per_pair.iter().map(f).fold(0.0, f64::max);
    Ok(RegularityReport {
        lip_x: fold(|r| r.0),
        lip_mu: fold(|r| r.1),
        holder_t: fold(|r| r.2),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub eps: Vec<f64>,
    /// `sup |V^ε - V|` over the probe set.
    pub sup_gap: Vec<f64>,
    /// `C` of the envelope `C(ε^{1/4} + ε)` fitted at the largest `ε`.
    pub envelope_c: f64,
    /// True when every point lies under the envelope.
    pub under_envelope: bool,
    /// Log-log slope of `sup_gap` against `ε`.
    pub slope: f64,
}

/// Perturb the terminal coupling by `ε·direction(x)` and measure
/// `sup |V^ε - V|` at `t = 0` over the probe set, with common noise.
pub fn stability_curve(
    problem: &MfgProblem,
    partition_count: usize,
    direction: ScalarFn,
    eps: &[f64],
    probes: &ProbeSet,
    seed: u64,
) -> Result<StabilityReport> {
    let base = ValueFunction::new(problem.clone(), partition_count, seed)?;
    let measures: Vec<&EmpiricalMeasure> = probes.pairs.iter().flat_map(|(a, b)| [a, b]).collect();
    let reference: Vec<Vec<f64>> = measures
        .iter()
        .map(|m| base.eval_many(0.0, &probes.xs, m))
        .collect::<Result<_>>()?;
    let mut sup_gap = Vec::with_capacity(eps.len());
    for &e in eps {
        let coupling = CouplingSpec {
            running: problem.coupling.running.clone(),
            terminal: Term::Perturbed {
                base: Box::new(problem.coupling.terminal.clone()),
                eps: e,
                direction: direction.clone(),
            },
        };
        let v = ValueFunction::new(problem.with_coupling(coupling), partition_count, seed)?;
        let mut worst: f64 = 0.0;
        for (m, r) in measures.iter().zip(&reference) {
            let vals = v.eval_many(0.0, &probes.xs, m)?;
            for (p, q) in vals.iter().zip(r) {
                worst = worst.max((p - q).abs());
            }
        }
        sup_gap.push(worst);
    }
    let (imax, emax) = eps
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &e)| if e > acc.1 { (i, e) } else { acc });
    let envelope = |e: f64| e.powf(0.25) + e;
    let envelope_c = sup_gap[imax] / envelope(emax);
    let under_envelope = eps
        .iter()
        .zip(&sup_gap)
        .all(|(&e, &g)| g <= envelope_c * envelope(e) * (1.0 + 1e-9));
    let slope = crate::harness::fit::ols_loglog(eps, &sup_gap).map(|f| f.slope).unwrap_or(f64::NAN);
    Ok(StabilityReport {
        eps: eps.to_vec(),
        sup_gap,
        envelope_c,
        under_envelope,
        slope,
    })
}

/// `∫ [V(t,x,μ1) - V(t,x,μ2)] (μ1 - μ2)(dx)`.
pub fn value_pairing(v: &ValueFunction, t: f64, mu1: &EmpiricalMeasure, mu2: &EmpiricalMeasure) -> Result<f64> {
    let s1 = v.section(t, mu1)?;
    let s2 = v.section(t, mu2)?;
    let mut terms = Vec::with_capacity(mu1.len() + mu2.len());
    for (x, w) in mu1.atoms() {
        terms.push(w * (s1.value(x[0]) - s2.value(x[0])));
    }
    for (x, w) in mu2.atoms() {
        terms.push(-w * (s1.value(x[0]) - s2.value(x[0])));
    }
    Ok(crate::measures::compensated_sum(&terms))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodSolutionRow {
    pub n: usize,
    /// `max |V_n - V|` at `t = 0` over the probes.
    pub max_gap: f64,
    /// Largest Monte Carlo standard error of the mollified terminal data.
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodSolutionReport {
    pub rows: Vec<GoodSolutionRow>,
}

impl GoodSolutionReport {
    /// Nonincreasing in `n` up to `k` combined standard errors.
    pub fn is_monotone(&self, k: f64) -> bool {
        self.rows.windows(2).all(|w| {
            let tol = k * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
            w[1].max_gap <= w[0].max_gap + tol
        })
    }
}

/// Compare `V` with the value functions of mollified data `(H_n, F_n, G_n)`
/// on a single interval, for each `n` in the schedule.
pub fn good_solution_consistency(
    problem: &MfgProblem,
    schedule: &[usize],
    mc_samples: usize,
    xs: &[f64],
    measures: &[EmpiricalMeasure],
    seed: u64,
) -> Result<GoodSolutionReport> {
    let v = ValueFunction::new(problem.clone(), 1, seed)?;
    let reference: Vec<Vec<f64>> = measures
        .iter()
        .map(|m| v.eval_many(0.0, xs, m))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let params = MollifierParams::new(n, mc_samples, 3, seed)?;
        let vn = ValueFunction::new(problem.mollified(&params)?, 1, seed)?;
        let mut max_gap: f64 = 0.0;
        let mut stderr: f64 = 0.0;
        for (m, r) in measures.iter().zip(&reference) {
            let section = vn.section(0.0, m)?;
            for (x, q) in xs.iter().zip(r) {
                max_gap = max_gap.max((section.value(*x) - q).abs());
            }
            if let Some(local) = section.local() {
                let terminal = local.flow.terminal();
                let g = &problem.coupling.terminal;
                let u = |y: &[f64], mu: &EmpiricalMeasure| g.eval(y[0], mu);
                let probe_x = if g.is_x_free() { &xs[..1] } else { xs };
                for &x in probe_x {
                    stderr = stderr.max(mollify_xmu_estimate(&u, &[x], terminal, &params)?.stderr);
                }
            }
        }
        rows.push(GoodSolutionRow { n, max_gap, stderr });
    }
    Ok(GoodSolutionReport { rows })
}
