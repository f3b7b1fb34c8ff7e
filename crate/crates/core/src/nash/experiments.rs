//! Rates in `N`: empirical measures, Nash values against `V`, and
//! propagation of chaos.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::oracle::{nash_lq, nash_separable, NashFamily, NashOracle, ResidualCertificate};
use crate::error::{MflabError, Result};
use crate::harness::fit::{ols_loglog, LogLogFit};
use crate::hjb::{CouplingSpec, GridField, HjbOptions, ScalarFn};
use crate::measures::{equal_weights, sample, w1_distance, w1_to_law, DistributionSpec};
use crate::mfg::flow::{forward_flow, snapshot_levels, FlowOptions};
use crate::mfg::{MfgConfig, MfgProblem, PicardOptions, SpaceGrid, ValueFunction};
use crate::rng::{tags, StreamKey};

/// `d_ε = max(d, 2 + ε)` with `d = 1`, `ε = 0.1`.
pub const D_EPS: f64 = 2.1;

/// A statistic against `N` with its log-log fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub statistic: String,
    pub ns: Vec<usize>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Present with at least four points, all positive.
    pub fit: Option<LogLogFit>,
}

impl RateFit {
    pub fn new(statistic: &str, ns: Vec<usize>, values: Vec<f64>, stderr: Vec<f64>) -> Self {
        let fit = if ns.len() >= 4 {
            let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
            ols_loglog(&x, &values).ok()
        } else {
            None
        };
        RateFit {
            statistic: statistic.to_string(),
            ns,
            values,
            stderr,
            fit,
        }
    }

    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    /// Nonincreasing in `N` up to `k` combined standard errors.
    pub fn is_monotone(&self, k: f64) -> bool {
        (1..self.values.len()).all(|i| {
            let tol = k * self.stderr[i - 1].hypot(self.stderr[i]);
            self.values[i] <= self.values[i - 1] + tol
        })
    }

    /// Columns `N,statistic,stderr`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        wtr.write_record(["N", "statistic", "stderr"])?;
        for ((n, v), s) in self.ns.iter().zip(&self.values).zip(&self.stderr) {
            wtr.write_record([n.to_string(), format!("{v:?}"), format!("{s:?}")])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// `{statistic, slope, intercept, r2, points}`.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "statistic": self.statistic,
            "slope": self.fit.map(|f| f.slope),
            "intercept": self.fit.map(|f| f.intercept),
            "r2": self.fit.map(|f| f.r2),
            "points": self.ns.len(),
            "d_eps": D_EPS,
        })
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `E[W1²(μ^N, μ)]` over `trials` samples of size `N`, with `W1` to the
/// exact law from its CDF.
pub fn empirical_rate_experiment(spec: &DistributionSpec, ns: &[usize], trials: usize, seed: u64) -> Result<RateFit> {
    spec.validate()?;
    if trials == 0 {
        return Err(MflabError::Empty("no trials".into()));
    }
    let root = StreamKey::root(seed).child(tags::SAMPLE);
    let mut values = Vec::with_capacity(ns.len());
    let mut stderr = Vec::with_capacity(ns.len());
    for &n in ns {
        let sq: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|trial| -> Result<f64> {
                let s = sample(spec, n, root.child(n as u64).child(trial as u64).value())?;
                Ok(w1_to_law(&s, spec)?.powi(2))
            })
            .collect::<Result<_>>()?;
        let (m, se) = mean_and_stderr(&sq);
        values.push(m);
        stderr.push(se);
    }
    Ok(RateFit::new("mean_w1_squared", ns.to_vec(), values, stderr))
}

fn default_ns() -> Vec<usize> {
    vec![4, 8, 16, 32, 64, 128, 256]
}
fn default_probes() -> usize {
    8
}
fn default_horizon() -> f64 {
    0.2
}
/// Short enough that the `O(1/√N)` fluctuation dominates the `O(1/N)`
/// coefficient bias already at `N = 4`.
fn default_chaos_horizon() -> f64 {
    0.1
}
fn default_c0() -> f64 {
    1.0
}
fn default_scale() -> f64 {
    1.0
}
fn default_particles() -> usize {
    20_000
}
fn yes() -> bool {
    true
}
fn default_trials() -> usize {
    200
}
fn default_p() -> f64 {
    1.5
}
fn default_reference_atoms() -> usize {
    1000
}

/// `|U^N - V|` against `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NashRateConfig {
    pub family: NashFamily,
    #[serde(rename = "N_grid", default = "default_ns")]
    pub n_grid: Vec<usize>,
    /// Probe configurations per `N`.
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    /// Separable family: `G = g(x) + c0·m`.
    #[serde(default)]
    pub g: ScalarFn,
    #[serde(default = "default_c0")]
    pub c0: f64,
    /// Law of the probe coordinates.
    #[serde(default = "DistributionSpec::standard_normal")]
    pub probe_law: DistributionSpec,
    /// Multiplies every probe coordinate.
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub grid: SpaceGrid,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "yes")]
    pub antithetic: bool,
    #[serde(default)]
    pub picard: PicardOptions,
    #[serde(default)]
    pub hjb: HjbOptions,
}

impl NashRateConfig {
    pub fn new(family: NashFamily) -> Self {
        serde_json::from_value(serde_json::json!({ "family": family })).expect("defaults deserialize")
    }

    fn coupling(&self) -> Result<CouplingSpec> {
        match self.family {
            NashFamily::Lq => Ok(CouplingSpec::quadratic()),
            NashFamily::Separable => Ok(CouplingSpec::mean_linear(self.g.clone(), self.c0)),
            NashFamily::Grid2p => Err(MflabError::Family("grid2p has no N-sweep".into())),
        }
    }

    /// The limit problem on the same data.
    pub fn problem(&self) -> Result<MfgProblem> {
        let mut c = MfgConfig::new(self.coupling()?, self.horizon);
        c.grid = self.grid.clone();
        c.particles = self.particles;
        c.antithetic = self.antithetic;
        c.picard = self.picard.clone();
        c.hjb = self.hjb.clone();
        c.build()
    }

    fn oracle(&self, n: usize, problem: &MfgProblem) -> Result<NashOracle> {
        match self.family {
            NashFamily::Lq => nash_lq(n, self.horizon),
            NashFamily::Separable => nash_separable(
                n,
                &self.g,
                self.c0,
                problem.hamiltonian.clone(),
                &problem.space_time(0, problem.steps())?,
                &self.hjb,
            ),
            NashFamily::Grid2p => Err(MflabError::Family("grid2p has no N-sweep".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NashRateReport {
    /// Max over probes of the normalized gap.
    pub fit: RateFit,
    /// Max over probes of the raw gap.
    pub raw: Vec<f64>,
    pub certificates: Vec<ResidualCertificate>,
}

/// For each `N`: `max_p |U^N(0, x_i, m^{N,i}) - V(0, x_i, m^{N,i})| / (1 + |x_i| + ‖x⃗‖)`
/// over random probe configurations `x⃗`, with `‖x⃗‖` the root mean square.
pub fn nash_convergence_experiment(config: &NashRateConfig, seed: u64) -> Result<NashRateReport> {
    let problem = config.problem()?;
    let v = ValueFunction::new(problem.clone(), 1, seed)?.with_memo_capacity(4);
    let root = StreamKey::root(seed).child(tags::PROBES);
    let mut values = Vec::new();
    let mut stderr = Vec::new();
    let mut raw = Vec::new();
    let mut certificates = Vec::new();
    for &n in &config.n_grid {
        if n < 2 {
            return Err(MflabError::Invalid(format!("N = {n} has no other players")));
        }
        let oracle = config.oracle(n, &problem)?;
        certificates.push(oracle.certificate().clone());
        let rows: Vec<(f64, f64)> = (0..config.probes)
            .into_par_iter()
            .map(|p| -> Result<(f64, f64)> {
                let pts = sample(&config.probe_law, n, root.child(n as u64).child(p as u64).value())?;
                let x: Vec<f64> = pts.positions().iter().map(|y| config.scale * y).collect();
                let u_n = oracle.value(0, 0.0, &x);
                let others = equal_weights(x[1..].to_vec())?;
                let lim = v.eval(0.0, x[0], &others)?;
                let rms = (x.iter().map(|y| y * y).sum::<f64>() / n as f64).sqrt();
                let gap = (u_n - lim).abs();
                Ok((gap / (1.0 + x[0].abs() + rms), gap))
            })
            .collect::<Result<_>>()?;
        let normalized: Vec<f64> = rows.iter().map(|r| r.0).collect();
        values.push(normalized.iter().copied().fold(0.0, f64::max));
        stderr.push(mean_and_stderr(&normalized).1);
        raw.push(rows.iter().map(|r| r.1).fold(0.0, f64::max));
    }
    Ok(NashRateReport {
        fit: RateFit::new("max_normalized_gap", config.n_grid.clone(), values, stderr),
        raw,
        certificates,
    })
}

/// Coupled N-player paths against iid limit paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosConfig {
    pub family: NashFamily,
    #[serde(rename = "N_grid", default = "default_ns")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(rename = "T", default = "default_chaos_horizon")]
    pub horizon: f64,
    /// Law of the initial states `ξ^i`.
    #[serde(default = "DistributionSpec::standard_normal")]
    pub xi: DistributionSpec,
    #[serde(default)]
    pub g: ScalarFn,
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default)]
    pub grid: SpaceGrid,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "yes")]
    pub antithetic: bool,
    #[serde(default)]
    pub picard: PicardOptions,
    #[serde(default)]
    pub hjb: HjbOptions,
    /// Atoms of the quantile grid standing in for the law of `ξ`.
    #[serde(default = "default_reference_atoms")]
    pub reference_atoms: usize,
}

impl ChaosConfig {
    pub fn new(family: NashFamily) -> Self {
        serde_json::from_value(serde_json::json!({ "family": family })).expect("defaults deserialize")
    }

    fn rate_config(&self) -> NashRateConfig {
        NashRateConfig {
            family: self.family,
            n_grid: self.n_grid.clone(),
            probes: 1,
            horizon: self.horizon,
            g: self.g.clone(),
            c0: self.c0,
            probe_law: self.xi.clone(),
            scale: 1.0,
            grid: self.grid.clone(),
            particles: self.particles,
            antithetic: self.antithetic,
            picard: self.picard.clone(),
            hjb: self.hjb.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosReport {
    /// `E[sup_t |X^{N,i} - X^i|^p]^{1/p}`.
    pub path: RateFit,
    /// `sup_t E[W1^p(ρ^N_t, ρ_t)]^{1/p}` over the stored levels.
    pub flow: RateFit,
    /// The flow statistic at `t = 0`.
    pub flow_at_zero: Vec<f64>,
}

enum LimitDrift {
    Field(GridField),
    Oracle,
}

/// Simulate the coupled system with the Nash drifts and the iid limit
/// system with the equilibrium drift `∂pH(x, ∂x V)`, sharing the initial
/// draw and every Brownian increment per `(trial, player, step)`.
///
/// For the separable family the limit drift is the oracle's own
/// single-player drift, which is the equilibrium drift of that data.
pub fn chaos_experiment(config: &ChaosConfig, seed: u64) -> Result<ChaosReport> {
    if !(config.p >= 1.0) {
        return Err(MflabError::Invalid(format!("p = {} must be at least 1", config.p)));
    }
    if config.trials < 2 {
        return Err(MflabError::Invalid("chaos needs at least two trials".into()));
    }
    let rc = config.rate_config();
    let problem = rc.problem()?;
    let steps = problem.steps();
    let dt = problem.dt();
    let grid = problem.space_time(0, steps)?;
    let law = config.xi.quantile_grid(config.reference_atoms)?;
    let limit = match config.family {
        NashFamily::Lq => {
            let v = ValueFunction::new(problem.clone(), 1, seed)?;
            let local = v.local(0.0, &law)?.expect("t = 0 is below T");
            LimitDrift::Field(local.field.clone())
        }
        NashFamily::Separable => LimitDrift::Oracle,
        NashFamily::Grid2p => return Err(MflabError::Family("grid2p has no N-sweep".into())),
    };
    let h = problem.hamiltonian.clone();
    let first_oracle = rc.oracle(config.n_grid.first().copied().unwrap_or(2).max(2), &problem)?;
    let limit_drift = |k: usize, x: f64| -> f64 {
        match &limit {
            LimitDrift::Field(f) => h.dp(x, f.grad(k, x)),
            LimitDrift::Oracle => h.dp(x, first_oracle.separable_grad(grid.t(k), x).expect("separable oracle")),
        }
    };
    let mut fo = FlowOptions::new(config.particles, StreamKey::root(seed).child(tags::CONTROLLED).value());
    fo.antithetic = config.antithetic;
    let reference = forward_flow(&law, &limit_drift, &grid, &fo)?;
    let levels = snapshot_levels(steps, fo.snapshots);
    let root = StreamKey::root(seed).child(tags::PLAYERS);
    let p = config.p;
    let sqdt = dt.sqrt();

    let mut path_v = Vec::new();
    let mut path_se = Vec::new();
    let mut flow_v = Vec::new();
    let mut flow_se = Vec::new();
    let mut flow_zero = Vec::new();
    for &n in &config.n_grid {
        let oracle = rc.oracle(n, &problem)?;
        // per trial: mean over players of sup_t |ΔX|^p, and W1^p at each stored level
        let per_trial: Vec<(f64, Vec<f64>)> = (0..config.trials)
            .into_par_iter()
            .map(|trial| -> Result<(f64, Vec<f64>)> {
                let keys: Vec<StreamKey> = (0..n).map(|i| root.child(trial as u64).child(i as u64)).collect();
                let mut streams: Vec<_> = keys.iter().map(|k| k.stream_at(1)).collect();
                let mut xn: Vec<f64> = keys
                    .iter()
                    .map(|k| config.xi.draw(&mut k.child(0).stream()))
                    .collect();
                let mut xl = xn.clone();
                let mut sup = vec![0.0f64; n];
                let mut w1p = Vec::with_capacity(levels.len());
                let mut next_level = 0;
                for k in 0..=steps {
                    if next_level < levels.len() && levels[next_level] == k {
                        let emp = equal_weights(xn.clone())?;
                        let target = &reference.snapshots[next_level].1;
                        w1p.push(w1_distance(&emp, target)?.powf(p));
                        next_level += 1;
                    }
                    if k == steps {
                        break;
                    }
                    let t = grid.t(k);
                    let bn = oracle.drifts(t, &xn);
                    for i in 0..n {
                        let z = sqdt * streams[i].normal();
                        xn[i] += bn[i] * dt + z;
                        xl[i] += limit_drift(k, xl[i]) * dt + z;
                        sup[i] = sup[i].max((xn[i] - xl[i]).abs());
                    }
                }
                let dev = sup.iter().map(|s| s.powf(p)).sum::<f64>() / n as f64;
                Ok((dev, w1p))
            })
            .collect::<Result<_>>()?;
        let devs: Vec<f64> = per_trial.iter().map(|r| r.0).collect();
        let (m, se) = mean_and_stderr(&devs);
        let (stat, stat_se) = root_p(m, se, p);
        path_v.push(stat);
        path_se.push(stat_se);
        let mut best = (0.0, 0.0);
        for l in 0..levels.len() {
            let col: Vec<f64> = per_trial.iter().map(|r| r.1[l]).collect();
            let (m, se) = mean_and_stderr(&col);
            let (s, s_se) = root_p(m, se, p);
            if l == 0 {
                flow_zero.push(s);
            }
            if s > best.0 {
                best = (s, s_se);
            }
        }
        flow_v.push(best.0);
        flow_se.push(best.1);
    }
    Ok(ChaosReport {
        path: RateFit::new("path_deviation", config.n_grid.clone(), path_v, path_se),
        flow: RateFit::new("flow_w1", config.n_grid.clone(), flow_v, flow_se),
        flow_at_zero: flow_zero,
    })
}

/// `E^{1/p}` and its delta-method standard error.
fn root_p(mean: f64, se: f64, p: f64) -> (f64, f64) {
    if mean <= 0.0 {
        return (0.0, 0.0);
    }
    let s = mean.powf(1.0 / p);
    (s, s * se / (p * mean))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirac_has_no_sampling_error() {
        let r = empirical_rate_experiment(&DistributionSpec::Dirac { x: 1.0 }, &[4, 8, 16, 32], 5, 1).unwrap();
        assert!(r.values.iter().all(|&v| v == 0.0));
        assert!(r.fit.is_none());
    }

    #[test]
    fn rate_fit_output() {
        let r = RateFit::new("s", vec![1, 2, 4, 8], vec![1.0, 0.5, 0.25, 0.125], vec![0.0; 4]);
        assert!((r.slope().unwrap() + 1.0).abs() < 1e-12);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("N,statistic,stderr\n1,1.0,0.0\n"));
        assert!(RateFit::new("s", vec![1, 2, 4], vec![1.0; 3], vec![0.0; 3]).fit.is_none());
    }
}
