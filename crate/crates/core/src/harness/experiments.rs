//! Registered experiments: each resolves its parameter block, runs the
//! owning module and returns rows, a JSON summary and threshold checks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::table::{Cell, Check};
use crate::error::{MflabError, Result};
use crate::harness::fit::ols_loglog;
use crate::hjb::{CouplingSpec, HjbOptions, ScalarFn, Term};
use crate::lions::{gateaux_probe, lions_derivative_rep};
use crate::measures::{w1_distance, DistributionSpec, EmpiricalMeasure, Functional};
use crate::mfg::{
    good_solution_consistency, monotonicity_pairing, regularity_probes, stability_curve, value_pairing, MfgConfig,
    MfgProblem, PicardOptions, ProbeSet, SpaceGrid, ValueFunction,
};
use crate::mollifier::{
    mollify_estimate, pointwise_gradient_gap, w2_blowup_probe, x_mollified_pairing, DistanceTo, McEstimate,
    MollifierParams, Moment, ScalarMeasureFunctional, TestProfile, XKernel,
};
use crate::nash::{
    chaos_experiment, empirical_rate_experiment, nash_convergence_experiment, nash_grid2p, nash_lq, ChaosConfig,
    Grid2pOptions, NashFamily, NashRateConfig, RateFit,
};
use crate::quadrature::normal_expectation;
use crate::rng::{tags, StreamKey};

/// What an experiment hands back to the runner.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Value,
    pub checks: Vec<Check>,
    /// Extra files written next to the table.
    pub artifacts: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    fn new(columns: &[&str]) -> Self {
        Outcome {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Default::default()
        }
    }

    fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check::new(name, passed, detail));
    }
}

fn one() -> f64 {
    1.0
}
fn short_horizon() -> f64 {
    0.2
}
fn particles() -> usize {
    20_000
}
fn yes() -> bool {
    true
}
fn ns_4_8_16() -> Vec<usize> {
    vec![4, 8, 16]
}
fn mc_default() -> usize {
    256
}
fn normal() -> DistributionSpec {
    DistributionSpec::standard_normal()
}

fn problem(
    coupling: CouplingSpec,
    horizon: f64,
    grid: &SpaceGrid,
    particles: usize,
    antithetic: bool,
    picard: &PicardOptions,
    hjb: &HjbOptions,
) -> Result<MfgProblem> {
    let mut c = MfgConfig::new(coupling, horizon);
    c.grid = grid.clone();
    c.particles = particles;
    c.antithetic = antithetic;
    c.picard = picard.clone();
    c.hjb = hjb.clone();
    c.build()
}

fn require_sorted_positive(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() || xs[0] <= 0.0 || xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MflabError::Config {
            path: name.into(),
            msg: "expected a nonempty increasing list of positive values".into(),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------- nonsmooth value

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonclassicalParams {
    #[serde(rename = "T", default = "one")]
    pub horizon: f64,
    #[serde(default)]
    pub grid: SpaceGrid,
    #[serde(default = "particles")]
    pub particles: usize,
    /// Atoms of the quantile grid standing in for `N(0, 1)`.
    #[serde(default = "particles")]
    pub atoms: usize,
    #[serde(default)]
    pub x: f64,
    /// Positive steps; the probe uses `±eps`.
    #[serde(default = "nonclassical_eps")]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub picard: PicardOptions,
    #[serde(default)]
    pub hjb: HjbOptions,
}

fn nonclassical_eps() -> Vec<f64> {
    (1..=10).map(|k| 0.025 * k as f64).collect()
}

pub fn nonclassical(p: &NonclassicalParams, seed: u64) -> Result<Outcome> {
    require_sorted_positive("counterexample.eps", &p.eps)?;
    let v = ValueFunction::new(
        problem(CouplingSpec::abs_deviation(), p.horizon, &p.grid, p.particles, false, &p.picard, &p.hjb)?,
        1,
        seed,
    )?;
    let at_dirac = v.eval(0.0, p.x, &EmpiricalMeasure::dirac(0.0))?;
    let exact = (2.0 / PI.sqrt() - (2.0 * p.horizon / PI).sqrt()).abs();
    let mu = normal().quantile_grid(p.atoms)?;
    let base = v.eval(0.0, p.x, &mu)?;
    let m = p.eps.len();
    let grid: Vec<f64> = p.eps.iter().rev().map(|e| -e).chain(p.eps.iter().copied()).collect();
    let probe = gateaux_probe(&v, p.x, &mu, &grid)?;
    let mut out = Outcome::new(&["eps", "right_quotient", "left_quotient"]);
    for (k, &e) in p.eps.iter().enumerate() {
        let right = (probe.values[m + k] - base) / e;
        let left = (probe.values[m - 1 - k] - base) / -e;
        out.row(vec![e.into(), right.into(), left.into()]);
    }
    let target = 1.0 / PI.sqrt();
    out.summary = json!({
        "value_at_dirac": at_dirac,
        "value_at_dirac_exact": exact,
        "value_at_normal": base,
        "right_slope": probe.right,
        "left_slope": probe.left,
        "target_slope": target,
    });
    out.check(
        "value_at_dirac",
        (at_dirac - exact).abs() <= 0.01,
        format!("V(0,{},δ0) = {at_dirac:.6}, exact {exact:.6}", p.x),
    );
    out.check(
        "right_slope",
        (probe.right - target).abs() <= 0.05,
        format!("{:.4} vs {target:.4}", probe.right),
    );
    out.check(
        "left_slope",
        (probe.left + target).abs() <= 0.05,
        format!("{:.4} vs {:.4}", probe.left, -target),
    );
    Ok(out)
}

// ---------------------------------------------------------------- comparison

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonParams {
    #[serde(rename = "T", default = "one")]
    pub horizon: f64,
    #[serde(default)]
    pub grid: SpaceGrid,
    #[serde(default = "particles")]
    pub particles: usize,
    /// Sweep of the mean weight `C0`, increasing.
    #[serde(default = "comparison_c0")]
    pub c0: Vec<f64>,
    #[serde(default = "hermite_nodes")]
    pub quadrature_nodes: usize,
    #[serde(default)]
    pub picard: PicardOptions,
    #[serde(default)]
    pub hjb: HjbOptions,
}

fn comparison_c0() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0, 34.0, 50.0]
}
fn hermite_nodes() -> usize {
    64
}

/// `G_1 = C0·m`, `G_2 = 1/(1+e^x) + C0·m`: `G_1 < G_2` but `V_2 < V_1` at
/// `(0, 0, δ_0)` once `C0` is large.
pub fn comparison(p: &ComparisonParams, seed: u64) -> Result<Outcome> {
    require_sorted_positive("counterexample.c0", &p.c0)?;
    let make = |g: ScalarFn, c0: f64| -> Result<ValueFunction> {
        let pr = problem(CouplingSpec::mean_linear(g, c0), p.horizon, &p.grid, p.particles, true, &p.picard, &p.hjb)?;
        ValueFunction::new(pr, 1, seed)
    };
    let delta = EmpiricalMeasure::dirac(0.0);
    let u2 = make(ScalarFn::Logistic, 0.0)?.eval(0.0, 0.0, &delta)?;
    let sd = p.horizon.sqrt();
    let oracle = normal_expectation(p.quadrature_nodes, |z| ScalarFn::Logistic.value(sd * z).exp()).ln();
    let mut out = Outcome::new(&["C0", "V1", "V2"]);
    let mut smallest = None;
    for &c0 in &p.c0 {
        let v1 = make(ScalarFn::Zero, c0)?.eval(0.0, 0.0, &delta)?;
        let v2 = make(ScalarFn::Logistic, c0)?.eval(0.0, 0.0, &delta)?;
        if v2 < v1 && smallest.is_none() {
            smallest = Some(c0);
        }
        out.row(vec![c0.into(), v1.into(), v2.into()]);
    }
    out.summary = json!({
        "u2_solver": u2,
        "u2_oracle": oracle,
        "smallest_c0_with_v2_below_v1": smallest,
    });
    out.check("u2", (u2 - oracle).abs() <= 1e-3, format!("u2(0,0) = {u2:.6}, quadrature {oracle:.6}"));
    out.check(
        "comparison_fails",
        smallest.is_some_and(|c| c <= 50.0),
        format!("smallest C0 with V2 < V1: {smallest:?}"),
    );
    Ok(out)
}

// ---------------------------------------------------------------- mollifier counterexamples

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct W2BlowupParams {
    #[serde(default = "ns_4_8_16")]
    pub m: Vec<usize>,
    #[serde(default = "mc_default")]
    pub mc_samples: usize,
}

pub fn w2_blowup(p: &W2BlowupParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new(&["m", "ratio_w2", "ratio_w1"]);
    let mut ratios = Vec::new();
    for &m in &p.m {
        let r = w2_blowup_probe(m, p.mc_samples, seed)?;
        ratios.push((m, r.ratio_w2));
        out.row(vec![m.into(), r.ratio_w2.into(), r.ratio_w1.into()]);
    }
    let find = |m: usize| ratios.iter().find(|r| r.0 == m).map(|r| r.1);
    let growth = find(16).zip(find(4)).map(|(a, b)| a / b);
    let increasing = ratios.windows(2).all(|w| w[1].1 > w[0].1);
    out.summary = json!({ "growth_16_over_4": growth, "sqrt_scaling": 2.0, "increasing": increasing });
    out.check(
        "sqrt_m_growth",
        increasing && growth.is_some_and(|g| (1.4..=2.6).contains(&g)),
        format!("ratio(16)/ratio(4) = {growth:?}, increasing {increasing}"),
    );
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientGapParams {
    #[serde(default = "gap_ns")]
    pub n: Vec<usize>,
}

fn gap_ns() -> Vec<usize> {
    vec![4, 8, 16, 32, 64]
}

/// `g(x) = e·x·bump(x/2)` with `g'(0) = 1`, at the lattice point `0` and
/// at the cell midpoint `1/(2n)`.
pub fn gradient_gap(p: &GradientGapParams, _seed: u64) -> Result<Outcome> {
    let g = TestProfile::odd_bump();
    let mut out = Outcome::new(&["n", "gap_at_lattice_point", "gap_at_midpoint"]);
    let mut worst = f64::INFINITY;
    for &n in &p.n {
        let at0 = pointwise_gradient_gap(&g, n, 0.0)?;
        let mid = pointwise_gradient_gap(&g, n, 0.5 / n as f64)?;
        worst = worst.min(at0);
        out.row(vec![n.into(), at0.into(), mid.into()]);
    }
    out.summary = json!({ "min_gap_at_lattice_point": worst });
    out.check("gap_at_lattice_point", worst >= 1.0, format!("min gap {worst:.6}"));
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifiedMonotoneParams {
    #[serde(default = "eight")]
    pub pairs: usize,
    #[serde(default = "sixteen")]
    pub atoms: usize,
    #[serde(default = "half")]
    pub eps: f64,
    /// Centre and half-width of the x-kernel; a nonzero mean is what
    /// breaks monotonicity.
    #[serde(default = "one")]
    pub kernel_center: f64,
    #[serde(default = "half")]
    pub kernel_width: f64,
}

fn eight() -> usize {
    8
}
fn sixteen() -> usize {
    16
}
fn half() -> f64 {
    0.5
}

pub fn mollified_monotone(p: &MollifiedMonotoneParams, seed: u64) -> Result<Outcome> {
    let kernel = XKernel::shifted(p.kernel_center, p.kernel_width);
    let probes = ProbeSet::random(1, p.pairs, p.atoms, seed)?;
    let mut out = Outcome::new(&["pair", "pairing", "formula", "abs_err"]);
    let mut worst: f64 = 0.0;
    let mut positive = 0;
    for (k, (m1, m2)) in probes.pairs.iter().enumerate() {
        let (pairing, formula) = x_mollified_pairing(m1, m2, p.eps, &kernel)?;
        let err = (pairing - formula).abs();
        worst = worst.max(err / formula.abs().max(1.0));
        positive += usize::from(pairing > 0.0);
        out.row(vec![k.into(), pairing.into(), formula.into(), err.into()]);
    }
    out.summary = json!({ "kernel_mean": kernel.mean(), "positive_pairings": positive, "max_rel_err": worst });
    out.check("pairing_formula", worst <= 1e-12, format!("max relative error {worst:e}"));
    Ok(out)
}

// ---------------------------------------------------------------- mollifier

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifierSuiteParams {
    #[serde(default = "ns_4_8_16")]
    pub n: Vec<usize>,
    /// Size of the compact family for the uniform error.
    #[serde(default = "twelve")]
    pub family: usize,
    /// Random pairs for the Lipschitz ratio.
    #[serde(default = "fifty")]
    pub pairs: usize,
    #[serde(default = "thirty_two")]
    pub atoms: usize,
    #[serde(default = "mc_default")]
    pub mc_samples: usize,
}

fn twelve() -> usize {
    12
}
fn fifty() -> usize {
    50
}
fn thirty_two() -> usize {
    32
}

/// `U(μ) = W1(μ, N(0,1))`, 1-Lipschitz under `W1`: uniform error over a
/// compact Gaussian family and the Lipschitz ratio of `U_n` over random
/// pairs.
pub fn mollifier_suite(p: &MollifierSuiteParams, seed: u64) -> Result<Outcome> {
    let reference = normal().quantile_grid(64)?;
    let u = DistanceTo { reference, order: 1 };
    let mut s = StreamKey::root(seed).child(tags::PROBES).stream();
    let mut draw = |mean_r: f64| -> Result<EmpiricalMeasure> {
        let mean = mean_r * (2.0 * s.uniform() - 1.0);
        let var = 0.25 + 0.75 * s.uniform();
        DistributionSpec::Gaussian { mean, var }.quantile_grid(p.atoms)
    };
    let family: Vec<EmpiricalMeasure> = (0..p.family).map(|_| draw(0.5)).collect::<Result<_>>()?;
    let pairs: Vec<(EmpiricalMeasure, EmpiricalMeasure)> =
        (0..p.pairs).map(|_| Ok((draw(1.0)?, draw(1.0)?))).collect::<Result<_>>()?;
    let exact: Vec<f64> = family.iter().map(|m| u.eval(m)).collect::<Result<_>>()?;
    let mut out = Outcome::new(&["n", "uniform_error", "stderr", "lipschitz_max"]);
    let mut errs = Vec::new();
    let mut lips = Vec::new();
    for &n in &p.n {
        let params = MollifierParams::new(n, p.mc_samples, 3, seed)?;
        let mut worst = (0.0f64, 0.0f64);
        for (m, e) in family.iter().zip(&exact) {
            let est = mollify_estimate(&u, m, &params)?;
            let err = (est.value - e).abs();
            if err > worst.0 {
                worst = (err, est.stderr);
            }
        }
        let mut lip: f64 = 0.0;
        for (a, b) in &pairs {
            let ua = mollify_estimate(&u, a, &params)?.value;
            let ub = mollify_estimate(&u, b, &params)?.value;
            lip = lip.max((ua - ub).abs() / w1_distance(a, b)?);
        }
        errs.push(worst);
        lips.push(lip);
        out.row(vec![n.into(), worst.0.into(), worst.1.into(), lip.into()]);
    }
    let monotone = errs
        .windows(2)
        .all(|w| w[1].0 <= w[0].0 + 2.0 * w[0].1.hypot(w[1].1));
    let lip_spread = lips.iter().copied().fold(0.0, f64::max) / lips.iter().copied().fold(f64::INFINITY, f64::min);
    out.summary = json!({ "uniform_error_monotone": monotone, "lipschitz_spread": lip_spread });
    out.check(
        "uniform_error_decreases",
        monotone && errs.last().map(|l| l.0) < errs.first().map(|f| f.0),
        format!("errors {:?}", errs.iter().map(|e| e.0).collect::<Vec<_>>()),
    );
    out.check(
        "lipschitz_bounded",
        lip_spread <= 1.5,
        format!("per-n maxima {lips:?}, max/min {lip_spread:.4}"),
    );
    Ok(out)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalChoice {
    Mean,
    SecondMoment,
    AbsDeviation,
    /// `W1(μ, N(0,1))`.
    W1ToNormal,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifyParams {
    #[serde(default = "normal")]
    pub measure: DistributionSpec,
    #[serde(default = "sixty_four")]
    pub atoms: usize,
    /// Measure CSV (`x,weight`) used instead of `measure` when set.
    #[serde(default)]
    pub measure_csv: Option<String>,
    #[serde(default = "w1_choice")]
    pub functional: FunctionalChoice,
    #[serde(default = "ns_4_8_16")]
    pub n: Vec<usize>,
    #[serde(default = "mc_default")]
    pub mc_samples: usize,
}

fn sixty_four() -> usize {
    64
}
fn w1_choice() -> FunctionalChoice {
    FunctionalChoice::W1ToNormal
}

/// `U_n(μ)` with its standard error for each `n`.
pub fn mollify_table(p: &MollifyParams, seed: u64) -> Result<Outcome> {
    let mu = match &p.measure_csv {
        Some(path) => EmpiricalMeasure::load_csv(std::path::Path::new(path))?,
        None => p.measure.quantile_grid(p.atoms)?,
    };
    let u: Box<dyn ScalarMeasureFunctional> = match p.functional {
        FunctionalChoice::Mean => Box::new(Moment(Functional::Mean)),
        FunctionalChoice::SecondMoment => Box::new(Moment(Functional::SecondMoment)),
        FunctionalChoice::AbsDeviation => Box::new(Moment(Functional::AbsDeviation)),
        FunctionalChoice::W1ToNormal => Box::new(DistanceTo {
            reference: normal().quantile_grid(64)?,
            order: 1,
        }),
    };
    let exact = u.eval(&mu)?;
    let mut out = Outcome::new(&["n", "value", "stderr"]);
    for &n in &p.n {
        let McEstimate { value, stderr } = mollify_estimate(u.as_ref(), &mu, &MollifierParams::new(n, p.mc_samples, 3, seed)?)?;
        out.row(vec![n.into(), value.into(), stderr.into()]);
    }
    out.summary = json!({ "unmollified": exact, "atoms": mu.len() });
    Ok(out)
}

// ---------------------------------------------------------------- mfg

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueParams {
    #[serde(default = "quadratic")]
    pub coupling: CouplingSpec,
    #[serde(rename = "T", default = "short_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub grid: SpaceGrid,
    #[serde(default = "particles")]
    pub particles: usize,
    #[serde(default = "yes")]
    pub antithetic: bool,
    #[serde(default = "one_usize")]
    pub partitions: usize,
    #[serde(default = "normal")]
    pub measure: DistributionSpec,
    #[serde(default = "sixty_four")]
    pub atoms: usize,
    /// Output points in `x`.
    #[serde(default = "value_xs")]
    pub xs: Vec<f64>,
    /// Strides of the field dump in `t` and `x`.
    #[serde(default = "stride")]
    pub field_stride: [usize; 2],
    #[serde(default)]
    pub picard: PicardOptions,
    #[serde(default)]
    pub hjb: HjbOptions,
}

fn quadratic() -> CouplingSpec {
    CouplingSpec::quadratic()
}
fn one_usize() -> usize {
    1
}
fn value_xs() -> Vec<f64> {
    (0..=16).map(|k| -2.0 + 0.25 * k as f64).collect()
}
fn stride() -> [usize; 2] {
    [4, 4]
}

/// `V(0, x, μ)` and `∂x V` on a set of points, plus the local field as
/// `t,x,u,du` CSV.
pub fn value_table(p: &ValueParams, seed: u64) -> Result<Outcome> {
    let pr = problem(p.coupling.clone(), p.horizon, &p.grid, p.particles, p.antithetic, &p.picard, &p.hjb)?;
    let v = ValueFunction::new(pr, p.partitions, seed)?;
    let mu = p.measure.quantile_grid(p.atoms)?;
    let local = v.local(0.0, &mu)?.expect("t = 0 is below T");
    let mut out = Outcome::new(&["x", "value", "grad"]);
    for &x in &p.xs {
        out.row(vec![x.into(), local.value(x).into(), local.grad(x).into()]);
    }
    let mut buf = Vec::new();
    local.field.write_csv(&mut buf, p.field_stride[0].max(1), p.field_stride[1].max(1))?;
    out.artifacts.push(("field.csv".into(), buf));
    let terminal = local.flow.terminal().stats()?;
    out.summary = json!({
        "picard_iterations": local.report.iterations,
        "picard_gaps": local.report.flow_gaps,
        "terminal_mean": terminal.mean,
        "terminal_second_moment": terminal.second_moment,
        "partition": v.partition(),
    });
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonotonicityParams {
    #[serde(rename = "T", default = "short_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub grid: SpaceGrid,
    #[serde(default = "particles")]
    pub particles: usize,
    #[serde(default = "yes")]
    pub antithetic: bool,
    #[serde(default = "eight")]
    pub samples: usize,
    #[serde(default = "sixty_four")]
    pub atoms: usize,
    /// Independent particle seeds per sample for the standard error.
    #[serde(default = "four")]
    pub replicas: usize,
    #[serde(default)]
    pub picard: PicardOptions,
    #[serde(default)]
    pub hjb: HjbOptions,
}

fn four() -> usize {
    4
}

/// For `G = (x - m)²`: the data pairing identity `-2Δm²` and the pairing of
/// `V(t, ·, ·)` at random `(t, μ1, μ2)`, whose closed form is `-2a(t)Δm²`
/// with `a = 1/(1 - 2(T - t))`.
pub fn monotonicity(p: &MonotonicityParams, seed: u64) -> Result<Outcome> {
    let pr = problem(CouplingSpec::quadratic(), p.horizon, &p.grid, p.particles, p.antithetic, &p.picard, &p.hjb)?;
    let probes = ProbeSet::random(1, p.samples, p.atoms, seed)?;
    let replicas: Vec<ValueFunction> = (0..p.replicas.max(2))
        .map(|r| ValueFunction::new(pr.clone(), 1, StreamKey::root(seed).child(r as u64).value()))
        .collect::<Result<_>>()?;
    let g = Term::Quadratic { scale: 1.0 };
    let mut ts = StreamKey::root(seed).child(tags::SAMPLE).stream();
    let mut out = Outcome::new(&["t", "pairing", "stderr", "closed_form", "data_pairing", "data_identity_err"]);
    let mut worst_identity: f64 = 0.0;
    let mut worst_excess = f64::NEG_INFINITY;
    for (m1, m2) in &probes.pairs {
        let t = pr.time((ts.uniform() * pr.steps() as f64).floor() as usize);
        let vals: Vec<f64> = replicas
            .iter()
            .map(|v| value_pairing(v, t, m1, m2))
            .collect::<Result<_>>()?;
        let est = McEstimate::from_samples(&vals);
        let dm = m1.stats()?.mean - m2.stats()?.mean;
        let a = 1.0 / (1.0 - 2.0 * (p.horizon - t));
        let data = monotonicity_pairing(&|x, m| g.eval(x[0], m), m1, m2)?;
        let identity = (data + 2.0 * dm * dm).abs();
        worst_identity = worst_identity.max(identity / (dm * dm).max(1.0));
        worst_excess = worst_excess.max(est.value - 3.0 * est.stderr);
        out.row(vec![
            t.into(),
            est.value.into(),
            est.stderr.into(),
            (-2.0 * a * dm * dm).into(),
            data.into(),
            identity.into(),
        ]);
    }
    out.summary = json!({ "max_identity_rel_err": worst_identity, "max_pairing_minus_3se": worst_excess });
    out.check(
        "data_identity",
        worst_identity <= 1e-13,
        format!("max relative error {worst_identity:e}"),
    );
    out.check(
        "value_pairing",
        worst_excess <= 0.0,
        format!("max of pairing - 3 stderr: {worst_excess:e}"),
    );
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityParams {
    #[serde(default = "quadratic")]
    pub coupling: CouplingSpec,
    #[serde(rename = "T", default = "short_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub grid: SpaceGrid,
    #[serde(default = "particles")]
    pub particles: usize,
    #[serde(default = "yes")]
    pub antithetic: bool,
    /// Partition sizes; each ratio is compared between consecutive entries.
    #[serde(rename = "K", default = "regularity_k")]
    pub partitions: Vec<usize>,
    #[serde(default = "sixteen")]
    pub probe_points: usize,
    #[serde(default = "eight")]
    pub pairs: usize,
    #[serde(default = "sixty_four")]
    pub atoms: usize,
    #[serde(default = "regularity_times")]
    pub times: Vec<f64>,
    #[serde(default)]
    pub picard: PicardOptions,
    #[serde(default)]
    pub hjb: HjbOptions,
}

fn regularity_k() -> Vec<usize> {
    vec![2, 4]
}
fn regularity_times() -> Vec<f64> {
    vec![0.05, 0.1]
}

pub fn regularity(p: &RegularityParams, seed: u64) -> Result<Outcome> {
    let pr = problem(p.coupling.clone(), p.horizon, &p.grid, p.particles, p.antithetic, &p.picard, &p.hjb)?;
    let probes = ProbeSet::random(p.probe_points, p.pairs, p.atoms, seed)?;
    let mut out = Outcome::new(&["K", "lip_x", "lip_mu", "holder_t"]);
    let mut reports = Vec::new();
    for &k in &p.partitions {
        let v = ValueFunction::new(pr.clone(), k, seed)?;
        let r = regularity_probes(&v, &probes, &p.times)?;
        out.row(vec![k.into(), r.lip_x.into(), r.lip_mu.into(), r.holder_t.into()]);
        reports.push(r);
    }
    let mut worst: f64 = 0.0;
    for w in reports.windows(2) {
        for (a, b) in [(w[0].lip_x, w[1].lip_x), (w[0].lip_mu, w[1].lip_mu), (w[0].holder_t, w[1].holder_t)] {
            worst = worst.max((b - a).abs() / a.abs().max(1e-12));
        }
    }
    let finite = reports
        .iter()
        .all(|r| r.lip_x.is_finite() && r.lip_mu.is_finite() && r.holder_t.is_finite());
    out.summary = json!({ "max_relative_change": worst });
    out.check(
        "ratios_stable",
        finite && worst <= 0.1,
        format!("largest relative change under refinement {worst:.4}"),
    );
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityParams {
    #[serde(default = "quadratic")]
    pub coupling: CouplingSpec,
    #[serde(rename = "T", default = "short_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub grid: SpaceGrid,
    #[serde(default = "particles")]
    pub particles: usize,
    #[serde(default = "yes")]
    pub antithetic: bool,
    #[serde(rename = "K", default = "one_usize")]
    pub partitions: usize,
    #[serde(default = "stability_eps")]
    pub eps: Vec<f64>,
    #[serde(default = "stability_direction")]
    pub direction: ScalarFn,
    #[serde(default = "sixteen")]
    pub probe_points: usize,
    #[serde(default = "eight")]
    pub pairs: usize,
    #[serde(default = "sixty_four")]
    pub atoms: usize,
    #[serde(default)]
    pub picard: PicardOptions,
    #[serde(default)]
    pub hjb: HjbOptions,
}

fn stability_eps() -> Vec<f64> {
    vec![1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
}
fn stability_direction() -> ScalarFn {
    ScalarFn::Sine {
        amplitude: 1.0,
        frequency: 1.0,
    }
}

pub fn stability(p: &StabilityParams, seed: u64) -> Result<Outcome> {
    require_sorted_positive("mfg.eps", &p.eps)?;
    let pr = problem(p.coupling.clone(), p.horizon, &p.grid, p.particles, p.antithetic, &p.picard, &p.hjb)?;
    let probes = ProbeSet::random(p.probe_points, p.pairs, p.atoms, seed)?;
    let r = stability_curve(&pr, p.partitions, p.direction.clone(), &p.eps, &probes, seed)?;
    let mut out = Outcome::new(&["eps", "sup_gap", "envelope"]);
    for (e, g) in r.eps.iter().zip(&r.sup_gap) {
        out.row(vec![(*e).into(), (*g).into(), (r.envelope_c * (e.powf(0.25) + e)).into()]);
    }
    out.summary = json!({ "envelope_c": r.envelope_c, "slope": r.slope, "under_envelope": r.under_envelope });
    out.check(
        "under_envelope",
        r.under_envelope,
        format!("C = {:.4}, gaps {:?}", r.envelope_c, r.sup_gap),
    );
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodSolutionParams {
    #[serde(default = "abs_deviation")]
    pub coupling: CouplingSpec,
    /// Smooth data for the first-order comparison.
    #[serde(default = "smooth_coupling")]
    pub smooth_coupling: CouplingSpec,
    #[serde(rename = "T", default = "one")]
    pub horizon: f64,
    #[serde(default)]
    pub grid: SpaceGrid,
    #[serde(default = "particles")]
    pub particles: usize,
    #[serde(default = "ns_4_8_16")]
    pub schedule: Vec<usize>,
    #[serde(default = "good_mc")]
    pub mc_samples: usize,
    #[serde(default = "good_xs")]
    pub xs: Vec<f64>,
    #[serde(default = "good_measures")]
    pub measures: Vec<DistributionSpec>,
    #[serde(default = "sixty_four")]
    pub atoms: usize,
    #[serde(default)]
    pub picard: PicardOptions,
    #[serde(default)]
    pub hjb: HjbOptions,
}

fn abs_deviation() -> CouplingSpec {
    CouplingSpec::abs_deviation()
}
fn smooth_coupling() -> CouplingSpec {
    CouplingSpec::mean_linear(
        ScalarFn::Sine {
            amplitude: 1.0,
            frequency: 1.0,
        },
        1.0,
    )
}
fn good_mc() -> usize {
    64
}
fn good_xs() -> Vec<f64> {
    vec![-1.0, 0.0, 1.0]
}
fn good_measures() -> Vec<DistributionSpec> {
    vec![
        DistributionSpec::Dirac { x: 0.0 },
        normal(),
        DistributionSpec::Gaussian { mean: 0.5, var: 0.25 },
    ]
}

pub fn good_solution(p: &GoodSolutionParams, seed: u64) -> Result<Outcome> {
    let measures: Vec<EmpiricalMeasure> = p
        .measures
        .iter()
        .map(|m| m.quantile_grid(if matches!(m, DistributionSpec::Dirac { .. }) { 1 } else { p.atoms }))
        .collect::<Result<_>>()?;
    let run = |c: &CouplingSpec| -> Result<_> {
        let pr = problem(c.clone(), p.horizon, &p.grid, p.particles, false, &p.picard, &p.hjb)?;
        good_solution_consistency(&pr, &p.schedule, p.mc_samples, &p.xs, &measures, seed)
    };
    let rough = run(&p.coupling)?;
    let smooth = run(&p.smooth_coupling)?;
    let mut out = Outcome::new(&["n", "gap", "stderr", "smooth_gap", "smooth_stderr"]);
    for (a, b) in rough.rows.iter().zip(&smooth.rows) {
        out.row(vec![a.n.into(), a.max_gap.into(), a.stderr.into(), b.max_gap.into(), b.stderr.into()]);
    }
    let ns: Vec<f64> = smooth.rows.iter().map(|r| r.n as f64).collect();
    let gaps: Vec<f64> = smooth.rows.iter().map(|r| r.max_gap).collect();
    let slope = ols_loglog(&ns, &gaps).map(|f| f.slope).ok();
    let monotone = rough.is_monotone(2.0);
    out.summary = json!({ "monotone": monotone, "smooth_slope": slope });
    out.check(
        "nonsmooth_monotone",
        monotone,
        format!("gaps {:?}", rough.rows.iter().map(|r| r.max_gap).collect::<Vec<_>>()),
    );
    out.check(
        "smooth_first_order",
        slope.is_some_and(|s| s <= -0.85),
        format!("smooth gaps {gaps:?}, slope {slope:?}"),
    );
    Ok(out)
}

// ---------------------------------------------------------------- lions

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivativeParams {
    #[serde(rename = "T", default = "short_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub grid: SpaceGrid,
    #[serde(default = "particles")]
    pub particles: usize,
    /// Mean weight of the mean-linear family.
    #[serde(default = "derivative_c")]
    pub c: f64,
    #[serde(default = "normal")]
    pub measure: DistributionSpec,
    #[serde(default = "eight")]
    pub atoms: usize,
    #[serde(default = "derivative_x")]
    pub x: f64,
    #[serde(default = "derivative_probe_atoms")]
    pub probe_atoms: Vec<usize>,
    #[serde(default)]
    pub picard: PicardOptions,
    #[serde(default)]
    pub hjb: HjbOptions,
}

fn derivative_c() -> f64 {
    1.5
}
fn derivative_x() -> f64 {
    0.3
}
fn derivative_probe_atoms() -> Vec<usize> {
    vec![0, 3, 7]
}

/// Tangent representation of `∂μ V(0, x, μ, x̃)` against atom-shift
/// finite differences, for `G = c·m` and `G = (x - m)²`.
pub fn derivative_check(p: &DerivativeParams, seed: u64) -> Result<Outcome> {
    let mu = p.measure.quantile_grid(p.atoms)?;
    let mut out = Outcome::new(&["family", "atom", "value", "oracle", "rel_err"]);
    let mut linear_err: f64 = 0.0;
    let mut linear_fd: f64 = 0.0;
    let mut quad_err: f64 = 0.0;
    for (name, coupling) in [
        ("mean_linear", CouplingSpec::mean_linear(ScalarFn::Zero, p.c)),
        ("quadratic", CouplingSpec::quadratic()),
    ] {
        let pr = problem(coupling, p.horizon, &p.grid, p.particles, true, &p.picard, &p.hjb)?;
        let v = ValueFunction::new(pr, 1, seed)?;
        for &atom in &p.probe_atoms {
            let r = lions_derivative_rep(&v, p.x, &mu, atom)?;
            if name == "mean_linear" {
                linear_err = linear_err.max((r.value - p.c).abs());
                linear_fd = linear_fd.max((r.oracle - p.c).abs());
            } else {
                quad_err = quad_err.max(r.rel_err);
            }
            out.row(vec![name.into(), atom.into(), r.value.into(), r.oracle.into(), r.rel_err.into()]);
        }
    }
    out.summary = json!({ "mean_linear_err": linear_err, "mean_linear_fd_err": linear_fd, "quadratic_rel_err": quad_err });
    out.check(
        "mean_linear_exact",
        linear_err <= 1e-10 && linear_fd <= 1e-3,
        format!("|rep - c| = {linear_err:e}, |fd - c| = {linear_fd:e}"),
    );
    out.check("quadratic_rel_err", quad_err <= 0.02, format!("max rel_err {quad_err:.4}"));
    Ok(out)
}

// ---------------------------------------------------------------- nash

fn rate_rows(out: &mut Outcome, fit: &RateFit) {
    for ((n, v), s) in fit.ns.iter().zip(&fit.values).zip(&fit.stderr) {
        out.row(vec![(*n).into(), (*v).into(), (*s).into()]);
    }
}

fn slope_check(out: &mut Outcome, name: &str, fit: &RateFit, target: f64, tol: f64) {
    let s = fit.slope();
    out.check(
        name,
        s.is_some_and(|s| (s - target).abs() <= tol),
        format!("slope {s:?}, target {target} ± {tol}"),
    );
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpiricalRateParams {
    #[serde(default = "normal")]
    pub law: DistributionSpec,
    #[serde(rename = "N_grid", default = "empirical_ns")]
    pub n_grid: Vec<usize>,
    #[serde(default = "two_hundred")]
    pub trials: usize,
}

fn empirical_ns() -> Vec<usize> {
    (4..=12).map(|k| 1usize << k).collect()
}
fn two_hundred() -> usize {
    200
}

pub fn empirical_rate(p: &EmpiricalRateParams, seed: u64) -> Result<Outcome> {
    let fit = empirical_rate_experiment(&p.law, &p.n_grid, p.trials, seed)?;
    let mut out = Outcome::new(&["N", "statistic", "stderr"]);
    rate_rows(&mut out, &fit);
    out.summary = fit.summary();
    slope_check(&mut out, "slope", &fit, -1.0, 0.15);
    Ok(out)
}

pub fn nash_rate(p: &NashRateConfig, seed: u64) -> Result<Outcome> {
    let rep = nash_convergence_experiment(p, seed)?;
    let mut out = Outcome::new(&["N", "statistic", "stderr"]);
    rate_rows(&mut out, &rep.fit);
    let mut summary = rep.fit.summary();
    summary["raw_gap"] = json!(rep.raw);
    summary["certificates"] = serde_json::to_value(&rep.certificates)?;
    out.summary = summary;
    match p.family {
        NashFamily::Lq => {
            slope_check(&mut out, "slope", &rep.fit, -0.5, 0.15);
            let mono = rep.fit.is_monotone(2.0);
            out.check("monotone", mono, format!("values {:?}", rep.fit.values));
        }
        NashFamily::Separable => {
            let tol = rep.certificates.iter().map(|c| c.tol).fold(f64::INFINITY, f64::min);
            let worst = rep.raw.iter().copied().fold(0.0, f64::max);
            out.check("gap_within_tolerance", worst <= tol, format!("max raw gap {worst:e}, tolerance {tol:e}"));
        }
        NashFamily::Grid2p => {}
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid2pParams {
    #[serde(rename = "T", default = "grid2p_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub options: Grid2pOptions,
    /// Random comparison points `(t, x1, x2)`.
    #[serde(default = "sixty_four")]
    pub points: usize,
}

fn grid2p_horizon() -> f64 {
    0.1
}

/// The `N = 2` quadratic oracle against an explicit 2-d grid solve of the
/// two-player system.
pub fn grid2p(p: &Grid2pParams, seed: u64) -> Result<Outcome> {
    let g = nash_grid2p(p.horizon, &p.options)?;
    let lq = nash_lq(2, p.horizon)?;
    let mut s = StreamKey::root(seed).child(tags::PROBES).stream();
    let mut out = Outcome::new(&["t", "x1", "x2", "grid", "lq", "abs_diff"]);
    let mut worst: f64 = 0.0;
    for _ in 0..p.points {
        let t = p.horizon * s.uniform();
        let x = [4.0 * s.uniform() - 2.0, 4.0 * s.uniform() - 2.0];
        let (a, b) = (g.value(0, t, &x), lq.value(0, t, &x));
        worst = worst.max((a - b).abs());
        out.row(vec![t.into(), x[0].into(), x[1].into(), a.into(), b.into(), (a - b).abs().into()]);
    }
    out.summary = json!({ "max_abs_diff": worst, "certificate": g.certificate() });
    out.check("grid_matches_lq", worst <= 5e-3, format!("max |grid - lq| = {worst:e}"));
    Ok(out)
}

pub fn chaos(p: &ChaosConfig, seed: u64) -> Result<Outcome> {
    let rep = chaos_experiment(p, seed)?;
    let mut out = Outcome::new(&["N", "statistic", "stderr", "flow_w1", "flow_stderr", "flow_at_zero"]);
    for (k, n) in rep.path.ns.iter().enumerate() {
        out.row(vec![
            (*n).into(),
            rep.path.values[k].into(),
            rep.path.stderr[k].into(),
            rep.flow.values[k].into(),
            rep.flow.stderr[k].into(),
            rep.flow_at_zero[k].into(),
        ]);
    }
    out.summary = json!({ "path": rep.path.summary(), "flow": rep.flow.summary() });
    match p.family {
        NashFamily::Lq => slope_check(&mut out, "path_slope", &rep.path, -0.5, 0.15),
        _ => {
            let worst = rep.path.values.iter().copied().fold(0.0, f64::max);
            out.check("degenerate_zero", worst == 0.0, format!("max deviation {worst:e}"));
        }
    }
    Ok(out)
}
