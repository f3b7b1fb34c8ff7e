//! The experiment registry: ids, descriptions and dispatch.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::config::resolve;
use super::experiments::{self as ex, Outcome};
use crate::error::{MflabError, Result};
use crate::nash::{ChaosConfig, NashFamily, NashRateConfig};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Descriptor {
    pub id: &'static str,
    /// What the experiment measures, ending with the claim it checks.
    pub description: &'static str,
    /// The claimed formula.
    pub claim: &'static str,
}

/// `(block, seed, execute)`; with `execute` false only the resolved block
/// is produced.
type Runner = fn(&Value, u64, bool) -> Result<(Value, Option<Outcome>)>;

struct Entry {
    desc: Descriptor,
    run: Runner,
}

fn typed<P: DeserializeOwned + Serialize>(
    block: &Value,
    module: &str,
    seed: u64,
    execute: bool,
    f: fn(&P, u64) -> Result<Outcome>,
) -> Result<(Value, Option<Outcome>)> {
    let (p, resolved) = resolve::<P>(block, module)?;
    let outcome = if execute { Some(f(&p, seed)?) } else { None };
    Ok((resolved, outcome))
}

/// Nash blocks default their `family`.
fn with_family(block: &Value, family: NashFamily) -> Value {
    let mut b = block.clone();
    if let Value::Object(m) = &mut b {
        m.entry("family").or_insert_with(|| serde_json::to_value(family).expect("family serializes"));
    }
    b
}

macro_rules! entry {
    ($id:literal, $desc:literal, $claim:literal, $run:expr) => {
        Entry {
            desc: Descriptor {
                id: $id,
                description: concat!($desc, " Claim: ", $claim),
                claim: $claim,
            },
            run: $run,
        }
    };
}

fn entries() -> Vec<Entry> {
    vec![
        entry!(
            "counterexample.comparison",
            "C0 sweep of V1 and V2 at (0, 0, δ0) for G_i = g_i(x) + C0·m with g1 = 0 and g2 logistic; reports the smallest C0 with V2 < V1.",
            "V_1(0, 0, \\delta_0) > V_2(0, 0, \\delta_0)",
            |b, s, x| typed(b, "counterexample", s, x, ex::comparison)
        ),
        entry!(
            "counterexample.gradient-gap",
            "Gap between the pointwise Lions gradient of the mollified linear functional and g'(x), at a lattice point and a cell midpoint.",
            "|g'(0)| \\ge 1",
            |b, s, x| typed(b, "counterexample", s, x, ex::gradient_gap)
        ),
        entry!(
            "counterexample.mollified-monotone",
            "Pairing of the x-mollified radial coupling against its closed form; a kernel with nonzero mean makes it positive.",
            "-2[m2_1-m2_2]^2 + 4\\varepsilon m_\\zeta (m_1-m_2)(m2_1-m2_2)",
            |b, s, x| typed(b, "counterexample", s, x, ex::mollified_monotone)
        ),
        entry!(
            "counterexample.nonclassical",
            "Abs-deviation terminal cost: V(0,x,δ0) and one-sided Gateaux quotients at N(0,1) along the direction ξ.",
            "V(0,x,\\delta_0)=(2-\\sqrt{2})/\\sqrt{\\pi}, slopes \\pm{1\\over \\sqrt{\\pi}}",
            |b, s, x| typed(b, "counterexample", s, x, ex::nonclassical)
        ),
        entry!(
            "counterexample.w2-blowup",
            "W2-Lipschitz ratio of the mollified W2 distance on a pair of Diracs inside one lattice cell, for several m.",
            "{\\sqrt{m}\\over C}{\\cal W}_2",
            |b, s, x| typed(b, "counterexample", s, x, ex::w2_blowup)
        ),
        entry!(
            "lions.derivative",
            "Tangent-process representation of the Lions derivative against atom-shift finite differences (derivative-check).",
            "\\partial_\\mu V(0,x,\\mu, \\tilde x)= \\nabla_\\mu Y",
            |b, s, x| typed(b, "lions", s, x, ex::derivative_check)
        ),
        entry!(
            "mfg.good-solution",
            "max |V_n - V| over probes for mollified data at increasing n, nonsmooth and smooth couplings.",
            "V_n \\to V",
            |b, s, x| typed(b, "mfg", s, x, ex::good_solution)
        ),
        entry!(
            "mfg.monotonicity",
            "Monotonicity pairing of the quadratic coupling and of V(t,·,·) at random (t, μ1, μ2).",
            "\\int [V(t,x,\\mu_1)-V(t,x,\\mu_2)](\\mu_1-\\mu_2)(dx) \\le 0",
            |b, s, x| typed(b, "mfg", s, x, ex::monotonicity)
        ),
        entry!(
            "mfg.regularity",
            "Lipschitz ratios in x and μ and the Hölder ratio in t, under refinement of the time partition.",
            "|V(t,x,\\mu)-V(t,x',\\mu')| \\le C[|x-x'| + {\\cal W}_1(\\mu,\\mu')]",
            |b, s, x| typed(b, "mfg", s, x, ex::regularity)
        ),
        entry!(
            "mfg.stability",
            "sup |V^ε - V| under a terminal perturbation of size ε against the fitted envelope.",
            "C[|\\Delta I|^{1/4} + |\\Delta I|]",
            |b, s, x| typed(b, "mfg", s, x, ex::stability)
        ),
        entry!(
            "mfg.value",
            "V(0,x,μ) and ∂x V on a set of points, with the local field dumped as t,x,u,du.",
            "V(t,x,\\rho_t) = u(t,x)",
            |b, s, x| typed(b, "mfg", s, x, ex::value_table)
        ),
        entry!(
            "mollifier.evaluate",
            "U_n(μ) with Monte Carlo standard error for a chosen functional and measure (mollify).",
            "U_n(\\mu) = \\int \\zeta_n(y) U(\\mu_n(y)) dy",
            |b, s, x| typed(b, "mollifier", s, x, ex::mollify_table)
        ),
        entry!(
            "mollifier.suite",
            "Uniform error over a compact family and the W1-Lipschitz ratio of U_n over random pairs, for several n.",
            "|U_n(\\mu) - U(\\mu)| \\to 0 with Lipschitz constant $CL$",
            |b, s, x| typed(b, "mollifier", s, x, ex::mollifier_suite)
        ),
        entry!(
            "nash.chaos",
            "Coupled N-player paths against iid limit paths under shared Brownian draws (chaos).",
            "\\sup_{0\\le t\\le T} |X^{N, \\vec \\xi,i}_t - X^{\\vec \\xi,i}_t|^p",
            |b, s, x| typed::<ChaosConfig>(&with_family(b, NashFamily::Lq), "nash", s, x, ex::chaos)
        ),
        entry!(
            "nash.empirical-rate",
            "E[W1²(μ^N, μ)] against N for iid samples (empirical-rate).",
            "{C\\over N}",
            |b, s, x| typed(b, "nash", s, x, ex::empirical_rate)
        ),
        entry!(
            "nash.grid2p",
            "Two-player quadratic oracle against a direct 2-d grid solve of the Nash system.",
            "v^{N,i}(t, \\vec x)",
            |b, s, x| typed(b, "nash", s, x, ex::grid2p)
        ),
        entry!(
            "nash.rate",
            "Normalized gap between N-player and mean-field values against N (nash-rate).",
            "|U^N-V| \\le {C\\over \\sqrt{N}}",
            |b, s, x| typed::<NashRateConfig>(&with_family(b, NashFamily::Lq), "nash", s, x, ex::nash_rate)
        ),
    ]
}

/// All registered experiments, sorted by id.
pub fn registry_list() -> Vec<Descriptor> {
    entries().into_iter().map(|e| e.desc).collect()
}

pub fn descriptor(id: &str) -> Result<Descriptor> {
    registry_list()
        .into_iter()
        .find(|d| d.id == id)
        .ok_or_else(|| MflabError::Experiment(format!("unknown experiment id `{id}`")))
}

fn entry(id: &str) -> Result<Entry> {
    entries()
        .into_iter()
        .find(|e| e.desc.id == id)
        .ok_or_else(|| MflabError::Experiment(format!("unknown experiment id `{id}`")))
}

/// Resolve the block and run; returns the resolved block with the outcome.
pub(crate) fn dispatch(id: &str, block: &Value, seed: u64) -> Result<(Value, Outcome)> {
    let (resolved, outcome) = (entry(id)?.run)(block, seed, true)?;
    Ok((resolved, outcome.expect("executed")))
}

/// The module block with every default filled in, without running.
pub fn resolve_block(id: &str, block: &Value) -> Result<Value> {
    Ok((entry(id)?.run)(block, 0, false)?.0)
}

/// CLI shorthands for registered ids.
pub const ALIASES: [(&str, &str); 5] = [
    ("mollify", "mollifier.evaluate"),
    ("derivative-check", "lions.derivative"),
    ("nash-rate", "nash.rate"),
    ("chaos", "nash.chaos"),
    ("empirical-rate", "nash.empirical-rate"),
];
