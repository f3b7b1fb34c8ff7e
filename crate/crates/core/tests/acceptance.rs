//! Acceptance suite: every criterion at its stated tolerance, one
//! PASS/FAIL line each.
//!
//! Runs the registered experiments with their default configs.  Failing
//! criteria are reported but only fail the process when
//! `MFLAB_ACCEPTANCE_STRICT=1`.

use std::process::ExitCode;
use std::time::Instant;

use mflab::harness::{self, ExperimentConfig, ResultTable};
use serde_json::{json, Value};

struct Criterion {
    label: &'static str,
    /// Wall-time budget in seconds, where one is stated.
    budget: Option<f64>,
    runs: Vec<ExperimentConfig>,
}

fn cfg(id: &str) -> ExperimentConfig {
    ExperimentConfig::new(id).with_seed(20240601)
}

fn family(id: &str, f: &str) -> ExperimentConfig {
    cfg(id).with_param("family", json!(f))
}

fn criteria() -> Vec<Criterion> {
    let c = |label, budget, runs| Criterion { label, budget, runs };
    vec![
        c("1 nonsmooth value and one-sided slopes", Some(60.0), vec![cfg("counterexample.nonclassical")]),
        c("2 comparison failure", Some(120.0), vec![cfg("counterexample.comparison")]),
        c(
            "3 mollifier suite",
            Some(180.0),
            vec![cfg("mollifier.suite"), cfg("counterexample.w2-blowup"), cfg("counterexample.gradient-gap")],
        ),
        c("4 monotonicity", None, vec![cfg("mfg.monotonicity"), cfg("counterexample.mollified-monotone")]),
        c("5 regularity and stability", None, vec![cfg("mfg.regularity"), cfg("mfg.stability")]),
        c("6 empirical-measure rate", Some(120.0), vec![cfg("nash.empirical-rate")]),
        c(
            "7 Nash convergence",
            Some(600.0),
            vec![family("nash.rate", "lq"), family("nash.rate", "separable"), cfg("nash.grid2p")],
        ),
        c(
            "8 propagation of chaos",
            Some(600.0),
            vec![family("nash.chaos", "lq"), family("nash.chaos", "separable")],
        ),
        c("9 good-solution consistency", None, vec![cfg("mfg.good-solution")]),
        c("10 derivative representation", None, vec![cfg("lions.derivative")]),
    ]
}

fn label_of(t: &ResultTable) -> String {
    match t.config.get(harness::module_of(&t.provenance.id)).and_then(|b| b.get("family")) {
        Some(Value::String(f)) => format!("{}[{f}]", t.provenance.id),
        _ => t.provenance.id.clone(),
    }
}

fn main() -> ExitCode {
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let strict = std::env::var("MFLAB_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut failed = Vec::new();
    for crit in criteria() {
        let number = crit.label.split(' ').next().unwrap_or_default();
        if !only.is_empty() && !only.iter().any(|o| o == number) {
            continue;
        }
        let start = Instant::now();
        let mut ok = true;
        let mut lines = Vec::new();
        for run in &crit.runs {
            match harness::run(run) {
                Ok(t) => {
                    for ch in &t.checks {
                        ok &= ch.passed;
                        let mark = if ch.passed { "ok  " } else { "FAIL" };
                        lines.push(format!("    {mark} {}::{}: {}", label_of(&t), ch.name, ch.detail));
                    }
                }
                Err(e) => {
                    ok = false;
                    lines.push(format!("    FAIL {}: error ({}): {e}", run.id, e.kind()));
                }
            }
        }
        let secs = start.elapsed().as_secs_f64();
        let timing = match crit.budget {
            Some(b) if secs > b => {
                ok = false;
                format!("{secs:.1}s over the {b:.0}s budget")
            }
            Some(b) => format!("{secs:.1}s of {b:.0}s"),
            None => format!("{secs:.1}s"),
        };
        println!("{} criterion {} ({timing})", if ok { "PASS" } else { "FAIL" }, crit.label);
        for l in lines {
            println!("{l}");
        }
        if !ok {
            failed.push(number.to_string());
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        return ExitCode::SUCCESS;
    }
    println!("acceptance: failing criteria {}", failed.join(", "));
    if strict {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
