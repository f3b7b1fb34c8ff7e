use mflab::harness::{self, ExperimentConfig};
use serde_json::json;

/// `G = (x - m)²`, `H = z²/2`: the mean is preserved and
/// `V(0, x, μ) = a(x - m)² - ½ ln(1 - 2T)` with `a = 1/(1 - 2T)`.
#[test]
fn quadratic_value_matches_closed_form() {
    let horizon: f64 = 0.2;
    let cfg = ExperimentConfig::new("mfg.value")
        .with_seed(3)
        .with_param("T", json!(horizon))
        .with_param("measure", json!({ "kind": "gaussian", "mean": 0.5, "var": 1.0 }))
        .with_param("xs", json!([-1.5, 0.0, 0.5, 1.0, 2.5]));
    let t = harness::run(&cfg).unwrap();
    let a = 1.0 / (1.0 - 2.0 * horizon);
    let k = -0.5 * (1.0 - 2.0 * horizon).ln();
    let xs = t.values("x").unwrap();
    let vs = t.values("value").unwrap();
    let gs = t.values("grad").unwrap();
    for ((x, v), g) in xs.iter().zip(&vs).zip(&gs) {
        let exact = a * (x - 0.5) * (x - 0.5) + k;
        assert!((v - exact).abs() < 2e-2 * (1.0 + exact), "x={x}: {v} vs {exact}");
        assert!((g - 2.0 * a * (x - 0.5)).abs() < 2e-2 * (1.0 + g.abs()), "x={x}: grad {g}");
    }
}
