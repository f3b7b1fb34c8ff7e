//! Lions derivative of `V` by the tangent-process representation, checked
//! against atom-shift finite differences.

use mflab::harness::{self, ExperimentConfig};
use serde_json::json;

fn main() -> mflab::Result<()> {
    let cfg = ExperimentConfig::new("lions.derivative").with_seed(3).with_param("particles", json!(5000));
    let t = harness::run(&cfg)?;
    t.write_csv(std::io::stdout())?;
    for c in &t.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(())
}
