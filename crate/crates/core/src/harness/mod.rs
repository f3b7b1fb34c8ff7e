//! Configuration, experiment registry, result tables and the runner behind
//! the `mflab` binary.
//!
//! Every experiment is determined by its id, its resolved parameter block
//! and its seed; the resolved config is hashed into the table's provenance.

pub mod config;
pub mod experiments;
pub mod fit;
pub mod registry;
pub mod schema;
pub mod table;

use std::time::Instant;

pub use config::{module_of, ExperimentConfig};
pub use fit::{ols_loglog, LogLogFit};
pub use registry::{descriptor, registry_list, resolve_block, Descriptor, ALIASES};
pub use schema::config_schema;
pub use table::{config_hash, fit_rate, Cell, Check, Provenance, ResultTable};

use crate::error::{MflabError, Result};

/// Run an experiment; when `config.out` is set the table, summary,
/// resolved config and any artifacts are written there.
pub fn run(config: &ExperimentConfig) -> Result<ResultTable> {
    descriptor(&config.id)?;
    let start = Instant::now();
    let (resolved, outcome) = registry::dispatch(&config.id, &config.params, config.seed)?;
    let mut canonical = ExperimentConfig::new(&config.id).with_seed(config.seed);
    canonical.params = resolved;
    let canonical = canonical.to_value();
    let table = ResultTable {
        columns: outcome.columns,
        rows: outcome.rows,
        provenance: Provenance {
            id: config.id.clone(),
            seed: config.seed,
            config_hash: config_hash(&canonical),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        summary: outcome.summary,
        checks: outcome.checks,
        config: canonical,
    };
    if let Some(dir) = &config.out {
        table.save(dir)?;
        for (name, bytes) in &outcome.artifacts {
            std::fs::write(dir.join(name), bytes)?;
        }
    }
    Ok(table)
}

/// Process exit code for an error: 2 for configuration problems, 3 for
/// numerical failures, 1 otherwise.
pub fn exit_code(e: &MflabError) -> i32 {
    match e.kind() {
        "config" | "experiment" => 2,
        "cfl" | "blowup" | "no-contraction" | "ansatz" | "domain" | "resolution" => 3,
        _ => 1,
    }
}

/// Exit code when `--assert` fails.
pub const ASSERT_FAILED: i32 = 4;
