//! Run a registered experiment with dot-path overrides, save it and reload
//! it with its config hash verified.
//!
//! ```text
//! cargo run --example run_experiment -- counterexample.w2-blowup counterexample.m=[4,16]
//! ```

use mflab::harness::{self, ExperimentConfig, ResultTable};

fn main() -> mflab::Result<()> {
    let mut args = std::env::args().skip(1);
    let id = args.next().unwrap_or_else(|| "counterexample.gradient-gap".into());
    let sets: Vec<String> = args.collect();
    let mut cfg = ExperimentConfig::new(&id).with_overrides(&sets)?;
    let dir = std::env::temp_dir().join("mflab-example").join(&id);
    cfg.out = Some(dir.clone());
    let table = harness::run(&cfg)?;
    table.write_csv(std::io::stdout())?;
    let back = ResultTable::load(&dir)?;
    println!("saved to {}; hash {} verified", dir.display(), back.provenance.config_hash);
    for d in harness::registry_list().iter().filter(|d| d.id == id) {
        println!("{}", d.description);
    }
    Ok(())
}
