//! Print the JSON Schema for experiment configs.
//!
//! ```text
//! cargo run --example config_schema > crates/core/schema/config.schema.json
//! ```

fn main() -> mflab::Result<()> {
    let schema = mflab::harness::config_schema()?;
    println!("{}", serde_json::to_string_pretty(&schema)?);
    Ok(())
}
