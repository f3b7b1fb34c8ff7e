//! JSON Schema for experiment configs, derived from each experiment's
//! resolved defaults.  Tagged objects (those with a `kind`) are left open
//! since their fields depend on the variant.

use serde_json::{json, Map, Value};

use super::config::module_of;
use super::registry::{registry_list, resolve_block};
use crate::error::Result;

fn infer(v: &Value) -> Value {
    let mut s = match v {
        Value::Null => json!({}),
        Value::Bool(_) => json!({ "type": "boolean" }),
        Value::Number(n) if n.is_u64() => json!({ "type": "integer", "minimum": 0 }),
        Value::Number(n) if n.is_i64() => json!({ "type": "integer" }),
        Value::Number(_) => json!({ "type": "number" }),
        Value::String(_) => json!({ "type": "string" }),
        Value::Array(items) => match items.first() {
            Some(first) => json!({ "type": "array", "items": infer(first) }),
            None => json!({ "type": "array" }),
        },
        Value::Object(m) if m.contains_key("kind") => json!({ "type": "object", "required": ["kind"] }),
        Value::Object(m) => block(m),
    };
    if !v.is_object() && !v.is_null() {
        s["default"] = v.clone();
    }
    s
}

fn block(m: &Map<String, Value>) -> Value {
    let props: Map<String, Value> = m.iter().map(|(k, v)| (k.clone(), infer(v))).collect();
    json!({ "type": "object", "properties": props, "additionalProperties": false })
}

/// Schema covering every registered id.
pub fn config_schema() -> Result<Value> {
    let mut cases = Vec::new();
    let mut ids = Vec::new();
    for d in registry_list() {
        let module = module_of(d.id);
        let defaults = resolve_block(d.id, &json!({}))?;
        let block_schema = match &defaults {
            Value::Object(m) => block(m),
            other => infer(other),
        };
        ids.push(d.id);
        cases.push(json!({
            "if": { "properties": { "id": { "const": d.id } } },
            "then": {
                "properties": {
                    "id": true,
                    "seed": true,
                    "out": true,
                    module: block_schema,
                },
                "additionalProperties": false,
            },
        }));
    }
    Ok(json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "mflab experiment config",
        "type": "object",
        "required": ["id"],
        "properties": {
            "id": { "enum": ids },
            "seed": { "type": "integer", "minimum": 0, "default": 0 },
            "out": { "type": ["string", "null"] },
        },
        "allOf": cases,
    }))
}
