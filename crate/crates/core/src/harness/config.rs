//! Experiment configs: JSON documents with one parameter block keyed by the
//! owning module, plus dot-path overrides.
//!
//! ```json
//! { "id": "nash.rate", "seed": 7, "nash": { "family": "lq", "N_grid": [4, 8, 16, 32] } }
//! ```

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{MflabError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub id: String,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// The module block, unresolved (defaults not yet applied).
    pub params: Value,
}

fn config_err(path: impl Into<String>, msg: impl Into<String>) -> MflabError {
    MflabError::Config {
        path: path.into(),
        msg: msg.into(),
    }
}

/// Module name owning an experiment id: the part before the first dot.
pub fn module_of(id: &str) -> &str {
    id.split('.').next().unwrap_or(id)
}

impl ExperimentConfig {
    pub fn new(id: &str) -> Self {
        ExperimentConfig {
            id: id.to_string(),
            seed: 0,
            out: None,
            params: Value::Object(Map::new()),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Set `key` inside the module block.
    pub fn with_param(mut self, key: &str, value: Value) -> Self {
        if let Value::Object(m) = &mut self.params {
            m.insert(key.to_string(), value);
        }
        self
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| config_err("", e.to_string()))?;
        Self::from_value(&v)
    }

    /// Validate the top level; the module block is checked when the
    /// experiment resolves it.
    pub fn from_value(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| config_err("", "config must be a JSON object"))?;
        let id = obj
            .get("id")
            .ok_or_else(|| config_err("id", "missing experiment id"))?
            .as_str()
            .ok_or_else(|| config_err("id", "expected a string"))?
            .to_string();
        let module = module_of(&id).to_string();
        let mut cfg = ExperimentConfig::new(&id);
        for (k, val) in obj {
            match k.as_str() {
                "id" => {}
                "seed" => cfg.seed = val.as_u64().ok_or_else(|| config_err("seed", "expected a nonnegative integer"))?,
                "out" => {
                    cfg.out = match val {
                        Value::Null => None,
                        Value::String(s) => Some(PathBuf::from(s)),
                        _ => return Err(config_err("out", "expected a path string")),
                    }
                }
                m if m == module => {
                    if !val.is_object() {
                        return Err(config_err(m, "parameter block must be an object"));
                    }
                    cfg.params = val.clone();
                }
                other => return Err(config_err(other, format!("unknown key for experiment `{id}`"))),
            }
        }
        Ok(cfg)
    }

    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("id".into(), Value::String(self.id.clone()));
        m.insert("seed".into(), Value::from(self.seed));
        if let Some(out) = &self.out {
            m.insert("out".into(), Value::String(out.display().to_string()));
        }
        m.insert(module_of(&self.id).to_string(), self.params.clone());
        Value::Object(m)
    }

    /// Apply `path=value` overrides, e.g. `nash.N_grid=[4,8,16]` or
    /// `seed=3`.  Values parse as JSON, falling back to a plain string.
    pub fn with_overrides<S: AsRef<str>>(&self, sets: &[S]) -> Result<Self> {
        let mut root = self.to_value();
        for s in sets {
            let s = s.as_ref();
            let (path, raw) = s
                .split_once('=')
                .ok_or_else(|| config_err(s, "override must look like key.path=value"))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut root, path, value)?;
        }
        Self::from_value(&root)
    }
}

/// Set a dot-separated path, creating objects as needed; numeric segments
/// index arrays.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    if path.is_empty() {
        return Err(config_err(path, "empty override path"));
    }
    let segs: Vec<&str> = path.split('.').collect();
    let mut cur = root;
    for (i, seg) in segs.iter().enumerate() {
        let last = i + 1 == segs.len();
        let here = segs[..=i].join(".");
        cur = match cur {
            Value::Object(m) => {
                if last {
                    m.insert(seg.to_string(), value);
                    return Ok(());
                }
                m.entry(seg.to_string()).or_insert_with(|| Value::Object(Map::new()))
            }
            Value::Array(a) => {
                let k: usize = seg.parse().map_err(|_| config_err(&here, "expected an array index"))?;
                let len = a.len();
                let slot = a
                    .get_mut(k)
                    .ok_or_else(|| config_err(&here, format!("index out of range (length {len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(config_err(&here, "cannot descend into a scalar")),
        };
    }
    unreachable!("loop returns on the last segment")
}

/// Deserialize a module block with defaults applied, reporting schema
/// violations with their full path, and return it with its resolved JSON.
pub fn resolve<P: DeserializeOwned + Serialize>(block: &Value, module: &str) -> Result<(P, Value)> {
    let p: P = serde_path_to_error::deserialize(block).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { module.to_string() } else { format!("{module}.{inner}") };
        config_err(path, e.into_inner().to_string())
    })?;
    let resolved = serde_json::to_value(&p)?;
    Ok((p, resolved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct P {
        #[serde(default)]
        n: Vec<usize>,
        #[serde(default)]
        inner: Inner,
    }

    #[derive(Debug, Default, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Inner {
        #[serde(default)]
        tol: f64,
    }

    #[test]
    fn overrides_and_paths() {
        let c = ExperimentConfig::new("nash.rate")
            .with_overrides(&["nash.n=[4,8]", "seed=9", "nash.inner.tol=0.5"])
            .unwrap();
        assert_eq!(c.seed, 9);
        let (p, _) = resolve::<P>(&c.params, "nash").unwrap();
        assert_eq!(p.n, vec![4, 8]);
        assert_eq!(p.inner.tol, 0.5);
        let bad = ExperimentConfig::new("nash.rate").with_overrides(&["nash.inner.tol=\"x\""]).unwrap();
        match resolve::<P>(&bad.params, "nash").unwrap_err() {
            MflabError::Config { path, .. } => assert_eq!(path, "nash.inner.tol"),
            e => panic!("{e}"),
        }
        let e = ExperimentConfig::new("nash.rate").with_overrides(&["mfg.T=1"]).unwrap_err();
        assert_eq!(e.kind(), "config");
    }
}
