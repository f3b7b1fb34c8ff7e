//! Result tables and their on-disk form.
//!
//! A run directory holds `table.csv` (data only, so identical configs give
//! identical bytes), `summary.json` (provenance, summary values, checks)
//! and `config.json` (the resolved config the hash was taken over).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{MflabError, Result};
use crate::harness::fit::{ols_loglog, LogLogFit};

/// One typed cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Float(x) => Some(*x),
            Cell::Text(_) => None,
        }
    }

    /// Floats use the shortest representation that parses back exactly.
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format!("{x:?}"),
            Cell::Text(s) => s.clone(),
        }
    }

    fn parse(s: &str) -> Cell {
        if let Ok(i) = s.parse::<i64>() {
            return Cell::Int(i);
        }
        match s.parse::<f64>() {
            Ok(x) => Cell::Float(x),
            Err(_) => Cell::Text(s.to_string()),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

/// A named pass/fail threshold evaluated on a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub id: String,
    pub seed: u64,
    /// SHA-256 of the canonical resolved config.
    pub config_hash: String,
    pub code_version: String,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub provenance: Provenance,
    pub summary: serde_json::Value,
    pub checks: Vec<Check>,
    /// The resolved config the hash covers.
    pub config: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct SummaryFile {
    provenance: Provenance,
    summary: serde_json::Value,
    checks: Vec<Check>,
}

/// Hex SHA-256 of the compact JSON form; object keys are sorted.
pub fn config_hash(config: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(config).expect("JSON values serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl ResultTable {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| MflabError::Invalid(format!("no column `{name}` in {:?}", self.columns)))
    }

    /// Numeric values of a column.
    pub fn values(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[j].as_f64()
                    .ok_or_else(|| MflabError::Invalid(format!("column `{name}` holds text")))
            })
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Comma separated, header first, LF line ends.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        wtr.write_record(&self.columns)?;
        for row in &self.rows {
            wtr.write_record(row.iter().map(Cell::render))?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Columns and rows of a CSV with a header line.
    pub fn read_csv<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<Cell>>)> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let columns: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if columns.is_empty() || columns.iter().all(|c| c.is_empty()) {
            return Err(MflabError::Invalid("CSV header is missing".into()));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec?.iter().map(Cell::parse).collect());
        }
        Ok((columns, rows))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.write_csv(fs::File::create(dir.join("table.csv"))?)?;
        let summary = SummaryFile {
            provenance: self.provenance.clone(),
            summary: self.summary.clone(),
            checks: self.checks.clone(),
        };
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
        fs::write(dir.join("config.json"), serde_json::to_string_pretty(&self.config)? + "\n")?;
        Ok(())
    }

    /// Reload a saved run; the stored config must still hash to the
    /// recorded value.
    pub fn load(dir: &Path) -> Result<Self> {
        let (columns, rows) = Self::read_csv(fs::File::open(dir.join("table.csv"))?)?;
        let s: SummaryFile = serde_json::from_str(&fs::read_to_string(dir.join("summary.json"))?)?;
        let config: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("config.json"))?)?;
        let hash = config_hash(&config);
        if hash != s.provenance.config_hash {
            return Err(MflabError::Config {
                path: "config.json".into(),
                msg: format!("hash {hash} does not match recorded {}", s.provenance.config_hash),
            });
        }
        Ok(ResultTable {
            columns,
            rows,
            provenance: s.provenance,
            summary: s.summary,
            checks: s.checks,
            config,
        })
    }
}

/// Log-log OLS of one column against another; at least four rows.
pub fn fit_rate(columns: &[String], rows: &[Vec<Cell>], x_col: &str, y_col: &str) -> Result<LogLogFit> {
    let idx = |name: &str| {
        columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| MflabError::Invalid(format!("no column `{name}` in {columns:?}")))
    };
    let (i, j) = (idx(x_col)?, idx(y_col)?);
    if rows.len() < 4 {
        return Err(MflabError::Empty(format!("a rate fit needs at least 4 rows, got {}", rows.len())));
    }
    let col = |k: usize, name: &str| -> Result<Vec<f64>> {
        rows.iter()
            .map(|r| {
                r.get(k)
                    .and_then(Cell::as_f64)
                    .ok_or_else(|| MflabError::Invalid(format!("column `{name}` is not numeric")))
            })
            .collect()
    };
    ols_loglog(&col(i, x_col)?, &col(j, y_col)?)
}

impl ResultTable {
    pub fn fit(&self, x_col: &str, y_col: &str) -> Result<LogLogFit> {
        fit_rate(&self.columns, &self.rows, x_col, y_col)
    }
}
