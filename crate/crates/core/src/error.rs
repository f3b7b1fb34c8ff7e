//! Error type shared by every module.
//!
//! Variants carry the short error names used in reports and by the CLI
//! exit-code mapping (`config` → 2, numerical failures → 3).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, MflabError>;

#[derive(Debug, Error)]
pub enum MflabError {
    #[error("dim: {0}")]
    Dim(String),
    #[error("empty: {0}")]
    Empty(String),
    #[error("range: {0}")]
    Range(String),
    #[error("invalid: {0}")]
    Invalid(String),
    #[error("functional: {0}")]
    Functional(String),
    #[error("support: {0}")]
    Support(String),
    #[error("cfl: {0}")]
    Cfl(String),
    #[error("blowup at time index {step}")]
    Blowup { step: usize },
    #[error("domain: {0}")]
    Domain(String),
    #[error("no-contraction after {} iterations (gaps {gaps:?})", gaps.len())]
    NoContraction { gaps: Vec<f64> },
    #[error("interval {interval}: {source}")]
    Interval {
        interval: usize,
        #[source]
        source: Box<MflabError>,
    },
    #[error("resolution: {0}")]
    Resolution(String),
    #[error("family: {0}")]
    Family(String),
    #[error("ansatz: residual {residual:e} above tolerance {tol:e}")]
    Ansatz { residual: f64, tol: f64 },
    #[error("experiment: {0}")]
    Experiment(String),
    #[error("config at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error("log-domain: {0}")]
    LogDomain(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl MflabError {
    /// Short machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            MflabError::Dim(_) => "dim",
            MflabError::Empty(_) => "empty",
            MflabError::Range(_) => "range",
            MflabError::Invalid(_) => "invalid",
            MflabError::Functional(_) => "functional",
            MflabError::Support(_) => "support",
            MflabError::Cfl(_) => "cfl",
            MflabError::Blowup { .. } => "blowup",
            MflabError::Domain(_) => "domain",
            MflabError::NoContraction { .. } => "no-contraction",
            MflabError::Interval { source, .. } => source.kind(),
            MflabError::Resolution(_) => "resolution",
            MflabError::Family(_) => "family",
            MflabError::Ansatz { .. } => "ansatz",
            MflabError::Experiment(_) => "experiment",
            MflabError::Config { .. } => "config",
            MflabError::LogDomain(_) => "log-domain",
            MflabError::Io(_) => "io",
            MflabError::Csv(_) => "csv",
            MflabError::Json(_) => "json",
        }
    }

    /// True for failures of the numerical machinery (CLI exit code 3).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.kind(),
            "cfl" | "blowup" | "domain" | "no-contraction" | "ansatz" | "resolution"
        )
    }

    pub(crate) fn in_interval(self, interval: usize) -> Self {
        match self {
            e @ MflabError::Interval { .. } => e,
            e => MflabError::Interval {
                interval,
                source: Box::new(e),
            },
        }
    }
}
