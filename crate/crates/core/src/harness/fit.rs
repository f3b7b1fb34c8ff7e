//! Least-squares rate fits on log-log axes.

use serde::{Deserialize, Serialize};

use crate::error::{MflabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// OLS of `ln y` on `ln x`.
pub fn ols_loglog(x: &[f64], y: &[f64]) -> Result<LogLogFit> {
    if x.len() != y.len() {
        return Err(MflabError::Dim(format!("{} x values, {} y values", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(MflabError::Empty("a log-log fit needs at least two points".into()));
    }
    if let Some(bad) = x.iter().chain(y).find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(MflabError::LogDomain(format!("nonpositive or non-finite value {bad}")));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(MflabError::Invalid("all x values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(LogLogFit { slope, intercept, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let x: Vec<f64> = (1..=6).map(|k| 2f64.powi(k)).collect();
        let y1: Vec<f64> = x.iter().map(|v| 1.0 / v).collect();
        let f = ols_loglog(&x, &y1).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
        let y2: Vec<f64> = x.iter().map(|v| 3.0 / v.sqrt()).collect();
        let f = ols_loglog(&x, &y2).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive() {
        assert_eq!(ols_loglog(&[1.0, 2.0], &[1.0, 0.0]).unwrap_err().kind(), "log-domain");
    }
}
