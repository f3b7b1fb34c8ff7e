//! Problem data `(H, F, G, T)` with its numerical settings.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{MflabError, Result};
use crate::hjb::{CouplingSpec, HamiltonianKind, HamiltonianSpec, HjbOptions, Mollified, SpaceTimeGrid};
use crate::mollifier::MollifierParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceGrid {
    #[serde(default = "default_x_min")]
    pub x_min: f64,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    #[serde(default = "default_nx")]
    pub nx: usize,
    /// Global time step; the horizon is rounded to a whole number of steps.
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_x_min() -> f64 {
    -8.0
}
fn default_x_max() -> f64 {
    8.0
}
fn default_nx() -> usize {
    801
}
fn default_dt() -> f64 {
    0.005
}

impl Default for SpaceGrid {
    fn default() -> Self {
        SpaceGrid {
            x_min: default_x_min(),
            x_max: default_x_max(),
            nx: default_nx(),
            dt: default_dt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardOptions {
    /// Converged once `sup_t W1(ρ^k_t, ρ^{k+1}_t) ≤ tol`.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Weight of the new drift when mixing with the previous one.
    #[serde(default)]
    pub relaxation: Option<f64>,
    /// How many times an interval may be halved after non-contraction.
    #[serde(default = "default_halvings")]
    pub max_halvings: usize,
}

fn default_tol() -> f64 {
    1e-5
}
fn default_max_iter() -> usize {
    40
}
fn default_halvings() -> usize {
    4
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tol: default_tol(),
            max_iter: default_max_iter(),
            relaxation: None,
            max_halvings: default_halvings(),
        }
    }
}

/// Serializable problem description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MfgConfig {
    #[serde(default)]
    pub hamiltonian: HamiltonianKind,
    #[serde(default)]
    pub coupling: CouplingSpec,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default)]
    pub grid: SpaceGrid,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default)]
    pub antithetic: bool,
    #[serde(default)]
    pub picard: PicardOptions,
    #[serde(default)]
    pub hjb: HjbOptions,
    /// Common-noise intensity; only 0 is supported.
    #[serde(default)]
    pub beta: f64,
}

fn default_particles() -> usize {
    20_000
}

impl MfgConfig {
    pub fn new(coupling: CouplingSpec, horizon: f64) -> Self {
        MfgConfig {
            hamiltonian: HamiltonianKind::Quadratic,
            coupling,
            horizon,
            grid: SpaceGrid::default(),
            particles: default_particles(),
            antithetic: false,
            picard: PicardOptions::default(),
            hjb: HjbOptions::default(),
            beta: 0.0,
        }
    }

    pub fn build(&self) -> Result<MfgProblem> {
        if self.beta != 0.0 {
            return Err(MflabError::Invalid("only beta = 0 (no common noise) is supported".into()));
        }
        let p = MfgProblem {
            hamiltonian: self.hamiltonian.build(),
            coupling: self.coupling.clone(),
            horizon: self.horizon,
            grid: self.grid.clone(),
            particles: self.particles,
            antithetic: self.antithetic,
            picard: self.picard.clone(),
            hjb: self.hjb.clone(),
        };
        p.validate()?;
        Ok(p)
    }
}

/// The data `(H, F, G, T)` and the numerical settings used to solve it.
#[derive(Clone, Debug)]
pub struct MfgProblem {
    pub hamiltonian: HamiltonianSpec,
    pub coupling: CouplingSpec,
    pub horizon: f64,
    pub grid: SpaceGrid,
    pub particles: usize,
    pub antithetic: bool,
    pub picard: PicardOptions,
    pub hjb: HjbOptions,
}

impl MfgProblem {
    pub fn new(coupling: CouplingSpec, horizon: f64) -> Result<Self> {
        MfgConfig::new(coupling, horizon).build()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(MflabError::Invalid("horizon T must be positive".into()));
        }
        if !(self.grid.dt > 0.0) || self.grid.dt > self.horizon {
            return Err(MflabError::Invalid("time step must lie in (0, T]".into()));
        }
        if self.particles == 0 {
            return Err(MflabError::Empty("particle count must be positive".into()));
        }
        if let Some(r) = self.picard.relaxation {
            if !(r > 0.0 && r <= 1.0) {
                return Err(MflabError::Invalid("relaxation weight must lie in (0, 1]".into()));
            }
        }
        self.coupling.validate()?;
        self.space_time(0, 1).map(|_| ())
    }

    /// Number of global time steps.
    pub fn steps(&self) -> usize {
        ((self.horizon / self.grid.dt).round() as usize).max(1)
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps() as f64
    }

    pub fn time(&self, step: usize) -> f64 {
        if step == self.steps() {
            self.horizon
        } else {
            step as f64 * self.dt()
        }
    }

    /// Global step of `t`, which must lie on the time grid.
    pub fn step_of(&self, t: f64) -> Result<usize> {
        let s = t / self.dt();
        let k = s.round();
        if (s - k).abs() > 1e-6 || k < 0.0 || k as usize > self.steps() {
            return Err(MflabError::Invalid(format!(
                "t = {t} is not a level of the time grid (dt = {})",
                self.dt()
            )));
        }
        Ok(k as usize)
    }

    /// Space-time grid covering global steps `a..=b`.
    pub fn space_time(&self, a: usize, b: usize) -> Result<SpaceTimeGrid> {
        SpaceTimeGrid::new(self.grid.x_min, self.grid.x_max, self.grid.nx, self.time(a), self.time(b), b - a)
    }

    /// Same problem with `H`, `F`, `G` mollified at level `params.n`.
    pub fn mollified(&self, params: &MollifierParams) -> Result<Self> {
        params.validate()?;
        let mut p = self.clone();
        p.hamiltonian = Arc::new(Mollified::new(self.hamiltonian.clone(), params.n));
        p.coupling = self.coupling.mollified(params);
        Ok(p)
    }

    pub fn with_coupling(&self, coupling: CouplingSpec) -> Self {
        let mut p = self.clone();
        p.coupling = coupling;
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_beta() {
        let c: MfgConfig = serde_json::from_str(r#"{"T": 1.0}"#).unwrap();
        let p = c.build().unwrap();
        assert_eq!(p.steps(), 200);
        assert_eq!(p.step_of(0.5).unwrap(), 100);
        assert!(p.step_of(0.5013).is_err());
        let bad: MfgConfig = serde_json::from_str(r#"{"T": 1.0, "beta": 0.5}"#).unwrap();
        assert!(bad.build().is_err());
    }
}
