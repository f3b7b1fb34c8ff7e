//! Forward particle flows `dX = b(t, X) dt + dB`.
//!
//! Every particle owns a noise stream keyed by `(seed, particle, global
//! step)`, so restarting a flow at an intermediate step with the same
//! particles reproduces the continuation bit for bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MflabError, Result};
use crate::hjb::SpaceTimeGrid;
use crate::measures::{EmpiricalMeasure, MeasureStats};
use crate::rng::{tags, StreamKey};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Target particle count; each atom gets `ceil(particles / atoms)` copies.
    pub particles: usize,
    /// Pair particles `2j, 2j+1` with opposite Brownian increments.
    #[serde(default)]
    pub antithetic: bool,
    pub seed: u64,
    /// Global index of the first step, for noise addressing.
    #[serde(default)]
    pub first_step: u64,
    /// Upper bound on stored snapshot measures (the endpoints are always kept).
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
}

fn default_snapshots() -> usize {
    11
}

impl FlowOptions {
    pub fn new(particles: usize, seed: u64) -> Self {
        FlowOptions {
            particles,
            antithetic: false,
            seed,
            first_step: 0,
            snapshots: default_snapshots(),
        }
    }
}

/// Particle positions and weights at the start of a flow.
#[derive(Clone, Debug)]
pub struct Particles {
    pub positions: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Particles {
    /// `ceil(target / atoms)` equally weighted copies of every atom, in atom order.
    pub fn from_measure(mu: &EmpiricalMeasure, target: usize) -> Result<Self> {
        Self::with_copies(mu, target.div_ceil(mu.len()).max(1))
    }

    /// As [`Particles::from_measure`], with an even number of copies when
    /// antithetic pairs must stay on one atom.
    pub fn for_flow(mu: &EmpiricalMeasure, opts: &FlowOptions) -> Result<Self> {
        let copies = opts.particles.div_ceil(mu.len()).max(1);
        Self::with_copies(mu, if opts.antithetic { copies + copies % 2 } else { copies })
    }

    fn with_copies(mu: &EmpiricalMeasure, copies: usize) -> Result<Self> {
        if mu.dim() != 1 {
            return Err(MflabError::Dim("particle flows are one-dimensional".into()));
        }
        let mut positions = Vec::with_capacity(copies * mu.len());
        let mut weights = Vec::with_capacity(copies * mu.len());
        for (x, w) in mu.atoms() {
            for _ in 0..copies {
                positions.push(x[0]);
                weights.push(w / copies as f64);
            }
        }
        Ok(Particles { positions, weights })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// A simulated flow: moments at every step plus a few stored measures.
#[derive(Clone, Debug)]
pub struct MeasureFlow {
    pub times: Vec<f64>,
    /// Moments of `ρ_t` at every time level.
    pub stats: Vec<MeasureStats>,
    /// `(level, measure)` pairs, increasing, always containing both ends.
    pub snapshots: Vec<(usize, EmpiricalMeasure)>,
}

impl MeasureFlow {
    pub fn initial(&self) -> &EmpiricalMeasure {
        &self.snapshots[0].1
    }

    pub fn terminal(&self) -> &EmpiricalMeasure {
        &self.snapshots.last().expect("flow has snapshots").1
    }

    pub fn levels(&self) -> usize {
        self.times.len()
    }

    /// Stored measure nearest to level `k`.
    pub fn nearest(&self, k: usize) -> &EmpiricalMeasure {
        let pos = self
            .snapshots
            .iter()
            .min_by_key(|(l, _)| l.abs_diff(k))
            .expect("flow has snapshots");
        &pos.1
    }

    /// `max` over shared snapshot levels of `W1(self_t, other_t)`.
    pub fn gap(&self, other: &MeasureFlow) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for ((la, a), (lb, b)) in self.snapshots.iter().zip(&other.snapshots) {
            debug_assert_eq!(la, lb);
            worst = worst.max(crate::measures::w1_distance(a, b)?);
        }
        Ok(worst)
    }
}

/// Evenly spaced snapshot levels out of `0..=nt`, at most `count` of them.
pub fn snapshot_levels(nt: usize, count: usize) -> Vec<usize> {
    let count = count.max(2).min(nt + 1);
    let mut out: Vec<usize> = (0..count).map(|j| (j * nt + (count - 1) / 2) / (count - 1)).collect();
    out[0] = 0;
    out[count - 1] = nt;
    out.dedup();
    out
}

/// Noise stream for one particle, positioned at a global step.
pub fn particle_stream(seed: u64, particle: usize, antithetic: bool, step: u64) -> (crate::rng::Stream, f64) {
    let (index, sign) = if antithetic {
        (particle / 2, if particle % 2 == 0 { 1.0 } else { -1.0 })
    } else {
        (particle, 1.0)
    };
    (
        StreamKey::root(seed)
            .child(tags::PARTICLES)
            .child(index as u64)
            .stream_at(step),
        sign,
    )
}

/// Euler–Maruyama paths of all particles, path-major: entry
/// `p * (nt + 1) + k` is particle `p` at level `k`.
pub fn simulate_paths(
    start: &Particles,
    drift: &(dyn Fn(usize, f64) -> f64 + Sync),
    grid: &SpaceTimeGrid,
    opts: &FlowOptions,
) -> Result<Vec<f64>> {
    let levels = grid.nt + 1;
    let width = grid.x_max - grid.x_min;
    let lo = grid.x_min - 0.1 * width;
    let hi = grid.x_max + 0.1 * width;
    let mut paths = vec![0.0; start.len() * levels];
    paths
        .par_chunks_mut(levels)
        .enumerate()
        .try_for_each(|(p, path)| -> Result<()> {
            let (mut s, sign) = particle_stream(opts.seed, p, opts.antithetic, opts.first_step);
            let mut x = start.positions[p];
            path[0] = x;
            let dt = grid.dt();
            for k in 0..grid.nt {
                x += drift(k, x) * dt + sign * dt.sqrt() * s.normal();
                if !(lo..=hi).contains(&x) {
                    return Err(MflabError::Domain(format!(
                        "particle {p} reached {x:.3} at t = {:.4}, outside [{:.2}, {:.2}] + 10%",
                        grid.t(k + 1),
                        grid.x_min,
                        grid.x_max
                    )));
                }
                path[k + 1] = x;
            }
            Ok(())
        })?;
    Ok(paths)
}

/// Column `k` of a path-major buffer.
pub fn level_positions(paths: &[f64], levels: usize, k: usize) -> Vec<f64> {
    paths.iter().skip(k).step_by(levels).copied().collect()
}

/// Simulate the particle flow started from `initial`, driven by
/// `drift(k, x)` at local level `k`.
pub fn forward_flow(
    initial: &EmpiricalMeasure,
    drift: &(dyn Fn(usize, f64) -> f64 + Sync),
    grid: &SpaceTimeGrid,
    opts: &FlowOptions,
) -> Result<MeasureFlow> {
    let start = Particles::for_flow(initial, opts)?;
    flow_from_particles(&start, drift, grid, opts)
}

pub fn flow_from_particles(
    start: &Particles,
    drift: &(dyn Fn(usize, f64) -> f64 + Sync),
    grid: &SpaceTimeGrid,
    opts: &FlowOptions,
) -> Result<MeasureFlow> {
    let levels = grid.nt + 1;
    let paths = simulate_paths(start, drift, grid, opts)?;
    let stats: Vec<MeasureStats> = (0..levels)
        .into_par_iter()
        .map(|k| MeasureStats::of(&level_positions(&paths, levels, k), &start.weights))
        .collect();
    let snapshots = snapshot_levels(grid.nt, opts.snapshots)
        .into_iter()
        .map(|k| {
            let m = EmpiricalMeasure::new(1, level_positions(&paths, levels, k), start.weights.clone())?;
            Ok((k, m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasureFlow {
        times: (0..levels).map(|k| grid.t(k)).collect(),
        stats,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SpaceTimeGrid {
        SpaceTimeGrid::standard(0.0, 1.0, 0.01).unwrap()
    }

    #[test]
    fn brownian_second_moment() {
        let f = forward_flow(&EmpiricalMeasure::dirac(0.0), &|_, _| 0.0, &grid(), &FlowOptions::new(20_000, 3)).unwrap();
        for (k, s) in f.stats.iter().enumerate().skip(1) {
            let t = f.times[k];
            // Var of the sample second moment of N(0,t) is 2t²/P
            let se = (2.0 * t * t / 20_000.0).sqrt();
            assert!((s.second_moment - t).abs() < 4.0 * se, "{k}: {} vs {t}", s.second_moment);
        }
        for (_, m) in &f.snapshots {
            assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_drift_moves_mean() {
        let mut o = FlowOptions::new(20_000, 4);
        o.antithetic = true;
        let f = forward_flow(&EmpiricalMeasure::dirac(0.0), &|_, _| 1.0, &grid(), &o).unwrap();
        for (k, s) in f.stats.iter().enumerate() {
            assert!((s.mean - f.times[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn restart_reproduces_continuation() {
        let g = grid();
        let o = FlowOptions::new(64, 9);
        let drift = |_: usize, x: f64| -0.5 * x;
        let full = forward_flow(&EmpiricalMeasure::dirac(0.3), &drift, &g, &o).unwrap();
        let half = g.with_time(0.0, 0.5, 50).unwrap();
        let first = forward_flow(&EmpiricalMeasure::dirac(0.3), &drift, &half, &o).unwrap();
        let rest_grid = g.with_time(0.5, 1.0, 50).unwrap();
        let o2 = FlowOptions { first_step: 50, ..o };
        let rest = forward_flow(first.terminal(), &drift, &rest_grid, &o2).unwrap();
        assert_eq!(rest.terminal().positions(), full.terminal().positions());
    }

    #[test]
    fn escape_is_a_domain_error() {
        let g = SpaceTimeGrid::new(-1.0, 1.0, 21, 0.0, 1.0, 10).unwrap();
        let e = forward_flow(&EmpiricalMeasure::dirac(0.0), &|_, _| 10.0, &g, &FlowOptions::new(4, 0)).unwrap_err();
        assert_eq!(e.kind(), "domain");
    }
}
