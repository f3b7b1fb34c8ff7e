//! Weighted empirical measures on R^d, exact one-dimensional Wasserstein
//! distances, moments, sampling and serialization.
//!
//! Distances are computed by merging the two sorted atom lists along their
//! quantile functions, so unequal weights and coincident atoms are fine.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{MflabError, Result};
use crate::rng::{tags, StreamKey};

/// Tolerance on the total mass of a measure.
pub const MASS_TOL: f64 = 1e-12;

/// Neumaier-compensated sum.
pub fn compensated_sum<'a>(xs: impl IntoIterator<Item = &'a f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for &x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

/// Weighted atom list on R^d.  Positions are stored flat, `dim` per atom.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    positions: Vec<f64>,
    weights: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, positions: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(MflabError::Dim("dimension must be positive".into()));
        }
        if weights.is_empty() {
            return Err(MflabError::Empty("measure has no atoms".into()));
        }
        if positions.len() != dim * weights.len() {
            return Err(MflabError::Dim(format!(
                "{} coordinates for {} atoms of dimension {dim}",
                positions.len(),
                weights.len()
            )));
        }
        if let Some(p) = positions.iter().find(|p| !p.is_finite()) {
            return Err(MflabError::Invalid(format!("non-finite position {p}")));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(MflabError::Invalid(format!("invalid weight {w}")));
        }
        let total = compensated_sum(&weights);
        if (total - 1.0).abs() > MASS_TOL {
            return Err(MflabError::Invalid(format!(
                "weights sum to {total:.17}, not 1"
            )));
        }
        Ok(EmpiricalMeasure {
            dim,
            positions,
            weights,
        })
    }

    /// One-dimensional measure from points and weights.
    pub fn from_points(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::new(1, points, weights)
    }

    /// Equally weighted one-dimensional measure.
    pub fn uniform(points: Vec<f64>) -> Result<Self> {
        equal_weights(points)
    }

    pub fn dirac(x: f64) -> Self {
        EmpiricalMeasure {
            dim: 1,
            positions: vec![x],
            weights: vec![1.0],
        }
    }

    pub fn dirac_d(x: &[f64]) -> Result<Self> {
        Self::new(x.len(), x.to_vec(), vec![1.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Flat coordinate array (`dim` entries per atom).
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.positions
            .chunks(self.dim)
            .zip(self.weights.iter().copied())
    }

    fn require_1d(&self, what: &str) -> Result<()> {
        if self.dim != 1 {
            return Err(MflabError::Dim(format!("{what} needs a 1-d measure, got d={}", self.dim)));
        }
        Ok(())
    }

    /// Image of the measure under `f`, weights unchanged.
    pub fn push_forward(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut positions = Vec::with_capacity(self.positions.len());
        for p in self.positions.chunks(self.dim) {
            let q = f(p);
            if q.len() != self.dim {
                return Err(MflabError::Dim("push-forward changed dimension".into()));
            }
            positions.extend(q);
        }
        Self::new(self.dim, positions, self.weights.clone())
    }

    /// Copy with atom `i` moved by `shift` (1-d).
    pub fn with_shifted_atom(&self, i: usize, shift: f64) -> Result<Self> {
        self.require_1d("atom shift")?;
        if i >= self.len() {
            return Err(MflabError::Range(format!("atom {i} of {}", self.len())));
        }
        let mut m = self.clone();
        m.positions[i] += shift;
        Ok(m)
    }

    /// Integral of `f` against the measure.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let terms: Vec<f64> = self.atoms().map(|(x, w)| w * f(x)).collect();
        compensated_sum(&terms)
    }

    /// Hash of the ordered atom list, positions rounded to 1e-9.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ self.dim as u64;
        let mut eat = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
            h ^= h >> 29;
        };
        eat(self.len() as u64);
        for (x, w) in self.atoms() {
            for c in x {
                eat((c * 1e9).round() as i64 as u64);
            }
            eat(w.to_bits());
        }
        h
    }

    /// Moments in one pass (1-d).
    pub fn stats(&self) -> Result<MeasureStats> {
        self.require_1d("moments")?;
        Ok(MeasureStats::of(&self.positions, &self.weights))
    }

    pub fn functional(&self, kind: Functional) -> Result<f64> {
        if kind == Functional::SecondMoment {
            return Ok(self.integrate(|x| x.iter().map(|c| c * c).sum()));
        }
        let s = self.stats()?;
        Ok(match kind {
            Functional::Mean => s.mean,
            Functional::SecondMoment => s.second_moment,
            Functional::AbsDeviation => s.abs_deviation,
        })
    }

    /// One-dimensional atoms sorted by position: `(x, w)` pairs.
    pub fn sorted_1d(&self) -> Result<Vec<(f64, f64)>> {
        self.require_1d("sorting")?;
        let mut v: Vec<(f64, f64)> = self
            .positions
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(v)
    }

    /// CSV with columns `position_0..position_{d-1}, weight`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let mut header: Vec<String> = (0..self.dim).map(|k| format!("position_{k}")).collect();
        header.push("weight".into());
        wtr.write_record(&header)?;
        for (x, wt) in self.atoms() {
            let mut rec: Vec<String> = x.iter().map(|c| format!("{c:?}")).collect();
            rec.push(format!("{wt:?}"));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        let dim = header.len().saturating_sub(1);
        for (k, name) in header.iter().enumerate() {
            let expected = if k == dim { "weight".to_string() } else { format!("position_{k}") };
            if name != expected {
                return Err(MflabError::Invalid(format!("unexpected column `{name}`")));
            }
        }
        let mut positions = Vec::new();
        let mut weights = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            for (k, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| MflabError::Invalid(format!("bad number `{field}`")))?;
                if k == dim {
                    weights.push(v);
                } else {
                    positions.push(v);
                }
            }
        }
        Self::new(dim, positions, weights)
    }

    pub fn to_json(&self) -> Result<String> {
        let atoms: Vec<AtomRecord> = self
            .atoms()
            .map(|(x, w)| AtomRecord {
                position: x.to_vec(),
                weight: w,
            })
            .collect();
        Ok(serde_json::to_string_pretty(&atoms)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let atoms: Vec<AtomRecord> = serde_json::from_str(s)?;
        let dim = atoms.first().map(|a| a.position.len()).ok_or_else(|| MflabError::Empty("no atoms".into()))?;
        let mut positions = Vec::with_capacity(dim * atoms.len());
        let mut weights = Vec::with_capacity(atoms.len());
        for a in atoms {
            if a.position.len() != dim {
                return Err(MflabError::Dim("inconsistent atom dimensions".into()));
            }
            positions.extend(a.position);
            weights.push(a.weight);
        }
        Self::new(dim, positions, weights)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// JSON atom record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomRecord {
    pub position: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Mean,
    SecondMoment,
    AbsDeviation,
}

/// Mean, second moment and mean absolute deviation of a 1-d measure.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct MeasureStats {
    pub mean: f64,
    pub second_moment: f64,
    pub abs_deviation: f64,
}

impl MeasureStats {
    pub fn of(points: &[f64], weights: &[f64]) -> Self {
        let mut m = 0.0;
        let mut m2 = 0.0;
        for (x, w) in points.iter().zip(weights) {
            m += w * x;
            m2 += w * x * x;
        }
        let mut ad = 0.0;
        for (x, w) in points.iter().zip(weights) {
            ad += w * (x - m).abs();
        }
        MeasureStats {
            mean: m,
            second_moment: m2,
            abs_deviation: ad,
        }
    }
}

fn check_pair(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<()> {
    if mu.dim() != 1 || nu.dim() != 1 {
        return Err(MflabError::Dim(format!(
            "distances are 1-d only (got {} and {})",
            mu.dim(),
            nu.dim()
        )));
    }
    if mu.is_empty() || nu.is_empty() {
        return Err(MflabError::Empty("measure has no atoms".into()));
    }
    Ok(())
}

/// `∫_0^1 |Q_a(u) - Q_b(u)|^p du` for sorted `(x, w)` lists.
pub fn wp_pow_sorted(a: &[(f64, f64)], b: &[(f64, f64)], p: f64) -> f64 {
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut acc = 0.0;
    loop {
        let m = ra.min(rb);
        let d = (a[i].0 - b[j].0).abs();
        if m > 0.0 && d > 0.0 {
            acc += m * if p == 1.0 { d } else if p == 2.0 { d * d } else { d.powf(p) };
        }
        ra -= m;
        rb -= m;
        if ra <= 0.0 {
            i += 1;
            if i == a.len() {
                break;
            }
            ra = a[i].1;
        }
        if rb <= 0.0 {
            j += 1;
            if j == b.len() {
                break;
            }
            rb = b[j].1;
        }
    }
    acc
}

/// Exact W1 between two 1-d measures.
pub fn w1_distance(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    check_pair(mu, nu)?;
    Ok(wp_pow_sorted(&mu.sorted_1d()?, &nu.sorted_1d()?, 1.0))
}

/// Exact W2 between two 1-d measures via the comonotone coupling.
pub fn w2_distance(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    check_pair(mu, nu)?;
    Ok(wp_pow_sorted(&mu.sorted_1d()?, &nu.sorted_1d()?, 2.0).sqrt())
}

/// Law on the real line used for initial data and probes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Dirac { x: f64 },
    Gaussian { mean: f64, var: f64 },
    Uniform { a: f64, b: f64 },
    Mixture { components: Vec<(f64, DistributionSpec)> },
}

impl DistributionSpec {
    pub fn standard_normal() -> Self {
        DistributionSpec::Gaussian { mean: 0.0, var: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::Dirac { x } if !x.is_finite() => {
                Err(MflabError::Invalid("dirac location must be finite".into()))
            }
            DistributionSpec::Gaussian { var, mean } if !(*var > 0.0) || !mean.is_finite() => {
                Err(MflabError::Invalid(format!("gaussian variance must be positive, got {var}")))
            }
            DistributionSpec::Uniform { a, b } if !(a < b) => {
                Err(MflabError::Invalid(format!("uniform needs a < b, got [{a}, {b}]")))
            }
            DistributionSpec::Mixture { components } => {
                if components.is_empty() {
                    return Err(MflabError::Empty("mixture without components".into()));
                }
                let total: f64 = components.iter().map(|c| c.0).sum();
                if (total - 1.0).abs() > 1e-12 || components.iter().any(|c| c.0 < 0.0) {
                    return Err(MflabError::Invalid(format!("mixture weights sum to {total}")));
                }
                components.iter().try_for_each(|c| c.1.validate())
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            DistributionSpec::Dirac { x } => *x,
            DistributionSpec::Gaussian { mean, .. } => *mean,
            DistributionSpec::Uniform { a, b } => 0.5 * (a + b),
            DistributionSpec::Mixture { components } => components.iter().map(|(w, c)| w * c.mean()).sum(),
        }
    }

    /// `E|X|^q`.
    pub fn abs_moment(&self, q: f64) -> f64 {
        match self {
            DistributionSpec::Dirac { x } => x.abs().powf(q),
            DistributionSpec::Uniform { a, b } => {
                let f = |x: f64| x.signum() * x.abs().powf(q + 1.0) / (q + 1.0);
                (f(*b) - f(*a)) / (b - a)
            }
            DistributionSpec::Gaussian { mean, var } => {
                let s = var.sqrt();
                crate::quadrature::normal_expectation(64, |z| (mean + s * z).abs().powf(q))
            }
            DistributionSpec::Mixture { components } => {
                components.iter().map(|(w, c)| w * c.abs_moment(q)).sum()
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            DistributionSpec::Dirac { x: x0 } => {
                if x >= *x0 {
                    1.0
                } else {
                    0.0
                }
            }
            DistributionSpec::Gaussian { mean, var } => normal(*mean, *var).cdf(x),
            DistributionSpec::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            DistributionSpec::Mixture { components } => components.iter().map(|(w, c)| w * c.cdf(x)).sum(),
        }
    }

    /// `Ψ(x) = ∫_{-∞}^x F(s) ds`.
    pub fn integrated_cdf(&self, x: f64) -> f64 {
        match self {
            DistributionSpec::Dirac { x: x0 } => (x - x0).max(0.0),
            DistributionSpec::Gaussian { mean, var } => {
                let s = var.sqrt();
                let z = (x - mean) / s;
                let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
                (x - mean) * normal(0.0, 1.0).cdf(z) + s * phi
            }
            DistributionSpec::Uniform { a, b } => {
                if x <= *a {
                    0.0
                } else if x < *b {
                    (x - a) * (x - a) / (2.0 * (b - a))
                } else {
                    x - 0.5 * (a + b)
                }
            }
            DistributionSpec::Mixture { components } => {
                components.iter().map(|(w, c)| w * c.integrated_cdf(x)).sum()
            }
        }
    }

    /// Generalized inverse `inf{x : F(x) ≥ u}`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            DistributionSpec::Dirac { x } => *x,
            DistributionSpec::Gaussian { mean, var } => {
                normal(*mean, *var).inverse_cdf(u.clamp(1e-300, 1.0 - 1e-16))
            }
            DistributionSpec::Uniform { a, b } => a + u.clamp(0.0, 1.0) * (b - a),
            DistributionSpec::Mixture { components } => {
                let qs: Vec<f64> = components.iter().map(|(_, c)| c.quantile(u)).collect();
                let mut lo = qs.iter().cloned().fold(f64::INFINITY, f64::min);
                let mut hi = qs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if self.cdf(lo) >= u {
                    return lo;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) >= u {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
                        break;
                    }
                }
                hi
            }
        }
    }

    pub(crate) fn draw(&self, stream: &mut crate::rng::Stream) -> f64 {
        match self {
            DistributionSpec::Dirac { x } => *x,
            DistributionSpec::Gaussian { mean, var } => mean + var.sqrt() * stream.normal(),
            DistributionSpec::Uniform { a, b } => a + (b - a) * (1.0 - stream.uniform()),
            DistributionSpec::Mixture { components } => {
                let u = stream.uniform();
                let mut acc = 0.0;
                for (w, c) in components {
                    acc += w;
                    if u <= acc {
                        return c.draw(stream);
                    }
                }
                components.last().expect("validated").1.draw(stream)
            }
        }
    }

    /// Deterministic `n`-point approximation at the mid-quantiles `(k+½)/n`.
    pub fn quantile_grid(&self, n: usize) -> Result<EmpiricalMeasure> {
        self.validate()?;
        if n == 0 {
            return Err(MflabError::Empty("n = 0".into()));
        }
        let pts: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|k| self.quantile((k as f64 + 0.5) / n as f64))
            .collect();
        equal_weights(pts)
    }
}

fn normal(mean: f64, var: f64) -> Normal {
    Normal::new(mean, var.sqrt()).expect("validated gaussian")
}

/// Equally weighted 1-d measure.
pub fn equal_weights(points: Vec<f64>) -> Result<EmpiricalMeasure> {
    let n = points.len();
    if n == 0 {
        return Err(MflabError::Empty("no points".into()));
    }
    let weights = vec![1.0 / n as f64; n];
    EmpiricalMeasure::new(1, points, weights)
}

/// `n` equally weighted iid draws from `spec`; atom `k` uses its own stream,
/// so the output does not depend on the thread count.
pub fn sample(spec: &DistributionSpec, n: usize, seed: u64) -> Result<EmpiricalMeasure> {
    spec.validate()?;
    if n == 0 {
        return Err(MflabError::Empty("sample size 0".into()));
    }
    let key = StreamKey::root(seed).child(tags::SAMPLE);
    let pts: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| spec.draw(&mut key.child(k as u64).stream()))
        .collect();
    equal_weights(pts)
}

/// Exact W1 between a 1-d measure and a law given by its CDF, as the area
/// `∫|F_μ - F|`.
pub fn w1_to_law(mu: &EmpiricalMeasure, law: &DistributionSpec) -> Result<f64> {
    let atoms = mu.sorted_1d()?;
    let psi = |x: f64| law.integrated_cdf(x);
    let mean = law.mean();
    // left tail: ∫_{-∞}^{x_1} F
    let mut acc = psi(atoms[0].0);
    let mut c = 0.0;
    for k in 0..atoms.len() {
        c += atoms[k].1;
        let a = atoms[k].0;
        if k + 1 == atoms.len() {
            // right tail: ∫_{x_N}^∞ (1 - F) = mean - x_N + Ψ(x_N)
            acc += (mean - a + psi(a)).max(0.0);
            break;
        }
        let b = atoms[k + 1].0;
        if b <= a {
            continue;
        }
        let c = c.min(1.0);
        let (fa, fb) = (law.cdf(a), law.cdf(b));
        let (pa, pb) = (psi(a), psi(b));
        acc += if c <= fa {
            (pb - pa) - c * (b - a)
        } else if c >= fb {
            c * (b - a) - (pb - pa)
        } else {
            let q = law.quantile(c).clamp(a, b);
            let pq = psi(q);
            (c * (q - a) - (pq - pa)) + ((pb - pq) - c * (b - q))
        };
    }
    Ok(acc.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(points: &[f64], weights: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::from_points(points.to_vec(), weights.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        let d0 = EmpiricalMeasure::dirac(0.0);
        let d1 = EmpiricalMeasure::dirac(1.0);
        assert_eq!(w1_distance(&d0, &d1).unwrap(), 1.0);
        assert_eq!(w2_distance(&d0, &d1).unwrap(), 1.0);
        let mix = m(&[0.0, 2.0], &[0.5, 0.5]);
        assert!((w1_distance(&mix, &d1).unwrap() - 1.0).abs() < 1e-15);
        assert!((w2_distance(&mix, &d1).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(w1_distance(&mix, &mix).unwrap(), 0.0);
        for mm in [4.0f64, 7.0, 16.0] {
            let a = EmpiricalMeasure::dirac((mm + 2.0) / (2.0 * mm * mm));
            let b = EmpiricalMeasure::dirac((mm - 2.0) / (2.0 * mm * mm));
            assert!((w2_distance(&a, &b).unwrap() - 2.0 / (mm * mm)).abs() < 1e-15);
        }
    }

    #[test]
    fn errors() {
        let d2 = EmpiricalMeasure::dirac_d(&[0.0, 1.0]).unwrap();
        let d1 = EmpiricalMeasure::dirac(0.0);
        assert_eq!(w1_distance(&d2, &d1).unwrap_err().kind(), "dim");
        assert_eq!(EmpiricalMeasure::from_points(vec![], vec![]).unwrap_err().kind(), "empty");
        assert!(EmpiricalMeasure::from_points(vec![0.0, 1.0], vec![0.5, 0.5 + 1e-9]).is_err());
        assert!(EmpiricalMeasure::from_points(vec![0.0, 1.0], vec![1.5, -0.5]).is_err());
        assert_eq!(sample(&DistributionSpec::standard_normal(), 0, 1).unwrap_err().kind(), "empty");
    }

    #[test]
    fn functionals() {
        let sym = m(&[-1.0, 1.0], &[0.5, 0.5]);
        assert_eq!(sym.functional(Functional::Mean).unwrap(), 0.0);
        assert_eq!(sym.functional(Functional::AbsDeviation).unwrap(), 1.0);
        assert_eq!(EmpiricalMeasure::dirac(2.0).functional(Functional::SecondMoment).unwrap(), 4.0);
    }

    #[test]
    fn sampling() {
        let s = sample(&DistributionSpec::Dirac { x: 3.0 }, 5, 9).unwrap();
        assert!(s.atoms().all(|(x, w)| x[0] == 3.0 && w == 0.2));
        let a = sample(&DistributionSpec::standard_normal(), 1000, 4).unwrap();
        let b = sample(&DistributionSpec::standard_normal(), 1000, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn w1_to_law_matches_large_grid() {
        let law = DistributionSpec::standard_normal();
        let s = sample(&law, 200, 3).unwrap();
        let exact = w1_to_law(&s, &law).unwrap();
        let proxy = w1_distance(&s, &law.quantile_grid(400_000).unwrap()).unwrap();
        assert!((exact - proxy).abs() < 2e-4, "{exact} {proxy}");
        let u = DistributionSpec::Uniform { a: 0.0, b: 1.0 };
        let s = sample(&u, 100, 5).unwrap();
        let exact = w1_to_law(&s, &u).unwrap();
        let proxy = w1_distance(&s, &u.quantile_grid(200_000).unwrap()).unwrap();
        assert!((exact - proxy).abs() < 1e-5, "{exact} {proxy}");
    }

    #[test]
    fn round_trips() {
        let s = sample(&DistributionSpec::standard_normal(), 50, 2).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(EmpiricalMeasure::read_csv(&buf[..]).unwrap(), s);
        assert_eq!(EmpiricalMeasure::from_json(&s.to_json().unwrap()).unwrap(), s);
    }
}
