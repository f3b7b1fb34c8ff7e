//! The value function `V(t, x, μ)` by backward stitching over a time
//! partition.
//!
//! `V(T, ·, ·) = G`.  On an interval `[t_j, t_{j+1}]` the local problem uses
//! `V(t_{j+1}, ·, ·)` as terminal data, which is itself evaluated lazily by
//! a local solve started from whatever terminal measure the Picard iterate
//! produces.  Solves are memoized on `(first step, last step, fingerprint)`.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};

use super::picard::{picard_local, LocalSolution, TermTerminal};
use super::problem::MfgProblem;
use crate::error::{MflabError, Result};
use crate::measures::EmpiricalMeasure;

type Key = (usize, usize, u64);

struct Memo {
    map: HashMap<Key, Arc<LocalSolution>>,
    order: VecDeque<Key>,
    capacity: usize,
}

impl Memo {
    fn get(&self, k: &Key) -> Option<Arc<LocalSolution>> {
        self.map.get(k).cloned()
    }

    fn insert(&mut self, k: Key, v: Arc<LocalSolution>) -> Arc<LocalSolution> {
        if let Some(existing) = self.map.get(&k) {
            return existing.clone();
        }
        if self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.map.remove(&old);
            }
        }
        self.order.push_back(k);
        self.map.insert(k, v.clone());
        v
    }
}

/// `x ↦ V(t, x, μ)` for a fixed `(t, μ)`.
pub enum Section<'a> {
    Terminal(crate::hjb::BoundTerm<'a>),
    Solved(Arc<LocalSolution>),
}

impl Section<'_> {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Section::Terminal(b) => b.eval(x),
            Section::Solved(s) => s.value(x),
        }
    }

    pub fn grad(&self, x: f64) -> f64 {
        match self {
            Section::Terminal(b) => b.dx(x),
            Section::Solved(s) => s.grad(x),
        }
    }

    pub fn local(&self) -> Option<&Arc<LocalSolution>> {
        match self {
            Section::Solved(s) => Some(s),
            Section::Terminal(_) => None,
        }
    }
}

pub struct ValueFunction {
    problem: MfgProblem,
    partition: Mutex<Vec<usize>>,
    seed: u64,
    memo: Mutex<Memo>,
    failure: Mutex<Option<(usize, usize)>>,
}

/// Build `V` on a `K`-interval partition of `[0, T]`.
pub fn solve_value(problem: &MfgProblem, partition_count: usize, seed: u64) -> Result<ValueFunction> {
    ValueFunction::new(problem.clone(), partition_count, seed)
}

impl ValueFunction {
    pub fn new(problem: MfgProblem, partition_count: usize, seed: u64) -> Result<Self> {
        problem.validate()?;
        let n = problem.steps();
        if partition_count == 0 || partition_count > n {
            return Err(MflabError::Invalid(format!(
                "partition count must lie in 1..={n}, got {partition_count}"
            )));
        }
        let mut partition: Vec<usize> = (0..=partition_count)
            .map(|j| (j * n + partition_count / 2) / partition_count)
            .collect();
        partition[partition_count] = n;
        partition.dedup();
        Ok(ValueFunction {
            problem,
            partition: Mutex::new(partition),
            seed,
            memo: Mutex::new(Memo {
                map: HashMap::new(),
                order: VecDeque::new(),
                capacity: 16,
            }),
            failure: Mutex::new(None),
        })
    }

    pub fn problem(&self) -> &MfgProblem {
        &self.problem
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Current partition points as times (refined after non-contraction).
    pub fn partition(&self) -> Vec<f64> {
        self.points().iter().map(|&s| self.problem.time(s)).collect()
    }

    pub fn with_memo_capacity(self, capacity: usize) -> Self {
        self.memo.lock().expect("memo lock").capacity = capacity.max(1);
        self
    }

    fn points(&self) -> Vec<usize> {
        self.partition.lock().expect("partition lock").clone()
    }

    fn next_point(points: &[usize], step: usize) -> usize {
        *points.iter().find(|&&s| s > step).expect("step below T")
    }

    /// `x ↦ V(t, x, μ)`.
    ///
    /// A local solve that fails to contract splits its interval at the
    /// midpoint and the evaluation restarts on the refined partition.
    pub fn section(&self, t: f64, mu: &EmpiricalMeasure) -> Result<Section<'_>> {
        let k = self.problem.step_of(t)?;
        if k == self.problem.steps() {
            return Ok(Section::Terminal(self.problem.coupling.terminal.bind(mu)?));
        }
        let initial = self.points().len() - 1;
        let budget = self.problem.picard.max_halvings * initial;
        loop {
            let points = self.points();
            let j = points.iter().rposition(|&s| s <= k).unwrap_or(0);
            match self.solve_interval(&points, k, Self::next_point(&points, k), mu) {
                Ok(s) => return Ok(Section::Solved(s)),
                Err(MflabError::NoContraction { gaps }) => {
                    let failed = self.failure.lock().expect("failure lock").take();
                    let refined = points.len() - 1 - initial;
                    match failed {
                        Some((a, b)) if b - a >= 2 && refined < budget => {
                            let mid = a + (b - a) / 2;
                            let mut p = self.partition.lock().expect("partition lock");
                            if let Err(pos) = p.binary_search(&mid) {
                                p.insert(pos, mid);
                            }
                            drop(p);
                            let mut memo = self.memo.lock().expect("memo lock");
                            memo.map.clear();
                            memo.order.clear();
                        }
                        _ => return Err(MflabError::NoContraction { gaps }.in_interval(j)),
                    }
                }
                Err(e) => return Err(e.in_interval(j)),
            }
        }
    }

    pub fn eval(&self, t: f64, x: f64, mu: &EmpiricalMeasure) -> Result<f64> {
        Ok(self.section(t, mu)?.value(x))
    }

    pub fn eval_many(&self, t: f64, xs: &[f64], mu: &EmpiricalMeasure) -> Result<Vec<f64>> {
        let s = self.section(t, mu)?;
        Ok(xs.iter().map(|&x| s.value(x)).collect())
    }

    /// `∂x V(t, x, μ)` from the local field.
    pub fn grad_x(&self, t: f64, x: f64, mu: &EmpiricalMeasure) -> Result<f64> {
        Ok(self.section(t, mu)?.grad(x))
    }

    /// The local solve started at `(t, μ)`; `None` at `t = T`.
    pub fn local(&self, t: f64, mu: &EmpiricalMeasure) -> Result<Option<Arc<LocalSolution>>> {
        Ok(self.section(t, mu)?.local().cloned())
    }

    fn solve_interval(&self, points: &[usize], a: usize, b: usize, mu: &EmpiricalMeasure) -> Result<Arc<LocalSolution>> {
        let key = (a, b, mu.fingerprint());
        if let Some(hit) = self.memo.lock().expect("memo lock").get(&key) {
            return Ok(hit);
        }
        let result = if b == self.problem.steps() {
            picard_local(&self.problem, mu, a, b, &TermTerminal(&self.problem.coupling.terminal), self.seed)
        } else {
            let next = Self::next_point(points, b);
            let downstream = |rho: &EmpiricalMeasure, xs: &[f64]| -> Result<Vec<f64>> {
                let sol = self.solve_interval(points, b, next, rho)?;
                Ok(xs.iter().map(|&x| sol.value(x)).collect())
            };
            picard_local(&self.problem, mu, a, b, &downstream, self.seed)
        };
        match result {
            Ok(sol) => Ok(self.memo.lock().expect("memo lock").insert(key, Arc::new(sol))),
            Err(e @ MflabError::NoContraction { .. }) => {
                // innermost failure wins; outer intervals only see it propagate
                self.failure.lock().expect("failure lock").get_or_insert((a, b));
                Err(e)
            }
            Err(e) => Err(e),
        }
    }
}
