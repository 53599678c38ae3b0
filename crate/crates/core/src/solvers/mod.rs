//! Exact solvers for the per-iteration subset problem
//!
//! ```text
//! minimise  1/2 v'Kv + c'v   over v in N_0^n,  1'v = s
//! ```
//!
//! (optionally with `v_j in {0, 1}`), plus the simplex-constrained quadratic
//! programme behind the optimal-weights diagnostic.
//!
//! All solvers break ties the same way: among solutions with equal objective
//! the one whose sorted index sequence is lexicographically smallest wins
//! (`{0, 1}` before `{0, 2}` before `{1, 1}` ...). Objectives are always
//! evaluated with [`IqpProblem::objective_of`] so that exact ties are detected
//! identically by every solver.

mod bnb;
mod simplex;

use std::cmp::Ordering;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bnb::{solve_branch_bound, BranchBoundOptions};
pub use simplex::{solve_simplex_qp, SimplexWeightSolution};

/// Hard cap on the number of solutions [`solve_exhaustive`] will enumerate.
pub const EXHAUSTIVE_LIMIT: u128 = 2_000_000;

/// Below this many candidate solutions, [`SolverKind::Auto`] enumerates.
pub const AUTO_EXHAUSTIVE_THRESHOLD: u128 = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct IqpProblem {
    k: DMatrix<f64>,
    c: Vec<f64>,
    s: usize,
    binary: bool,
}

impl IqpProblem {
    pub fn new(k: DMatrix<f64>, c: Vec<f64>, s: usize, binary: bool) -> Result<Self> {
        let n = c.len();
        if k.nrows() != n || k.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: k.nrows(),
            });
        }
        if n == 0 {
            return Err(Error::DegenerateData("empty subset problem".into()));
        }
        if s == 0 {
            return Err(Error::Config("cardinality s must be >= 1".into()));
        }
        if binary && s > n {
            return Err(Error::Config(format!(
                "cannot select {s} distinct points from {n} candidates"
            )));
        }
        if k.iter().chain(&c).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateData("non-finite entry in subset problem".into()));
        }
        let scale = k.amax().max(1.0);
        for i in 0..n {
            for j in i + 1..n {
                if (k[(i, j)] - k[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Config(format!("K is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { k, c, s, binary })
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn binary(&self) -> bool {
        self.binary
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// Number of feasible solutions, saturating at `u128::MAX`.
    pub fn feasible_count(&self) -> u128 {
        if self.binary {
            binomial(self.n() as u128, self.s as u128)
        } else {
            binomial((self.n() + self.s - 1) as u128, self.s as u128)
        }
    }

    /// `1/2 v'Kv + c'v` for the multiset given as a sorted index sequence.
    pub fn objective_of(&self, sorted: &[usize]) -> f64 {
        let mut support: Vec<(usize, f64)> = Vec::with_capacity(sorted.len());
        for &i in sorted {
            match support.last_mut() {
                Some((j, count)) if *j == i => *count += 1.0,
                _ => support.push((i, 1.0)),
            }
        }
        let mut quad = 0.0;
        let mut lin = 0.0;
        for &(a, va) in &support {
            for &(b, vb) in &support {
                quad += va * vb * self.k[(a, b)];
            }
            lin += self.c[a] * va;
        }
        0.5 * quad + lin
    }

    /// `1/2 v'Kv + c'v` for a count vector.
    pub fn objective(&self, v: &[usize]) -> f64 {
        self.objective_of(&counts_to_indices(v))
    }

    pub(crate) fn solution(&self, sorted: Vec<usize>, nodes: u64, proof: Proof) -> IqpSolution {
        let objective = self.objective_of(&sorted);
        let mut v = vec![0usize; self.n()];
        for &i in &sorted {
            v[i] += 1;
        }
        IqpSolution {
            v,
            indices: sorted,
            objective,
            nodes_explored: nodes,
            proof,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Proof {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IqpSolution {
    /// Copies of each candidate.
    pub v: Vec<usize>,
    /// The same multiset as a sorted index sequence.
    pub indices: Vec<usize>,
    pub objective: f64,
    pub nodes_explored: u64,
    pub proof: Proof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Auto,
    Exhaustive,
    Bnb,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverOptions {
    pub kind: SolverKind,
    pub binary: bool,
    pub bnb: BranchBoundOptions,
}

/// Solves with the configured solver; `Auto` enumerates small instances and
/// runs branch-and-bound otherwise.
pub fn solve(problem: &IqpProblem, opts: &SolverOptions) -> Result<IqpSolution> {
    match opts.kind {
        SolverKind::Exhaustive => solve_exhaustive(problem),
        SolverKind::Bnb => Ok(solve_branch_bound(problem, &opts.bnb)),
        SolverKind::Auto if problem.feasible_count() <= AUTO_EXHAUSTIVE_THRESHOLD => solve_exhaustive(problem),
        SolverKind::Auto => Ok(solve_branch_bound(problem, &opts.bnb)),
    }
}

/// Enumerates every feasible multiset (or subset in binary mode).
pub fn solve_exhaustive(problem: &IqpProblem) -> Result<IqpSolution> {
    let count = problem.feasible_count();
    if count > EXHAUSTIVE_LIMIT {
        return Err(Error::InstanceTooLarge {
            count,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let (n, s) = (problem.n(), problem.s());
    let step = usize::from(problem.binary);
    // lexicographic enumeration of sorted index sequences
    let mut seq: Vec<usize> = (0..s).map(|i| i * step).collect();
    let mut best = seq.clone();
    let mut best_obj = problem.objective_of(&seq);
    let mut visited = 1u64;
    loop {
        // advance to the next sequence
        let mut pos = s;
        loop {
            if pos == 0 {
                return Ok(problem.solution(best, visited, Proof::Exact));
            }
            pos -= 1;
            let max_here = n - 1 - (s - 1 - pos) * step;
            if seq[pos] < max_here {
                break;
            }
        }
        seq[pos] += 1;
        for i in pos + 1..s {
            seq[i] = seq[i - 1] + step;
        }
        visited += 1;
        let obj = problem.objective_of(&seq);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&seq);
        }
    }
}

/// Strict "is (a_obj, a_seq) better than (b_obj, b_seq)" under the shared tie-break.
pub(crate) fn better(a_obj: f64, a_seq: &[usize], b_obj: f64, b_seq: &[usize]) -> bool {
    match a_obj.partial_cmp(&b_obj) {
        Some(Ordering::Less) => true,
        Some(Ordering::Equal) => a_seq < b_seq,
        _ => false,
    }
}

pub(crate) fn counts_to_indices(v: &[usize]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .flat_map(|(i, &count)| std::iter::repeat_n(i, count))
        .collect()
}

pub(crate) fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}
