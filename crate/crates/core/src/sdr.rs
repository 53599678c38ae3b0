//! Semidefinite relaxation of the binary subset problem, solved approximately
//! with a low-rank factorisation and rounded with random hyperplanes.
//!
//! Writing `t = 2v - 1` for a binary `v` with `s` ones, the subset objective
//! `1/2 v'Kv + c'v` equals `M . A / 4` for the lifted rank-one matrix
//! `M = [1; t][1; t]'`, and the cardinality constraint becomes `M . B = 2s - n`.
//! Relaxing `M` to any PSD matrix with unit diagonal gives the SDP; here
//! `M = UU'` with unit-norm rows of `U`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SdrProblem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    s: usize,
    n: usize,
    k: DMatrix<f64>,
    c: Vec<f64>,
}

impl SdrProblem {
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Right-hand side of the cardinality constraint, `2s - n`.
    pub fn cardinality_rhs(&self) -> f64 {
        2.0 * self.s as f64 - self.n as f64
    }

    /// Offset between `M . A / 4` and the subset objective (zero with this assembly).
    pub fn constant(&self) -> f64 {
        0.0
    }

    /// `1/2 v'Kv + c'v` for a sorted set of distinct indices.
    pub fn objective_of(&self, indices: &[usize]) -> f64 {
        let mut quad = 0.0;
        for &i in indices {
            for &j in indices {
                quad += self.k[(i, j)];
            }
        }
        0.5 * quad + indices.iter().map(|&i| self.c[i]).sum::<f64>()
    }
}

/// Builds the lifted cost and constraint matrices for `min 1/2 v'Kv + c'v`,
/// `v` binary with `s` ones.
pub fn sdr_assemble(k: &DMatrix<f64>, c: &[f64], s: usize) -> Result<SdrProblem> {
    let n = c.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::ShapeMismatch {
            what: "cost matrix".into(),
            expected: n,
            found: k.nrows(),
        });
    }
    if s == 0 || s > n {
        return Err(Error::Config(format!("cardinality {s} must lie in 1..={n}")));
    }
    let q = k * 0.5;
    let q1: Vec<f64> = (0..n).map(|i| q.row(i).sum()).collect();
    let mut a = DMatrix::zeros(n + 1, n + 1);
    a[(0, 0)] = q1.iter().sum::<f64>() + 2.0 * c.iter().sum::<f64>();
    for i in 0..n {
        let border = q1[i] + c[i];
        a[(0, i + 1)] = border;
        a[(i + 1, 0)] = border;
    }
    a.view_mut((1, 1), (n, n)).copy_from(&q);
    let mut b = DMatrix::zeros(n + 1, n + 1);
    for i in 1..=n {
        b[(0, i)] = 0.5;
        b[(i, 0)] = 0.5;
    }
    Ok(SdrProblem {
        a,
        b,
        s,
        n,
        k: k.clone(),
        c: c.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SdrOptions {
    /// Factor rank; `None` uses `min(n + 1, 25)`.
    pub rank: Option<usize>,
    /// Rounding draws.
    pub draws: usize,
    /// Allowed violation of the cardinality constraint.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SdrOptions {
    fn default() -> Self {
        Self {
            rank: None,
            draws: 200,
            tol: 1e-6,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor {
    /// `(n + 1) x r`, unit-norm rows.
    pub u: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `(UU') . A` at return.
    pub objective: f64,
    /// `(UU') . B - (2s - n)` at return.
    pub violation: f64,
    /// Penalised merit after each accepted step, with the penalty weight in force.
    pub history: Vec<(f64, f64)>,
}

/// Locally minimises `(UU') . A` over unit-row factors subject to the
/// cardinality constraint, by projected gradient descent on a quadratic
/// penalty whose weight doubles whenever progress at the current weight stalls
/// or a fixed number of steps pass without feasibility.
pub fn sdr_solve_lowrank(problem: &SdrProblem, rank: usize, max_iter: usize, tol: f64, seed: u64) -> Result<LowRankFactor> {
    if rank < 2 {
        return Err(Error::Config("factor rank must be at least 2".into()));
    }
    let dim = problem.n + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = DMatrix::from_fn(dim, rank, |_, _| rng.sample::<f64, _>(StandardNormal));
    normalise_rows(&mut u);

    let rhs = problem.cardinality_rhs();
    let scale = problem.a.amax().max(1.0);
    let mut rho = scale / dim as f64;
    let eval = |u: &DMatrix<f64>, rho: f64| {
        let au = &problem.a * u;
        let bu = &problem.b * u;
        let obj = u.dot(&au);
        let viol = u.dot(&bu) - rhs;
        (obj + 0.5 * rho * viol * viol, obj, viol, au, bu)
    };

    const PHASE: usize = 100;
    let mut step = 1.0 / scale;
    let mut history = Vec::new();
    let mut phase_iters = 0;
    let mut converged = false;
    let mut iterations = 0;
    let (mut merit, mut obj, mut viol, mut au, mut bu) = eval(&u, rho);

    while iterations < max_iter {
        iterations += 1;
        phase_iters += 1;
        // Riemannian gradient on the product of spheres
        let mut g = &au * 2.0 + &bu * (2.0 * rho * viol);
        for i in 0..dim {
            let radial = g.row(i).dot(&u.row(i));
            let ui = u.row(i).into_owned();
            let mut gi = g.row_mut(i);
            gi -= ui * radial;
        }
        let gnorm2 = g.norm_squared();

        let mut decrease = None;
        if gnorm2 > 1e-24 * scale * scale * dim as f64 {
            let mut t = step * 2.0;
            for _ in 0..60 {
                let mut trial = &u - &g * t;
                normalise_rows(&mut trial);
                let next = eval(&trial, rho);
                if next.0 <= merit - 1e-4 * t * gnorm2 {
                    decrease = Some(merit - next.0);
                    u = trial;
                    (merit, obj, viol, au, bu) = next;
                    step = t;
                    history.push((merit, rho));
                    break;
                }
                t *= 0.5;
            }
        }

        let feasible = viol.abs() <= tol;
        let stalled = decrease.is_none_or(|d| d <= 1e-13 * (merit.abs() + 1.0));
        if stalled && feasible {
            converged = true;
            break;
        }
        if !feasible && (stalled || phase_iters >= PHASE) {
            rho *= 2.0;
            phase_iters = 0;
            (merit, obj, viol, au, bu) = eval(&u, rho);
        }
    }
    Ok(LowRankFactor {
        u,
        converged,
        iterations,
        objective: obj,
        violation: viol,
        history,
    })
}

fn normalise_rows(u: &mut DMatrix<f64>) {
    for mut row in u.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        } else {
            row[0] = 1.0;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdrSolution {
    pub u: DMatrix<f64>,
    /// Binary indicator with exactly `s` ones.
    pub v: Vec<usize>,
    /// Sorted selected indices.
    pub indices: Vec<usize>,
    pub objective: f64,
    pub draws: usize,
    /// Zero-based draw that produced the returned selection (earliest among ties).
    pub best_draw: usize,
    pub converged: bool,
}

/// Best-of-`draws` hyperplane rounding of a factor.
///
/// Each draw picks a uniform direction `g` on the sphere, scores candidate `i`
/// by `<U_{i+1}, g> sign(<U_0, g>)` and keeps the `s` largest (ties to the
/// lowest index). `evaluator` maps sorted indices to the objective to minimise.
pub fn sdr_round<F>(u: &DMatrix<f64>, problem: &SdrProblem, draws: usize, seed: u64, evaluator: F) -> Result<SdrSolution>
where
    F: Fn(&[usize]) -> f64,
{
    if draws == 0 {
        return Err(Error::Config("at least one rounding draw is required".into()));
    }
    let (n, s, r) = (problem.n, problem.s, u.ncols());
    if u.nrows() != n + 1 {
        return Err(Error::ShapeMismatch {
            what: "factor".into(),
            expected: n + 1,
            found: u.nrows(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>, usize)> = None;
    let mut order: Vec<usize> = (0..n).collect();
    for d in 0..draws {
        let g = random_direction(&mut rng, r);
        let sign = if u.row(0).transpose().dot(&g) < 0.0 { -1.0 } else { 1.0 };
        let scores: Vec<f64> = (0..n).map(|i| sign * u.row(i + 1).transpose().dot(&g)).collect();
        order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let mut chosen = order[..s].to_vec();
        chosen.sort_unstable();
        let obj = evaluator(&chosen);
        if best.as_ref().is_none_or(|(o, _, _)| obj < *o) {
            best = Some((obj, chosen, d));
        }
    }
    let (objective, indices, best_draw) = best.expect("draws >= 1");
    let mut v = vec![0; n];
    for &i in &indices {
        v[i] = 1;
    }
    Ok(SdrSolution {
        u: u.clone(),
        v,
        indices,
        objective,
        draws,
        best_draw,
        converged: true,
    })
}

fn random_direction(rng: &mut ChaCha8Rng, r: usize) -> nalgebra::DVector<f64> {
    loop {
        let g = nalgebra::DVector::from_fn(r, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm > 0.0 {
            return g / norm;
        }
    }
}

/// Assemble, factorise and round in one call.
pub fn solve_sdr(k: &DMatrix<f64>, c: &[f64], s: usize, opts: &SdrOptions, seed: u64) -> Result<SdrSolution> {
    let problem = sdr_assemble(k, c, s)?;
    let rank = opts.rank.unwrap_or((problem.n + 1).min(25)).max(2);
    let factor = sdr_solve_lowrank(&problem, rank, opts.max_iter, opts.tol, seed)?;
    let mut sol = sdr_round(&factor.u, &problem, opts.draws, seed, |idx| problem.objective_of(idx))?;
    sol.converged = factor.converged;
    Ok(sol)
}
