//! Greedy selection of representative points: myopic, non-myopic,
//! mini-batched, one-shot, and a relaxation-based variant.
//!
//! Every algorithm works on a [`Discrepancy`] and a [`SelectionState`]. At
//! iteration `i` (1-based) with `s` points per iteration, the linear term of the
//! subset problem is `c_j = running_j - i s h(x_j)`.

use std::time::Instant;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discrepancy::{Discrepancy, SelectionState};
use crate::error::{Error, Result};
use crate::sdr::{solve_sdr, SdrOptions};
use crate::solvers::{solve, IqpProblem, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Myopic,
    #[default]
    Nonmyopic,
    Minibatch,
    Oneshot,
    Sdr,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Myopic => "myopic",
            Algorithm::Nonmyopic => "nonmyopic",
            Algorithm::Minibatch => "minibatch",
            Algorithm::Oneshot => "oneshot",
            Algorithm::Sdr => "sdr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchStrategy {
    #[default]
    UniformWithoutReplacement,
    SequentialBlocks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub algorithm: Algorithm,
    /// Number of iterations.
    pub m: usize,
    /// Points chosen per iteration.
    pub s: usize,
    /// Mini-batch size; 0 scans every candidate.
    pub b: usize,
    pub batch_strategy: BatchStrategy,
    pub seed: u64,
    pub solver: SolverOptions,
    pub sdr: SdrOptions,
}

impl SelectionConfig {
    pub fn new(algorithm: Algorithm, m: usize, s: usize) -> Self {
        Self {
            algorithm,
            m,
            s,
            b: 0,
            batch_strategy: BatchStrategy::default(),
            seed: 0,
            solver: SolverOptions::default(),
            sdr: SdrOptions::default(),
        }
    }

    pub fn with_batch(mut self, b: usize, strategy: BatchStrategy) -> Self {
        self.b = b;
        self.batch_strategy = strategy;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_solver(mut self, solver: SolverOptions) -> Self {
        self.solver = solver;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("at least one iteration is required (m >= 1)".into()));
        }
        if self.s == 0 {
            return Err(Error::Config("s must be >= 1".into()));
        }
        if n == 0 {
            return Err(Error::DegenerateData("empty candidate set".into()));
        }
        let pool = if self.b > 0 { self.b } else { n };
        if self.b > 0 {
            if self.b > n {
                return Err(Error::Config(format!("batch size {} exceeds {n} candidates", self.b)));
            }
            if self.b < self.s {
                return Err(Error::Config(format!("batch size {} is smaller than s = {}", self.b, self.s)));
            }
        }
        if self.algorithm == Algorithm::Minibatch && self.b == 0 {
            return Err(Error::Config("mini-batch selection needs a batch size b > 0".into()));
        }
        let distinct = self.solver.binary || self.algorithm == Algorithm::Sdr;
        let per_solve = if self.algorithm == Algorithm::Oneshot { self.m } else { self.s };
        if distinct && per_solve > pool {
            return Err(Error::Config(format!(
                "cannot pick {per_solve} distinct points from {pool} candidates"
            )));
        }
        Ok(())
    }
}

/// The output of a selection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Chosen global indices, one row per iteration.
    pub pi: Vec<Vec<usize>>,
    /// Squared discrepancy of the uniform measure on all points chosen so far.
    pub trace: Vec<f64>,
    /// Wall-clock per iteration in milliseconds.
    pub timings_ms: Vec<f64>,
    pub config: SelectionConfig,
}

impl SelectionResult {
    pub fn iterations(&self) -> usize {
        self.pi.len()
    }

    /// All selected indices in selection order.
    pub fn indices(&self) -> Vec<usize> {
        self.pi.iter().flatten().copied().collect()
    }

    pub fn final_mmd_squared(&self) -> f64 {
        *self.trace.last().expect("results have at least one iteration")
    }
}

/// Candidate indices scanned at each iteration of a mini-batched run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchSchedule {
    batches: Vec<Vec<usize>>,
}

impl BatchSchedule {
    pub fn new(n: usize, b: usize, m: usize, strategy: BatchStrategy, seed: u64) -> Result<Self> {
        if b == 0 || b > n {
            return Err(Error::Config(format!("batch size {b} must lie in 1..={n}")));
        }
        let batches = match strategy {
            BatchStrategy::UniformWithoutReplacement => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..m)
                    .map(|_| {
                        let mut batch = index::sample(&mut rng, n, b).into_vec();
                        batch.sort_unstable();
                        batch
                    })
                    .collect()
            }
            BatchStrategy::SequentialBlocks => {
                let blocks = n / b;
                (0..m)
                    .map(|i| {
                        let start = (i % blocks) * b;
                        (start..start + b).collect()
                    })
                    .collect()
            }
        };
        Ok(Self { batches })
    }

    pub fn batches(&self) -> &[Vec<usize>] {
        &self.batches
    }

    pub fn batch(&self, i: usize) -> &[usize] {
        &self.batches[i]
    }
}

/// Runs the algorithm named in `config`.
pub fn select(ctx: &Discrepancy<'_>, config: &SelectionConfig) -> Result<SelectionResult> {
    config.validate(ctx.len())?;
    match config.algorithm {
        Algorithm::Myopic => select_myopic(ctx, config.m, config.seed),
        Algorithm::Nonmyopic => select_nonmyopic(ctx, config.m, config.s, &config.solver),
        Algorithm::Minibatch => select_minibatch(ctx, config),
        Algorithm::Oneshot => select_oneshot(ctx, config.m, &config.solver),
        Algorithm::Sdr => select_sdr(ctx, config),
    }
}

/// One point per iteration, minimising `1/2 k(x_j, x_j) + running_j - i h(x_j)`.
///
/// `seed` is unused; the scan is deterministic with ties going to the lowest index.
pub fn select_myopic(ctx: &Discrepancy<'_>, m: usize, seed: u64) -> Result<SelectionResult> {
    let config = SelectionConfig::new(Algorithm::Myopic, m, 1).with_seed(seed);
    config.validate(ctx.len())?;
    let diag = ctx.diagonal();
    let h = ctx.kernel_means();
    run(ctx, config, |i, state| {
        let running = state.running();
        let fi = i as f64;
        let mut best = 0;
        let mut best_val = f64::INFINITY;
        for j in 0..ctx.len() {
            let val = 0.5 * diag[j] + (running[j] - fi * h[j]);
            if val < best_val {
                best_val = val;
                best = j;
            }
        }
        Ok(vec![best])
    })
}

/// `s` points per iteration, chosen jointly by solving the subset problem exactly.
pub fn select_nonmyopic(
    ctx: &Discrepancy<'_>,
    m: usize,
    s: usize,
    solver: &SolverOptions,
) -> Result<SelectionResult> {
    let config = SelectionConfig::new(Algorithm::Nonmyopic, m, s).with_solver(*solver);
    config.validate(ctx.len())?;
    let k = ctx.gram().into_owned();
    let all: Vec<usize> = (0..ctx.len()).collect();
    run(ctx, config, |i, state| {
        let c = linear_term(ctx, state, &all, i, s);
        let problem = IqpProblem::new(k.clone(), c, s, solver.binary)?;
        Ok(solve(&problem, solver)?.indices)
    })
}

/// Non-myopic selection restricted at each iteration to a mini-batch of `b` candidates.
pub fn select_minibatch(ctx: &Discrepancy<'_>, config: &SelectionConfig) -> Result<SelectionResult> {
    let mut config = config.clone();
    config.algorithm = Algorithm::Minibatch;
    config.validate(ctx.len())?;
    let schedule = BatchSchedule::new(ctx.len(), config.b, config.m, config.batch_strategy, config.seed)?;
    let (s, solver) = (config.s, config.solver);
    run(ctx, config, |i, state| {
        let batch = schedule.batch(i - 1);
        let c = linear_term(ctx, state, batch, i, s);
        let problem = IqpProblem::new(ctx.submatrix(batch), c, s, solver.binary)?;
        Ok(solve(&problem, &solver)?.indices.into_iter().map(|l| batch[l]).collect())
    })
}

/// All `m` points in a single joint solve.
pub fn select_oneshot(ctx: &Discrepancy<'_>, m: usize, solver: &SolverOptions) -> Result<SelectionResult> {
    let mut config = SelectionConfig::new(Algorithm::Oneshot, m, m).with_solver(*solver);
    config.validate(ctx.len())?;
    let k = ctx.gram().into_owned();
    let all: Vec<usize> = (0..ctx.len()).collect();
    config.m = 1;
    let mut result = run(ctx, config, |_, state| {
        let c = linear_term(ctx, state, &all, 1, m);
        let problem = IqpProblem::new(k.clone(), c, m, solver.binary)?;
        Ok(solve(&problem, solver)?.indices)
    })?;
    result.config.m = m;
    Ok(result)
}

/// Like the non-myopic (or mini-batched, when `b > 0`) algorithm, but each
/// subset problem is handled by the semidefinite relaxation with randomised
/// rounding. Points are distinct within an iteration.
pub fn select_sdr(ctx: &Discrepancy<'_>, config: &SelectionConfig) -> Result<SelectionResult> {
    let mut config = config.clone();
    config.algorithm = Algorithm::Sdr;
    config.validate(ctx.len())?;
    let n = ctx.len();
    let schedule = if config.b > 0 {
        Some(BatchSchedule::new(n, config.b, config.m, config.batch_strategy, config.seed)?)
    } else {
        None
    };
    let all: Vec<usize> = (0..n).collect();
    let full = schedule.is_none().then(|| ctx.gram().into_owned());
    let (s, sdr, seed) = (config.s, config.sdr, config.seed);
    run(ctx, config, |i, state| {
        let pool = schedule.as_ref().map_or(all.as_slice(), |sch| sch.batch(i - 1));
        let c = linear_term(ctx, state, pool, i, s);
        let k = match &full {
            Some(k) => k.clone(),
            None => ctx.submatrix(pool),
        };
        let sol = solve_sdr(&k, &c, s, &sdr, seed.wrapping_add(i as u64))?;
        Ok(sol.indices.into_iter().map(|l| pool[l]).collect())
    })
}

fn linear_term(ctx: &Discrepancy<'_>, state: &SelectionState, pool: &[usize], i: usize, s: usize) -> Vec<f64> {
    let running = state.running();
    let h = ctx.kernel_means();
    let scale = (i * s) as f64;
    pool.iter().map(|&j| running[j] - scale * h[j]).collect()
}

fn run<F>(ctx: &Discrepancy<'_>, config: SelectionConfig, mut step: F) -> Result<SelectionResult>
where
    F: FnMut(usize, &SelectionState) -> Result<Vec<usize>>,
{
    let mut state = SelectionState::new(ctx);
    let mut pi = Vec::with_capacity(config.m);
    let mut trace = Vec::with_capacity(config.m);
    let mut timings_ms = Vec::with_capacity(config.m);
    for i in 1..=config.m {
        let start = Instant::now();
        let chosen = step(i, &state)?;
        state.update(ctx, &chosen)?;
        timings_ms.push(start.elapsed().as_secs_f64() * 1e3);
        trace.push(state.mmd_squared()?);
        pi.push(chosen);
    }
    Ok(SelectionResult {
        pi,
        trace,
        timings_ms,
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::CandidateSet;
    use crate::kernels::KernelSpec;
    use crate::points::Points;
    use crate::solvers::{solve_exhaustive, SolverKind};
    use crate::target::{GaussianMixture, Mode, TargetModel};

    fn instance(n: usize, seed: u64) -> (CandidateSet, TargetModel) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = GaussianMixture::isotropic(&[vec![-1.5, 0.0], vec![1.5, 0.3]], 0.4).unwrap();
        (CandidateSet::new(m.sample(n, &mut rng)).unwrap(), TargetModel::mixture(m, Mode::Mmd))
    }

    fn se() -> KernelSpec {
        KernelSpec::squared_exponential(0.9).unwrap()
    }

    fn check_trace(ctx: &Discrepancy<'_>, res: &SelectionResult) {
        let mut so_far = Vec::new();
        for (row, &t) in res.pi.iter().zip(&res.trace) {
            so_far.extend_from_slice(row);
            let fresh = ctx.mmd_squared_uniform(&so_far).unwrap();
            assert!((fresh - t).abs() <= 1e-9 * fresh.abs().max(1e-12), "{fresh} vs {t}");
        }
    }

    #[test]
    fn myopic_matches_nonmyopic_with_one_point() {
        for seed in 0..5 {
            let (c, t) = instance(40, seed);
            let ctx = Discrepancy::new(&c, &t, se()).unwrap();
            let a = select_myopic(&ctx, 15, 0).unwrap();
            let b = select_nonmyopic(&ctx, 15, 1, &SolverOptions::default()).unwrap();
            assert_eq!(a.pi, b.pi);
            check_trace(&ctx, &a);
            check_trace(&ctx, &b);
        }
    }

    #[test]
    fn single_candidate_repeats() {
        let (c, t) = instance(1, 3);
        let ctx = Discrepancy::new(&c, &t, se()).unwrap();
        let res = select_myopic(&ctx, 4, 0).unwrap();
        assert_eq!(res.pi, vec![vec![0]; 4]);
    }

    #[test]
    fn binary_full_selection_takes_everything() {
        let (c, t) = instance(6, 4);
        let ctx = Discrepancy::new(&c, &t, se()).unwrap();
        let opts = SolverOptions {
            binary: true,
            ..Default::default()
        };
        let res = select_nonmyopic(&ctx, 1, 6, &opts).unwrap();
        assert_eq!(res.pi, vec![vec![0, 1, 2, 3, 4, 5]]);
        let one = select_oneshot(&ctx, 6, &opts).unwrap();
        assert_eq!(one.pi, vec![vec![0, 1, 2, 3, 4, 5]]);
    }

    #[test]
    fn two_clusters_get_one_point_each() {
        let pts = Points::from_rows(&[
            [-2.0, 0.1],
            [-2.1, -0.1],
            [-1.9, 0.0],
            [2.0, 0.0],
            [2.1, 0.1],
            [1.9, -0.1],
        ])
        .unwrap();
        let c = CandidateSet::new(pts).unwrap();
        let m = GaussianMixture::isotropic(&[vec![-2.0, 0.0], vec![2.0, 0.0]], 0.05).unwrap();
        let t = TargetModel::mixture(m, Mode::Mmd);
        let ctx = Discrepancy::new(&c, &t, KernelSpec::squared_exponential(1.0).unwrap()).unwrap();
        let res = select_nonmyopic(&ctx, 1, 2, &SolverOptions::default()).unwrap();
        let row = &res.pi[0];
        assert!(row[0] < 3 && row[1] >= 3, "{row:?}");
        // the same answer as scanning all 21 multisets directly
        let c0: Vec<f64> = ctx.kernel_means().iter().map(|h| -2.0 * h).collect();
        let p = IqpProblem::new(ctx.gram().into_owned(), c0, 2, false).unwrap();
        assert_eq!(p.feasible_count(), 21);
        assert_eq!(&solve_exhaustive(&p).unwrap().indices, row);
    }

    #[test]
    fn full_batch_reproduces_nonmyopic() {
        let (c, t) = instance(25, 5);
        let ctx = Discrepancy::new(&c, &t, se()).unwrap();
        let cfg = SelectionConfig::new(Algorithm::Minibatch, 6, 2)
            .with_batch(25, BatchStrategy::UniformWithoutReplacement)
            .with_seed(17);
        let a = select_minibatch(&ctx, &cfg).unwrap();
        let b = select_nonmyopic(&ctx, 6, 2, &SolverOptions::default()).unwrap();
        assert_eq!(a.pi, b.pi);
        check_trace(&ctx, &a);
    }

    #[test]
    fn minibatch_is_seeded() {
        let (c, t) = instance(60, 6);
        let ctx = Discrepancy::new(&c, &t, se()).unwrap();
        let cfg = SelectionConfig::new(Algorithm::Minibatch, 8, 2)
            .with_batch(10, BatchStrategy::UniformWithoutReplacement)
            .with_seed(3);
        let a = select_minibatch(&ctx, &cfg).unwrap();
        let b = select_minibatch(&ctx, &cfg).unwrap();
        assert_eq!(a.pi, b.pi);
        let sched = BatchSchedule::new(60, 10, 8, BatchStrategy::UniformWithoutReplacement, 3).unwrap();
        for (row, batch) in a.pi.iter().zip(sched.batches()) {
            assert!(row.iter().all(|j| batch.contains(j)));
        }
        check_trace(&ctx, &a);
    }

    #[test]
    fn schedules() {
        let s = BatchSchedule::new(10, 3, 5, BatchStrategy::SequentialBlocks, 0).unwrap();
        assert_eq!(s.batch(0), &[0, 1, 2]);
        assert_eq!(s.batch(2), &[6, 7, 8]);
        assert_eq!(s.batch(3), &[0, 1, 2]);
        let u = BatchSchedule::new(10, 4, 50, BatchStrategy::UniformWithoutReplacement, 1).unwrap();
        for b in u.batches() {
            assert_eq!(b.len(), 4);
            assert!(b.windows(2).all(|w| w[0] < w[1]));
        }
        let full = BatchSchedule::new(7, 7, 3, BatchStrategy::UniformWithoutReplacement, 9).unwrap();
        assert!(full.batches().iter().all(|b| b == &(0..7).collect::<Vec<_>>()));
    }

    #[test]
    fn oneshot_first_pick_and_dominance() {
        for seed in 0..6 {
            let (c, t) = instance(10, 10 + seed);
            let ctx = Discrepancy::new(&c, &t, se()).unwrap();
            let one = select_oneshot(&ctx, 1, &SolverOptions::default()).unwrap();
            assert_eq!(one.pi, select_myopic(&ctx, 1, 0).unwrap().pi);
            let joint = select_oneshot(&ctx, 4, &SolverOptions::default()).unwrap();
            let greedy = select_nonmyopic(&ctx, 2, 2, &SolverOptions::default()).unwrap();
            assert!(joint.final_mmd_squared() <= greedy.final_mmd_squared() + 1e-12);
            assert_eq!(joint.config.m, 4);
            check_trace(&ctx, &joint);
        }
    }

    #[test]
    fn sdr_variant_is_feasible() {
        let (c, t) = instance(30, 7);
        let ctx = Discrepancy::new(&c, &t, se()).unwrap();
        let mut cfg = SelectionConfig::new(Algorithm::Sdr, 4, 3).with_seed(2);
        cfg.sdr.draws = 20;
        let res = select_sdr(&ctx, &cfg).unwrap();
        for row in &res.pi {
            assert_eq!(row.len(), 3);
            assert!(row.windows(2).all(|w| w[0] < w[1]));
        }
        check_trace(&ctx, &res);
        assert_eq!(res.pi, select_sdr(&ctx, &cfg).unwrap().pi);
    }

    #[test]
    fn config_validation() {
        let (c, t) = instance(5, 8);
        let ctx = Discrepancy::new(&c, &t, se()).unwrap();
        assert!(select_myopic(&ctx, 0, 0).is_err());
        let cfg = SelectionConfig::new(Algorithm::Minibatch, 2, 3).with_batch(2, BatchStrategy::SequentialBlocks);
        assert!(select(&ctx, &cfg).is_err());
        let cfg = SelectionConfig::new(Algorithm::Minibatch, 2, 1).with_batch(6, BatchStrategy::SequentialBlocks);
        assert!(select(&ctx, &cfg).is_err());
        let exhaustive = SolverOptions {
            kind: SolverKind::Exhaustive,
            ..Default::default()
        };
        let big = instance(300, 9);
        let ctx = Discrepancy::new(&big.0, &big.1, se()).unwrap();
        assert!(matches!(
            select_nonmyopic(&ctx, 1, 4, &exhaustive),
            Err(Error::InstanceTooLarge { .. })
        ));
    }
}
