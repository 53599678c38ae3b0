//! Closed-form squared MMD / KSD of empirical measures, and the running state
//! that lets the greedy algorithms score every candidate in O(1).

use std::borrow::Cow;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::CandidateSet;
use crate::kernels::{CandidateKernel, KernelChoice, KernelSpec};
use crate::points::Points;
use crate::target::{Mode, TargetModel};

/// Gram matrices up to this many candidates are materialised by default.
pub const DEFAULT_DENSE_THRESHOLD: usize = 4096;

/// Relative slack below zero tolerated (and clamped) in a squared discrepancy.
pub const CLAMP_TOLERANCE: f64 = 1e-10;

/// Everything about a (candidates, target, kernel) triple that the algorithms
/// reuse: kernel means, the double integral, the Gram diagonal and, for
/// moderate `n`, the full Gram matrix.
#[derive(Debug, Clone)]
pub struct Discrepancy<'a> {
    candidates: &'a CandidateSet,
    scores: Option<Points>,
    kernel: KernelChoice,
    base: KernelSpec,
    mode: Mode,
    means: Vec<f64>,
    c2: f64,
    diag: Vec<f64>,
    dense: Option<DMatrix<f64>>,
}

impl<'a> Discrepancy<'a> {
    pub fn new(candidates: &'a CandidateSet, target: &TargetModel, base: KernelSpec) -> Result<Self> {
        Self::with_dense_threshold(candidates, target, base, DEFAULT_DENSE_THRESHOLD)
    }

    pub fn with_dense_threshold(
        candidates: &'a CandidateSet,
        target: &TargetModel,
        base: KernelSpec,
        dense_threshold: usize,
    ) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::DegenerateData("empty candidate set".into()));
        }
        if candidates.dim() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                found: candidates.dim(),
            });
        }
        let kernel = target.kernel_choice(base)?;
        let scores = match target.mode() {
            Mode::Ksd => Some(target.candidate_scores(candidates)?),
            Mode::Mmd => None,
        };
        let means = match target.mode() {
            Mode::Ksd => vec![0.0; candidates.len()],
            Mode::Mmd => candidates
                .points()
                .rows()
                .collect::<Vec<_>>()
                .par_iter()
                .map(|x| target.kernel_mean(&base, x))
                .collect::<Result<Vec<f64>>>()?,
        };
        let c2 = target.double_integral(&base)?;
        let mut ctx = Self {
            candidates,
            scores,
            kernel,
            base,
            mode: target.mode(),
            means,
            c2,
            diag: Vec::new(),
            dense: None,
        };
        let bound = ctx.bound();
        let diag = bound.diagonal();
        let dense = (candidates.len() <= dense_threshold).then(|| bound.gram());
        ctx.diag = diag;
        ctx.dense = dense;
        Ok(ctx)
    }

    fn bound(&self) -> CandidateKernel<'_> {
        CandidateKernel::new(self.kernel, self.candidates.points(), self.scores.as_ref())
            .expect("validated at construction")
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &CandidateSet {
        self.candidates
    }

    pub fn kernel(&self) -> &KernelChoice {
        &self.kernel
    }

    pub fn base_kernel(&self) -> &KernelSpec {
        &self.base
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Cached `h(x_j)`; all zero in KSD mode.
    pub fn kernel_means(&self) -> &[f64] {
        &self.means
    }

    pub fn double_integral(&self) -> f64 {
        self.c2
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.dense {
            Some(g) => g[(i, j)],
            None => self.bound().entry(i, j),
        }
    }

    pub fn column(&self, j: usize) -> Cow<'_, [f64]> {
        match &self.dense {
            Some(g) => {
                let n = g.nrows();
                Cow::Borrowed(&g.as_slice()[j * n..(j + 1) * n])
            }
            None => {
                let mut out = vec![0.0; self.len()];
                self.bound().column_into(j, &mut out);
                Cow::Owned(out)
            }
        }
    }

    pub fn submatrix(&self, indices: &[usize]) -> DMatrix<f64> {
        match &self.dense {
            Some(g) => DMatrix::from_fn(indices.len(), indices.len(), |r, c| g[(indices[r], indices[c])]),
            None => self.bound().submatrix(indices),
        }
    }

    pub fn gram(&self) -> Cow<'_, DMatrix<f64>> {
        match &self.dense {
            Some(g) => Cow::Borrowed(g),
            None => Cow::Owned(self.bound().gram()),
        }
    }

    /// Squared discrepancy between `measure` and the target.
    pub fn mmd_squared(&self, measure: &EmpiricalMeasure) -> Result<f64> {
        let n = self.len();
        if let Some(&bad) = measure.indices.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, len: n });
        }
        let weights = measure.weights();
        let mut quad = 0.0;
        let mut quad_abs = 0.0;
        for (a, &i) in measure.indices.iter().enumerate() {
            let mut row = 0.0;
            for (b, &j) in measure.indices.iter().enumerate() {
                row += weights[b] * self.entry(i, j);
            }
            quad += weights[a] * row;
            quad_abs += weights[a] * row.abs();
        }
        let lin: f64 = measure.indices.iter().zip(weights.iter()).map(|(&i, w)| w * self.means[i]).sum();
        let value = quad - 2.0 * lin + self.c2;
        clamp_squared(value, quad_abs + 2.0 * lin.abs() + self.c2.abs())
    }

    /// Squared discrepancy of the uniform measure on `indices`.
    pub fn mmd_squared_uniform(&self, indices: &[usize]) -> Result<f64> {
        self.mmd_squared(&EmpiricalMeasure::uniform(indices.to_vec())?)
    }
}

pub(crate) fn clamp_squared(value: f64, scale: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -CLAMP_TOLERANCE * scale.max(1.0) {
        Ok(0.0)
    } else {
        Err(Error::NegativeDiscrepancy(value))
    }
}

/// A (possibly weighted) multiset of candidate indices.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    indices: Vec<usize>,
    weights: Option<Vec<f64>>,
}

impl EmpiricalMeasure {
    pub fn uniform(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::DegenerateData("empty empirical measure".into()));
        }
        Ok(Self { indices, weights: None })
    }

    pub fn weighted(indices: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::DegenerateData("empty empirical measure".into()));
        }
        if weights.len() != indices.len() {
            return Err(Error::ShapeMismatch {
                what: "weight vector".into(),
                expected: indices.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Config("weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("weights sum to {total}, not 1")));
        }
        Ok(Self {
            indices,
            weights: Some(weights),
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn weights(&self) -> Cow<'_, [f64]> {
        match &self.weights {
            Some(w) => Cow::Borrowed(w),
            None => Cow::Owned(vec![1.0 / self.indices.len() as f64; self.indices.len()]),
        }
    }
}

/// Running sums behind the greedy algorithms.
///
/// With `t` points selected, `running[j] = sum_p k(x_p, x_j)`, and
/// `objective() = |f_t|^2 = sum_{p,q} k(x_p, x_q) - 2 t sum_p h(x_p) + t^2 C^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionState {
    selected: Vec<usize>,
    running: Vec<f64>,
    pair_sum: f64,
    pair_abs: f64,
    mean_sum: f64,
    c2: f64,
}

impl SelectionState {
    pub fn new(ctx: &Discrepancy<'_>) -> Self {
        Self {
            selected: Vec::new(),
            running: vec![0.0; ctx.len()],
            pair_sum: 0.0,
            pair_abs: 0.0,
            mean_sum: 0.0,
            c2: ctx.double_integral(),
        }
    }

    pub fn count(&self) -> usize {
        self.selected.len()
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn running(&self) -> &[f64] {
        &self.running
    }

    pub fn objective(&self) -> f64 {
        let t = self.count() as f64;
        self.pair_sum - 2.0 * t * self.mean_sum + t * t * self.c2
    }

    /// `objective / t^2`, the squared discrepancy of the uniform measure on the
    /// selection so far.
    pub fn mmd_squared(&self) -> Result<f64> {
        if self.selected.is_empty() {
            return Err(Error::DegenerateData("no points selected yet".into()));
        }
        let t = self.count() as f64;
        let scale = (self.pair_abs + 2.0 * t * self.mean_sum.abs() + t * t * self.c2.abs()) / (t * t);
        clamp_squared(self.objective() / (t * t), scale)
    }

    /// Adds the multiset `chosen` to the selection.
    pub fn update(&mut self, ctx: &Discrepancy<'_>, chosen: &[usize]) -> Result<()> {
        let n = self.running.len();
        if let Some(&bad) = chosen.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, len: n });
        }
        let means = ctx.kernel_means();
        for &p in chosen {
            let col = ctx.column(p);
            // new pairs: (p, p), and (p, q) / (q, p) for every q already selected
            let cross = self.running[p];
            let kpp = col[p];
            self.pair_sum += 2.0 * cross + kpp;
            self.pair_abs += 2.0 * cross.abs() + kpp.abs();
            for (r, k) in self.running.iter_mut().zip(col.iter()) {
                *r += k;
            }
            self.mean_sum += means[p];
            self.selected.push(p);
        }
        Ok(())
    }
}
