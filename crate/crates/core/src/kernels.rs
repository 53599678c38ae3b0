//! Base kernels, the Stein kernel built on top of them, Gram matrices and the
//! median-heuristic length-scale.
//!
//! Both base families are radial, `k(x, y) = phi(r2)` with `r2 = |x - y|^2`,
//! so every derivative the Stein kernel needs follows from `phi'` and `phi''`:
//!
//! ```text
//! grad_x k        =  2 phi'(r2) (x - y)
//! grad_y k        = -2 phi'(r2) (x - y)
//! div_x grad_y k  = -4 phi''(r2) r2 - 2 d phi'(r2)
//! ```

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::{dot, sq_dist, Points};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    SquaredExponential,
    InverseMultiquadric,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::SquaredExponential => "squared-exponential",
            KernelFamily::InverseMultiquadric => "inverse-multiquadric",
        }
    }
}

/// A base kernel family together with its length-scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    lengthscale: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscale: f64) -> Result<Self> {
        if !(lengthscale.is_finite() && lengthscale > 0.0) {
            return Err(Error::Config(format!(
                "length-scale must be positive and finite, got {lengthscale}"
            )));
        }
        Ok(Self {
            family,
            lengthscale,
        })
    }

    pub fn squared_exponential(lengthscale: f64) -> Result<Self> {
        Self::new(KernelFamily::SquaredExponential, lengthscale)
    }

    pub fn inverse_multiquadric(lengthscale: f64) -> Result<Self> {
        Self::new(KernelFamily::InverseMultiquadric, lengthscale)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dims(x.len(), y.len())?;
        Ok(self.radial(sq_dist(x, y)).0)
    }

    /// `(phi, phi', phi'')` at squared distance `r2`.
    #[inline]
    fn radial(&self, r2: f64) -> (f64, f64, f64) {
        let inv_l2 = 1.0 / (self.lengthscale * self.lengthscale);
        match self.family {
            KernelFamily::SquaredExponential => {
                let phi = (-0.5 * r2 * inv_l2).exp();
                (phi, -0.5 * inv_l2 * phi, 0.25 * inv_l2 * inv_l2 * phi)
            }
            KernelFamily::InverseMultiquadric => {
                let base = 1.0 + r2 * inv_l2;
                let phi = base.powf(-0.5);
                let phi3 = phi / base;
                let phi5 = phi3 / base;
                (phi, -0.5 * inv_l2 * phi3, 0.75 * inv_l2 * inv_l2 * phi5)
            }
        }
    }

    #[inline]
    pub(crate) fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.radial(sq_dist(x, y)).0
    }
}

/// Stein kernel `k_mu` built from a base kernel; scores are supplied per call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteinKernel {
    pub base: KernelSpec,
}

impl SteinKernel {
    pub fn new(base: KernelSpec) -> Self {
        Self { base }
    }

    /// `k_mu(x, y)` given the scores `ux = u(x)` and `uy = u(y)`.
    pub fn eval(&self, x: &[f64], ux: &[f64], y: &[f64], uy: &[f64]) -> Result<f64> {
        let d = x.len();
        for len in [y.len(), ux.len(), uy.len()] {
            check_dims(d, len)?;
        }
        Ok(self.value(x, ux, y, uy))
    }

    #[inline]
    pub(crate) fn value(&self, x: &[f64], ux: &[f64], y: &[f64], uy: &[f64]) -> f64 {
        let d = x.len() as f64;
        let mut r2 = 0.0;
        let mut cross = 0.0;
        for i in 0..x.len() {
            let diff = x[i] - y[i];
            r2 += diff * diff;
            // (x - y) . (u(x) - u(y)) is unchanged under swapping the two arguments.
            cross += diff * (ux[i] - uy[i]);
        }
        let (phi, dphi, d2phi) = self.base.radial(r2);
        let uu = dot(ux, uy);
        (-4.0 * d2phi * r2 - 2.0 * d * dphi) - 2.0 * dphi * cross + phi * uu
    }
}

/// Kernel used by the discrepancy: either a base kernel (MMD) or a Stein kernel (KSD).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelChoice {
    Base(KernelSpec),
    Stein(SteinKernel),
}

impl KernelChoice {
    pub fn base(&self) -> &KernelSpec {
        match self {
            KernelChoice::Base(k) => k,
            KernelChoice::Stein(k) => &k.base,
        }
    }
}

/// A kernel bound to a fixed point set (and its scores, for Stein kernels), so
/// that entries can be addressed by candidate index.
#[derive(Debug, Clone)]
pub struct CandidateKernel<'a> {
    kernel: KernelChoice,
    points: &'a Points,
    scores: Option<&'a Points>,
}

impl<'a> CandidateKernel<'a> {
    pub fn new(kernel: KernelChoice, points: &'a Points, scores: Option<&'a Points>) -> Result<Self> {
        if let KernelChoice::Stein(_) = kernel {
            let scores = scores.ok_or_else(|| {
                Error::Config("Stein kernel requires a score vector for every point".into())
            })?;
            if scores.len() != points.len() {
                return Err(Error::ShapeMismatch {
                    what: "score matrix".into(),
                    expected: points.len(),
                    found: scores.len(),
                });
            }
            check_dims(points.dim(), scores.dim())?;
        }
        Ok(Self {
            kernel,
            points,
            scores,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn kernel(&self) -> &KernelChoice {
        &self.kernel
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (x, y) = (self.points.row(i), self.points.row(j));
        match (&self.kernel, self.scores) {
            (KernelChoice::Base(k), _) => k.value(x, y),
            (KernelChoice::Stein(k), Some(u)) => k.value(x, u.row(i), y, u.row(j)),
            (KernelChoice::Stein(_), None) => unreachable!("checked in constructor"),
        }
    }

    /// Column `j` of the Gram matrix, written into `out`.
    pub fn column_into(&self, j: usize, out: &mut [f64]) {
        out.par_iter_mut()
            .enumerate()
            .for_each(|(i, o)| *o = self.entry(i, j));
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.len()).into_par_iter().map(|i| self.entry(i, i)).collect()
    }

    /// Sub-Gram matrix over `indices` (in the given order).
    pub fn submatrix(&self, indices: &[usize]) -> DMatrix<f64> {
        let b = indices.len();
        let mut data = vec![0.0; b * b];
        data.par_chunks_mut(b.max(1)).enumerate().for_each(|(col, chunk)| {
            let j = indices[col];
            for (row, v) in chunk.iter_mut().enumerate() {
                *v = self.entry(indices[row], j);
            }
        });
        DMatrix::from_vec(b, b, data)
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.submatrix(&all)
    }
}

/// Full Gram matrix for `kernel` on `points`. Each entry is computed independently,
/// so the result does not depend on the number of worker threads.
pub fn gram(kernel: &KernelChoice, points: &Points, scores: Option<&Points>) -> Result<DMatrix<f64>> {
    if points.is_empty() {
        return Err(Error::DegenerateData("gram matrix of an empty point set".into()));
    }
    Ok(CandidateKernel::new(*kernel, points, scores)?.gram())
}

/// `sqrt(median{|x_i - x_j|^2 : i < j} / 2)` over a seeded subsample (without
/// replacement) of at most `subsample` points.
pub fn median_heuristic(points: &Points, subsample: usize, seed: u64) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::DegenerateData(format!(
            "median heuristic needs at least 2 points, got {n}"
        )));
    }
    if subsample < 2 {
        return Err(Error::Config(format!(
            "median heuristic subsample must be >= 2, got {subsample}"
        )));
    }
    let chosen: Vec<usize> = if subsample >= n {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, n, subsample).into_vec();
        idx.sort_unstable();
        idx
    };
    let mut d2 = Vec::with_capacity(chosen.len() * (chosen.len() - 1) / 2);
    for (a, &i) in chosen.iter().enumerate() {
        for &j in &chosen[a + 1..] {
            d2.push(sq_dist(points.row(i), points.row(j)));
        }
    }
    let med = median_in_place(&mut d2);
    if !(med > 0.0) {
        return Err(Error::DegenerateData(
            "median squared pairwise distance is zero; length-scale would be zero".into(),
        ));
    }
    Ok((0.5 * med).sqrt())
}

/// Median by quickselect; the mean of the two middle values for even lengths.
fn median_in_place(v: &mut [f64]) -> f64 {
    let len = v.len();
    let mid = len / 2;
    let (lower, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if len % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_max + upper)
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
