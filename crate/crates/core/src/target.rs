//! The target distribution: what the selection algorithms need to know about it.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::CandidateSet;
use crate::kernels::{KernelChoice, KernelFamily, KernelSpec, SteinKernel};
use crate::points::Points;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Mmd,
    Ksd,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Mmd => "mmd",
            Mode::Ksd => "ksd",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub var_diag: Vec<f64>,
}

/// Gaussian mixture with diagonal covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureDoc", into = "MixtureDoc")]
pub struct GaussianMixture {
    dim: usize,
    components: Vec<Component>,
}

#[derive(Serialize, Deserialize)]
struct MixtureDoc {
    d: usize,
    components: Vec<Component>,
}

impl TryFrom<MixtureDoc> for GaussianMixture {
    type Error = Error;

    fn try_from(doc: MixtureDoc) -> Result<Self> {
        GaussianMixture::new(doc.d, doc.components)
    }
}

impl From<GaussianMixture> for MixtureDoc {
    fn from(m: GaussianMixture) -> Self {
        MixtureDoc {
            d: m.dim,
            components: m.components,
        }
    }
}

impl GaussianMixture {
    pub fn new(dim: usize, components: Vec<Component>) -> Result<Self> {
        if dim == 0 || components.is_empty() {
            return Err(Error::Config("mixture needs d >= 1 and at least one component".into()));
        }
        let mut total = 0.0;
        for (i, c) in components.iter().enumerate() {
            if c.mean.len() != dim || c.var_diag.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: if c.mean.len() != dim { c.mean.len() } else { c.var_diag.len() },
                });
            }
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::Config(format!("component {i}: weight must be positive")));
            }
            if c.var_diag.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Config(format!("component {i}: variances must be positive")));
            }
            if c.mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("component {i}: mean must be finite")));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self { dim, components })
    }

    /// Equal-weight isotropic mixture, a convenience for tests and demos.
    pub fn isotropic(means: &[Vec<f64>], variance: f64) -> Result<Self> {
        let dim = means.first().map(Vec::len).unwrap_or(0);
        let w = 1.0 / means.len() as f64;
        let mut components: Vec<Component> = means
            .iter()
            .map(|m| Component {
                weight: w,
                mean: m.clone(),
                var_diag: vec![variance; dim],
            })
            .collect();
        // make the weights sum to one exactly-enough regardless of rounding
        if let Some(last) = components.last_mut() {
            last.weight = 1.0 - w * (means.len() - 1) as f64;
        }
        Self::new(dim, components)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let logs: Vec<f64> = self.components.iter().map(|c| c.weight.ln() + log_normal(x, c)).collect();
        log_sum_exp(&logs)
    }

    /// `grad log p(x)`, computed with responsibilities normalised in log space.
    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let logs: Vec<f64> = self.components.iter().map(|c| c.weight.ln() + log_normal(x, c)).collect();
        let lse = log_sum_exp(&logs);
        let mut out = vec![0.0; self.dim];
        for (c, l) in self.components.iter().zip(&logs) {
            let resp = (l - lse).exp();
            for ((o, (xi, mi)), vi) in out.iter_mut().zip(x.iter().zip(&c.mean)).zip(&c.var_diag) {
                *o += resp * (mi - xi) / vi;
            }
        }
        Ok(out)
    }

    /// `int k(x, y) dmu(y)` for the squared-exponential kernel with length-scale `l`.
    fn se_kernel_mean(&self, l: f64, x: &[f64]) -> f64 {
        let l2 = l * l;
        self.components
            .iter()
            .map(|c| c.weight * gaussian_overlap(l2, x, &c.mean, c.var_diag.iter().copied()))
            .sum()
    }

    /// `iint k(x, y) dmu(x) dmu(y)` for the squared-exponential kernel.
    fn se_double_integral(&self, l: f64) -> f64 {
        let l2 = l * l;
        let mut total = 0.0;
        for a in &self.components {
            for b in &self.components {
                let vars = a.var_diag.iter().zip(&b.var_diag).map(|(va, vb)| va + vb);
                total += a.weight * b.weight * gaussian_overlap(l2, &a.mean, &b.mean, vars);
            }
        }
        total
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Points {
        let mut data = Vec::with_capacity(n * self.dim);
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = self.components.len() - 1;
            for (i, c) in self.components.iter().enumerate() {
                acc += c.weight;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            let c = &self.components[pick];
            for (m, v) in c.mean.iter().zip(&c.var_diag) {
                let z: f64 = StandardNormal.sample(rng);
                data.push(m + v.sqrt() * z);
            }
        }
        Points::new(self.dim, data).expect("dimension is positive")
    }
}

/// `prod_j (l2 / (l2 + v_j))^(1/2) * exp(-sum_j (x_j - m_j)^2 / (2 (l2 + v_j)))`
fn gaussian_overlap(l2: f64, x: &[f64], m: &[f64], vars: impl Iterator<Item = f64>) -> f64 {
    let mut log_scale = 0.0;
    let mut quad = 0.0;
    for ((xi, mi), v) in x.iter().zip(m).zip(vars) {
        let s = l2 + v;
        log_scale += 0.5 * (l2 / s).ln();
        quad += (xi - mi) * (xi - mi) / s;
    }
    (log_scale - 0.5 * quad).exp()
}

fn log_normal(x: &[f64], c: &Component) -> f64 {
    let mut acc = 0.0;
    for ((xi, mi), vi) in x.iter().zip(&c.mean).zip(&c.var_diag) {
        let t = xi - mi;
        acc += t * t / vi + (2.0 * PI * vi).ln();
    }
    -0.5 * acc
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Target known only through its score at each candidate point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTarget {
    points: Points,
    scores: Points,
}

impl ScoreTarget {
    pub fn new(points: Points, scores: Points) -> Result<Self> {
        if points.len() != scores.len() {
            return Err(Error::ShapeMismatch {
                what: "score matrix".into(),
                expected: points.len(),
                found: scores.len(),
            });
        }
        if points.dim() != scores.dim() {
            return Err(Error::DimensionMismatch {
                expected: points.dim(),
                found: scores.dim(),
            });
        }
        if let Some(pos) = scores.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / scores.dim(),
                col: pos % scores.dim(),
            });
        }
        Ok(Self { points, scores })
    }

    pub fn from_candidates(candidates: &CandidateSet) -> Result<Self> {
        let scores = candidates
            .scores()
            .ok_or_else(|| Error::Config("candidate set carries no scores".into()))?;
        Self::new(candidates.points().clone(), scores.clone())
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn scores(&self) -> &Points {
        &self.scores
    }

    /// Stored score of the first candidate bitwise equal to `x`.
    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.points
            .rows()
            .position(|row| row == x)
            .map(|i| self.scores.row(i).to_vec())
            .ok_or(Error::Lookup)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSource {
    Mixture(GaussianMixture),
    Scores(ScoreTarget),
}

/// The target `mu` together with the discrepancy to minimise against it.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetModel {
    source: TargetSource,
    mode: Mode,
}

impl TargetModel {
    pub fn mixture(mixture: GaussianMixture, mode: Mode) -> Self {
        Self {
            source: TargetSource::Mixture(mixture),
            mode,
        }
    }

    pub fn scores(target: ScoreTarget) -> Self {
        Self {
            source: TargetSource::Scores(target),
            mode: Mode::Ksd,
        }
    }

    pub fn new(source: TargetSource, mode: Mode) -> Result<Self> {
        if mode == Mode::Mmd && matches!(source, TargetSource::Scores(_)) {
            return Err(Error::UnsupportedPairing {
                kernel: "any".into(),
                target: "score-only".into(),
                mode: mode.name().into(),
            });
        }
        Ok(Self { source, mode })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn source(&self) -> &TargetSource {
        &self.source
    }

    pub fn dim(&self) -> usize {
        match &self.source {
            TargetSource::Mixture(m) => m.dim(),
            TargetSource::Scores(s) => s.dim(),
        }
    }

    fn source_name(&self) -> &'static str {
        match self.source {
            TargetSource::Mixture(_) => "gaussian-mixture",
            TargetSource::Scores(_) => "score-only",
        }
    }

    fn check_pairing(&self, kernel: &KernelSpec) -> Result<Option<&GaussianMixture>> {
        match (self.mode, &self.source) {
            (Mode::Ksd, _) => Ok(None),
            (Mode::Mmd, TargetSource::Mixture(m)) if kernel.family() == KernelFamily::SquaredExponential => {
                Ok(Some(m))
            }
            (Mode::Mmd, _) => Err(Error::UnsupportedPairing {
                kernel: kernel.family().name().into(),
                target: self.source_name().into(),
                mode: self.mode.name().into(),
            }),
        }
    }

    /// The kernel the discrepancy is built from: the base kernel itself for MMD,
    /// the Stein kernel over it for KSD.
    pub fn kernel_choice(&self, base: KernelSpec) -> Result<KernelChoice> {
        self.check_pairing(&base)?;
        Ok(match self.mode {
            Mode::Mmd => KernelChoice::Base(base),
            Mode::Ksd => KernelChoice::Stein(SteinKernel::new(base)),
        })
    }

    /// `h(x) = int k(x, y) dmu(y)`; identically zero for Stein kernels.
    pub fn kernel_mean(&self, kernel: &KernelSpec, x: &[f64]) -> Result<f64> {
        match self.check_pairing(kernel)? {
            None => Ok(0.0),
            Some(m) => {
                if x.len() != m.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: m.dim(),
                        found: x.len(),
                    });
                }
                Ok(m.se_kernel_mean(kernel.lengthscale(), x))
            }
        }
    }

    /// `C^2 = iint k dmu dmu`; zero for Stein kernels.
    pub fn double_integral(&self, kernel: &KernelSpec) -> Result<f64> {
        match self.check_pairing(kernel)? {
            None => Ok(0.0),
            Some(m) => Ok(m.se_double_integral(kernel.lengthscale())),
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.source {
            TargetSource::Mixture(m) => m.score(x),
            TargetSource::Scores(s) => s.score(x),
        }
    }

    /// Score vectors for every candidate, in candidate order.
    pub fn candidate_scores(&self, candidates: &CandidateSet) -> Result<Points> {
        match &self.source {
            TargetSource::Mixture(m) => {
                let mut data = Vec::with_capacity(candidates.len() * m.dim());
                for x in candidates.points().rows() {
                    data.extend(m.score(x)?);
                }
                Points::new(m.dim(), data)
            }
            TargetSource::Scores(s) => {
                if s.scores().len() != candidates.len() {
                    return Err(Error::ShapeMismatch {
                        what: "score matrix".into(),
                        expected: candidates.len(),
                        found: s.scores().len(),
                    });
                }
                Ok(s.scores().clone())
            }
        }
    }
}
