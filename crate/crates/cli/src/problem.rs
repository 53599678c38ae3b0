use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use quant_core::{
    load_candidates, median_heuristic, CandidateFormat, CandidateSet, ErrorCategory, GaussianMixture, KernelSpec,
    Mode, ScoreTarget, TargetModel,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::{KernelArg, KernelArgs, Lengthscale, ModeArg};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_SIZE_GUARD: i32 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<quant_core::Error> for Failure {
    fn from(e: quant_core::Error) -> Self {
        let code = match e.category() {
            ErrorCategory::Usage => EXIT_USAGE,
            ErrorCategory::Data => EXIT_DATA,
            ErrorCategory::SizeGuard => EXIT_SIZE_GUARD,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub fn io_failure(path: &Path, e: impl fmt::Display) -> Failure {
    Failure::data(format!("{}: {e}", path.display()))
}

/// Everything needed to rebuild the discrepancy of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub candidates: PathBuf,
    pub scores: Option<PathBuf>,
    pub mixture: Option<PathBuf>,
    pub mode: ModeArg,
    pub kernel: KernelArg,
    /// As requested on the command line.
    pub lengthscale: Lengthscale,
    pub median_subsample: usize,
    /// The value actually used.
    pub resolved_lengthscale: Option<f64>,
}

impl ProblemSpec {
    pub fn new(candidates: PathBuf, scores: Option<PathBuf>, mixture: Option<PathBuf>, kernel: &KernelArgs) -> Self {
        Self {
            candidates,
            scores,
            mixture,
            mode: kernel.mode,
            kernel: kernel.kernel,
            lengthscale: kernel.lengthscale,
            median_subsample: kernel.median_subsample,
            resolved_lengthscale: None,
        }
    }

    /// Checks flag pairings before any file is touched.
    pub fn check(&self) -> Result<(), Failure> {
        match self.mode {
            ModeArg::Mmd if self.mixture.is_none() => {
                Err(Failure::usage("mmd mode needs an analytic target: pass --mixture <FILE>"))
            }
            ModeArg::Ksd if self.mixture.is_none() && self.scores.is_none() => Err(Failure::usage(
                "ksd mode needs a score file: pass --scores <FILE> (or an analytic target via --mixture)",
            )),
            _ => Ok(()),
        }
    }

    pub fn input_paths(&self) -> Vec<&Path> {
        let mut paths = vec![self.candidates.as_path()];
        paths.extend(self.scores.as_deref());
        paths.extend(self.mixture.as_deref());
        paths
    }

    /// Makes every input path absolute so the manifest can be replayed from elsewhere.
    pub fn absolutise(&mut self) -> Result<(), Failure> {
        let abs = |p: &Path| p.canonicalize().map_err(|e| io_failure(p, e));
        self.candidates = abs(&self.candidates)?;
        if let Some(p) = &self.scores {
            self.scores = Some(abs(p)?);
        }
        if let Some(p) = &self.mixture {
            self.mixture = Some(abs(p)?);
        }
        Ok(())
    }

    /// Loads candidates and target and fixes the length-scale.
    pub fn load(&mut self, seed: u64) -> Result<Problem, Failure> {
        self.check()?;
        let candidates = load_candidates(&self.candidates, CandidateFormat::Csv, self.scores.as_deref())?;
        let mixture = self.mixture.as_deref().map(GaussianMixture::from_json_file).transpose()?;
        let target = build_target(&candidates, mixture, self.mode.into())?;
        let kernel = self.resolve_kernel(&candidates, seed)?;
        Ok(Problem {
            candidates,
            target,
            kernel,
        })
    }

    pub fn resolve_kernel(&mut self, candidates: &CandidateSet, seed: u64) -> Result<KernelSpec, Failure> {
        let ell = match (self.resolved_lengthscale, self.lengthscale) {
            (Some(v), _) => v,
            (None, Lengthscale::Fixed(v)) => v,
            (None, Lengthscale::Median) => median_heuristic(candidates.points(), self.median_subsample, seed)?,
        };
        self.resolved_lengthscale = Some(ell);
        Ok(KernelSpec::new(self.kernel.into(), ell)?)
    }
}

pub fn build_target(candidates: &CandidateSet, mixture: Option<GaussianMixture>, mode: Mode) -> Result<TargetModel, Failure> {
    match (mixture, mode) {
        (Some(m), mode) => {
            if m.dim() != candidates.dim() {
                return Err(Failure::data(format!(
                    "mixture has dimension {} but candidates have dimension {}",
                    m.dim(),
                    candidates.dim()
                )));
            }
            Ok(TargetModel::mixture(m, mode))
        }
        (None, Mode::Ksd) => Ok(TargetModel::scores(ScoreTarget::from_candidates(candidates)?)),
        (None, Mode::Mmd) => Err(Failure::usage("mmd mode needs --mixture")),
    }
}

pub struct Problem {
    pub candidates: CandidateSet,
    pub target: TargetModel,
    pub kernel: KernelSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn digest(path: &Path) -> Result<InputDigest, Failure> {
    let file = File::open(path).map_err(|e| io_failure(path, e))?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut BufReader::new(file), &mut hasher).map_err(|e| io_failure(path, e))?;
    Ok(InputDigest {
        path: path.to_path_buf(),
        sha256: hex::encode(hasher.finalize()),
    })
}

pub fn verify_digests(inputs: &[InputDigest]) -> Result<(), Failure> {
    for recorded in inputs {
        let now = digest(&recorded.path)?;
        if now.sha256 != recorded.sha256 {
            return Err(Failure::data(format!(
                "{} changed since the manifest was written (sha256 {} != {})",
                recorded.path.display(),
                now.sha256,
                recorded.sha256
            )));
        }
    }
    Ok(())
}
