use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use quant_core::{Algorithm, BatchStrategy, KernelFamily, Mode, ResultFormat, SolverKind};
use serde::{Deserialize, Serialize};

/// Select representative points from a candidate set by greedy minimisation
/// of MMD or kernel Stein discrepancy.
#[derive(Debug, Parser)]
#[command(name = "quant", version, propagate_version = true)]
pub struct Cli {
    /// Seed for every random choice (median-heuristic subsample, mini-batches, rounding).
    #[arg(long, global = true, env = "QUANT_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "QUANT_THREADS")]
    pub threads: Option<usize>,

    /// Output file (select, diagnose) or directory (benchmark). Standard output when omitted.
    #[arg(long, global = true, env = "QUANT_OUTPUT")]
    pub output: Option<PathBuf>,

    /// Result format.
    #[arg(long, global = true, env = "QUANT_FORMAT", value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one selection and write the result plus a replayable manifest.
    Select(SelectArgs),
    /// Run a seeded grid over s and algorithms on a mixture target.
    Benchmark(BenchmarkArgs),
    /// Check a finished run against the worst-case error bound.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for ResultFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ResultFormat::Json,
            FormatArg::Csv => ResultFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Mmd,
    Ksd,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Mmd => Mode::Mmd,
            ModeArg::Ksd => Mode::Ksd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelArg {
    /// Squared exponential.
    Se,
    /// Inverse multiquadric.
    Imq,
}

impl From<KernelArg> for KernelFamily {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Se => KernelFamily::SquaredExponential,
            KernelArg::Imq => KernelFamily::InverseMultiquadric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmArg {
    Myopic,
    Nonmyopic,
    Minibatch,
    Oneshot,
    Sdr,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Myopic => Algorithm::Myopic,
            AlgorithmArg::Nonmyopic => Algorithm::Nonmyopic,
            AlgorithmArg::Minibatch => Algorithm::Minibatch,
            AlgorithmArg::Oneshot => Algorithm::Oneshot,
            AlgorithmArg::Sdr => Algorithm::Sdr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BatchStrategyArg {
    UniformWithoutReplacement,
    SequentialBlocks,
}

impl From<BatchStrategyArg> for BatchStrategy {
    fn from(b: BatchStrategyArg) -> Self {
        match b {
            BatchStrategyArg::UniformWithoutReplacement => BatchStrategy::UniformWithoutReplacement,
            BatchStrategyArg::SequentialBlocks => BatchStrategy::SequentialBlocks,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Auto,
    Exhaustive,
    Bnb,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Auto => SolverKind::Auto,
            SolverArg::Exhaustive => SolverKind::Exhaustive,
            SolverArg::Bnb => SolverKind::Bnb,
        }
    }
}

/// `median` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lengthscale {
    Median,
    Fixed(f64),
}

pub fn parse_lengthscale(s: &str) -> Result<Lengthscale, String> {
    if s.eq_ignore_ascii_case("median") {
        return Ok(Lengthscale::Median);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(Lengthscale::Fixed(v)),
        _ => Err(format!("expected `median` or a positive number, got `{s}`")),
    }
}

/// Discrepancy and kernel settings shared by `select` and `benchmark`.
#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    /// Discrepancy to minimise.
    #[arg(long, env = "QUANT_MODE", value_enum, default_value_t = ModeArg::Mmd)]
    pub mode: ModeArg,

    /// Base kernel family.
    #[arg(long, env = "QUANT_KERNEL", value_enum, default_value_t = KernelArg::Se)]
    pub kernel: KernelArg,

    /// Kernel length-scale: `median` or a positive number.
    #[arg(long, env = "QUANT_LENGTHSCALE", value_parser = parse_lengthscale, default_value = "median")]
    pub lengthscale: Lengthscale,

    /// Points subsampled for the median heuristic.
    #[arg(long, env = "QUANT_MEDIAN_SUBSAMPLE", default_value_t = 1000)]
    pub median_subsample: usize,
}

/// Selection algorithm and solver settings shared by `select` and `benchmark`.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Points drawn per mini-batch; 0 scans all candidates.
    #[arg(long, env = "QUANT_BATCH", default_value_t = 0)]
    pub batch: usize,

    /// How mini-batches are formed.
    #[arg(long, env = "QUANT_BATCH_STRATEGY", value_enum, default_value_t = BatchStrategyArg::UniformWithoutReplacement)]
    pub batch_strategy: BatchStrategyArg,

    /// Solver for each subset problem.
    #[arg(long, env = "QUANT_SOLVER", value_enum, default_value_t = SolverArg::Auto)]
    pub solver: SolverArg,

    /// Forbid picking a candidate twice within one subset problem.
    #[arg(long, env = "QUANT_BINARY")]
    pub binary: bool,

    /// Branch-and-bound node budget; results past it are reported as heuristic.
    #[arg(long, env = "QUANT_NODE_LIMIT")]
    pub node_limit: Option<u64>,

    /// Factor rank for the relaxation (default min(n + 1, 25)).
    #[arg(long, env = "QUANT_RANK")]
    pub rank: Option<usize>,

    /// Random hyperplane draws when rounding the relaxation.
    #[arg(long, env = "QUANT_DRAWS", default_value_t = 200)]
    pub draws: usize,

    /// Constraint tolerance of the relaxation solve.
    #[arg(long, env = "QUANT_SDR_TOL", default_value_t = 1e-6)]
    pub sdr_tol: f64,

    /// Iteration cap of the relaxation solve.
    #[arg(long, env = "QUANT_SDR_MAX_ITER", default_value_t = 2000)]
    pub sdr_max_iter: usize,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Candidate points, one per CSV row.
    #[arg(long, env = "QUANT_CANDIDATES", required_unless_present = "manifest")]
    pub candidates: Option<PathBuf>,

    /// Score vectors matching the candidate rows (KSD without an analytic target).
    #[arg(long, env = "QUANT_SCORES")]
    pub scores: Option<PathBuf>,

    /// Gaussian mixture target as JSON.
    #[arg(long, env = "QUANT_MIXTURE")]
    pub mixture: Option<PathBuf>,

    /// Selection algorithm.
    #[arg(long, env = "QUANT_ALGORITHM", value_enum, default_value_t = AlgorithmArg::Nonmyopic)]
    pub algorithm: AlgorithmArg,

    /// Total number of points to select; must be a multiple of --s.
    #[arg(long, env = "QUANT_POINTS", required_unless_present = "manifest")]
    pub points: Option<usize>,

    /// Points chosen jointly per iteration.
    #[arg(long, env = "QUANT_S", default_value_t = 1)]
    pub s: usize,

    #[command(flatten)]
    pub kernel: KernelArgs,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// Replay the run recorded in this manifest; other selection flags are ignored.
    #[arg(long, env = "QUANT_MANIFEST")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Gaussian mixture target as JSON.
    #[arg(long, env = "QUANT_MIXTURE")]
    pub mixture: PathBuf,

    /// Candidate CSV per seed; `{seed}` is replaced by the seed. Sampled from the mixture when omitted.
    #[arg(long, env = "QUANT_CANDIDATES")]
    pub candidates: Option<String>,

    /// Candidates sampled per seed when --candidates is not given.
    #[arg(long, env = "QUANT_SAMPLES", default_value_t = 1000)]
    pub samples: usize,

    /// Number of seeds, starting at --seed.
    #[arg(long, env = "QUANT_SEEDS", default_value_t = 10)]
    pub seeds: u64,

    /// Total points selected per run.
    #[arg(long, env = "QUANT_POINTS", default_value_t = 60)]
    pub points: usize,

    /// Comma-separated values of s.
    #[arg(long = "s", env = "QUANT_S", value_delimiter = ',', default_value = "1,2,4")]
    pub s_values: Vec<usize>,

    /// Comma-separated algorithms.
    #[arg(long, env = "QUANT_ALGORITHMS", value_enum, value_delimiter = ',', default_value = "nonmyopic")]
    pub algorithms: Vec<AlgorithmArg>,

    #[command(flatten)]
    pub kernel: KernelArgs,

    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Manifest written next to a `select` result.
    #[arg(long, env = "QUANT_MANIFEST")]
    pub manifest: PathBuf,

    /// Result file to check instead of the one named in the manifest.
    #[arg(long, env = "QUANT_RESULT")]
    pub result: Option<PathBuf>,
}
