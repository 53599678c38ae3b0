use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use quant_core::{
    select, write_result, CandidateSet, Discrepancy, GaussianMixture, ResultFormat, SelectionConfig, SelectionResult,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{AlgorithmArg, BenchmarkArgs, FormatArg, KernelArg, Lengthscale, ModeArg};
use crate::commands::select::selection_config;
use crate::problem::{build_target, digest, io_failure, Failure, InputDigest, ProblemSpec};
use crate::Globals;

struct Cell {
    algorithm: AlgorithmArg,
    s: usize,
    seed: u64,
    config: SelectionConfig,
}

struct Run {
    lengthscale: f64,
    result: SelectionResult,
}

#[derive(Serialize)]
struct BenchmarkManifest<'a> {
    version: &'a str,
    seeds: Vec<u64>,
    points: usize,
    s: &'a [usize],
    algorithms: &'a [AlgorithmArg],
    samples: Option<usize>,
    candidates: Option<&'a str>,
    mixture: &'a InputDigest,
    mode: ModeArg,
    kernel: KernelArg,
    lengthscale: Lengthscale,
    median_subsample: usize,
}

pub fn run(globals: &Globals, args: BenchmarkArgs) -> Result<(), Failure> {
    if args.seeds == 0 || args.s_values.is_empty() || args.algorithms.is_empty() {
        return Err(Failure::usage("the grid is empty: need at least one seed, one --s and one algorithm"));
    }
    let mixture_digest = digest(&args.mixture)?;
    let mixture = GaussianMixture::from_json_file(&args.mixture)?;
    let seeds: Vec<u64> = (0..args.seeds).map(|i| globals.seed + i).collect();

    let mut cells = Vec::new();
    for &algorithm in &args.algorithms {
        for &s in &args.s_values {
            if algorithm == AlgorithmArg::Myopic && s != 1 {
                eprintln!("skipping myopic with s = {s}");
                continue;
            }
            for &seed in &seeds {
                let config = selection_config(algorithm, args.points, s, &args.solver, seed)?;
                cells.push(Cell {
                    algorithm,
                    s,
                    seed,
                    config,
                });
            }
        }
    }

    let runs = cells
        .par_iter()
        .map(|cell| run_cell(cell, &args, &mixture))
        .collect::<Result<Vec<_>, _>>()?;

    let dir = globals.output.clone().unwrap_or_else(|| PathBuf::from("benchmark"));
    let runs_dir = dir.join("runs");
    std::fs::create_dir_all(&runs_dir).map_err(|e| io_failure(&runs_dir, e))?;
    let ext = match globals.format {
        FormatArg::Json => "json",
        FormatArg::Csv => "csv",
    };
    let format: ResultFormat = globals.format.into();
    for (cell, run) in cells.iter().zip(&runs) {
        let name = format!("{}_s{}_seed{}.{ext}", cell.algorithm_name(), cell.s, cell.seed);
        write_result(&run.result, &runs_dir.join(name), format)?;
    }

    write_file(&dir.join("trace.csv"), &long_csv(&cells, &runs))?;
    let summary = summary_csv(&cells, &runs);
    write_file(&dir.join("summary.csv"), &summary)?;
    let manifest = BenchmarkManifest {
        version: env!("CARGO_PKG_VERSION"),
        seeds,
        points: args.points,
        s: &args.s_values,
        algorithms: &args.algorithms,
        samples: args.candidates.is_none().then_some(args.samples),
        candidates: args.candidates.as_deref(),
        mixture: &mixture_digest,
        mode: args.kernel.mode,
        kernel: args.kernel.kernel,
        lengthscale: args.kernel.lengthscale,
        median_subsample: args.kernel.median_subsample,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::data(e.to_string()))?;
    write_file(&dir.join("manifest.json"), &(text + "\n"))?;
    print!("{summary}");
    Ok(())
}

impl Cell {
    fn algorithm_name(&self) -> &'static str {
        quant_core::Algorithm::from(self.algorithm).name()
    }
}

fn run_cell(cell: &Cell, args: &BenchmarkArgs, mixture: &GaussianMixture) -> Result<Run, Failure> {
    let candidates = match &args.candidates {
        Some(template) => {
            let path = PathBuf::from(template.replace("{seed}", &cell.seed.to_string()));
            quant_core::load_candidates(&path, quant_core::CandidateFormat::Csv, None)?
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cell.seed);
            CandidateSet::new(mixture.sample(args.samples, &mut rng))?
        }
    };
    let mut spec = ProblemSpec::new(PathBuf::new(), None, None, &args.kernel);
    let kernel = spec.resolve_kernel(&candidates, cell.seed)?;
    let target = build_target(&candidates, Some(mixture.clone()), args.kernel.mode.into())?;
    let ctx = Discrepancy::new(&candidates, &target, kernel)?;
    let result = select(&ctx, &cell.config)?;
    Ok(Run {
        lengthscale: kernel.lengthscale(),
        result,
    })
}

fn long_csv(cells: &[Cell], runs: &[Run]) -> String {
    let mut out = String::from("seed,algorithm,s,b,lengthscale,iteration,points,mmd_squared,cumulative_ms\n");
    for (cell, run) in cells.iter().zip(runs) {
        let mut points = 0;
        let mut elapsed = 0.0;
        for (i, ((row, mmd), ms)) in run.result.pi.iter().zip(&run.result.trace).zip(&run.result.timings_ms).enumerate() {
            points += row.len();
            elapsed += ms;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                cell.seed,
                cell.algorithm_name(),
                cell.s,
                cell.config.b,
                run.lengthscale,
                i + 1,
                points,
                mmd,
                elapsed
            );
        }
    }
    out
}

/// Final discrepancy per (algorithm, s); timings are left out so reruns compare equal.
fn summary_csv(cells: &[Cell], runs: &[Run]) -> String {
    let mut out = String::from("algorithm,s,b,runs,median_final_mmd_squared,mean_final_mmd_squared,min_final_mmd_squared,max_final_mmd_squared\n");
    let mut groups: Vec<(&'static str, usize, usize, Vec<f64>)> = Vec::new();
    for (cell, run) in cells.iter().zip(runs) {
        let key = (cell.algorithm_name(), cell.s, cell.config.b);
        let value = run.result.final_mmd_squared();
        match groups.iter_mut().find(|g| (g.0, g.1, g.2) == key) {
            Some(g) => g.3.push(value),
            None => groups.push((key.0, key.1, key.2, vec![value])),
        }
    }
    for (name, s, b, mut values) in groups {
        values.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let _ = writeln!(
            out,
            "{name},{s},{b},{},{},{mean},{},{}",
            values.len(),
            median(&values),
            values[0],
            values[values.len() - 1]
        );
    }
    out
}

/// Median of sorted values; the mean of the two middle ones for even counts.
pub fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| io_failure(path, e))
}
