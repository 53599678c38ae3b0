use std::path::{Path, PathBuf};

use quant_core::{
    select, write_result, write_result_to, Algorithm, BranchBoundOptions, Discrepancy, SdrOptions, SelectionConfig,
    SelectionResult, SolverOptions,
};

use crate::args::{AlgorithmArg, SelectArgs, SolverArgs};
use crate::manifest::{manifest_path, RunManifest};
use crate::problem::{digest, io_failure, Failure, ProblemSpec};
use crate::Globals;

/// Turns a point budget and per-iteration count into a selection config.
pub fn selection_config(
    algorithm: AlgorithmArg,
    points: usize,
    s: usize,
    solver: &SolverArgs,
    seed: u64,
) -> Result<SelectionConfig, Failure> {
    if points == 0 {
        return Err(Failure::usage("--points must be at least 1"));
    }
    if s == 0 {
        return Err(Failure::usage("--s must be at least 1"));
    }
    let algorithm: Algorithm = algorithm.into();
    let (m, s) = match algorithm {
        Algorithm::Oneshot => (points, points),
        Algorithm::Myopic if s != 1 => {
            return Err(Failure::usage("myopic selection picks one point per iteration; use --s 1"));
        }
        _ if !points.is_multiple_of(s) => {
            return Err(Failure::usage(format!("--points {points} is not a multiple of --s {s}")));
        }
        _ => (points / s, s),
    };
    let mut config = SelectionConfig::new(algorithm, m, s)
        .with_batch(solver.batch, solver.batch_strategy.into())
        .with_seed(seed)
        .with_solver(SolverOptions {
            kind: solver.solver.into(),
            binary: solver.binary,
            bnb: BranchBoundOptions {
                node_limit: solver.node_limit,
                ..BranchBoundOptions::default()
            },
        });
    config.sdr = SdrOptions {
        rank: solver.rank,
        draws: solver.draws,
        tol: solver.sdr_tol,
        max_iter: solver.sdr_max_iter,
    };
    Ok(config)
}

pub fn run(globals: &Globals, args: SelectArgs) -> Result<(), Failure> {
    let (mut spec, config, seed, points) = match &args.manifest {
        Some(path) => {
            let m = RunManifest::read(path)?;
            (m.problem, m.selection, m.seed, m.points)
        }
        None => {
            let candidates = args.candidates.clone().ok_or_else(|| Failure::usage("missing --candidates"))?;
            let points = args.points.ok_or_else(|| Failure::usage("missing --points"))?;
            let spec = ProblemSpec::new(candidates, args.scores.clone(), args.mixture.clone(), &args.kernel);
            spec.check()?;
            let config = selection_config(args.algorithm, points, args.s, &args.solver, globals.seed)?;
            (spec, config, globals.seed, points)
        }
    };
    spec.absolutise()?;
    let inputs = spec.input_paths().into_iter().map(digest).collect::<Result<Vec<_>, _>>()?;
    let problem = spec.load(seed)?;
    let ctx = Discrepancy::new(&problem.candidates, &problem.target, problem.kernel)?;
    let result = select(&ctx, &config)?;

    match &globals.output {
        Some(path) => {
            write_result(&result, path, globals.format.into())?;
            let manifest = RunManifest {
                version: env!("CARGO_PKG_VERSION").to_string(),
                seed,
                points,
                problem: spec,
                selection: config,
                inputs,
                result: Some(absolute(path)?),
                result_format: globals.format,
            };
            manifest.write(&manifest_path(path))?;
            eprintln!("{}", summary(&result));
        }
        None => {
            let stdout = std::io::stdout().lock();
            write_result_to(&result, stdout, globals.format.into())?;
        }
    }
    Ok(())
}

fn absolute(path: &Path) -> Result<PathBuf, Failure> {
    path.canonicalize().map_err(|e| io_failure(path, e))
}

fn summary(result: &SelectionResult) -> String {
    let total_ms: f64 = result.timings_ms.iter().sum();
    format!(
        "{} iterations, {} points, final MMD^2 {:.6e}, {:.1} ms",
        result.iterations(),
        result.indices().len(),
        result.final_mmd_squared(),
        total_ms
    )
}
