use std::path::Path;

use quant_core::{diagnose, read_result, read_result_csv, Discrepancy};

use crate::args::{DiagnoseArgs, FormatArg};
use crate::manifest::RunManifest;
use crate::problem::{io_failure, Failure};
use crate::Globals;

pub fn run(globals: &Globals, args: DiagnoseArgs) -> Result<(), Failure> {
    let manifest = RunManifest::read(&args.manifest)?;
    let result_path = match (&args.result, &manifest.result) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => p.clone(),
        (None, None) => return Err(Failure::usage("the manifest names no result file; pass --result")),
    };
    let result = match sniff_format(&result_path, manifest.result_format) {
        FormatArg::Json => read_result(&result_path)?,
        FormatArg::Csv => read_result_csv(&result_path, manifest.selection.clone())?,
    };
    let mut spec = manifest.problem;
    let problem = spec.load(manifest.seed)?;
    let ctx = Discrepancy::new(&problem.candidates, &problem.target, problem.kernel)?;
    let report = diagnose(&ctx, &result)?;

    println!("{report}");
    let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::data(e.to_string()))?;
    match &globals.output {
        Some(path) => std::fs::write(path, json + "\n").map_err(|e| io_failure(path, e))?,
        None => println!("{json}"),
    }
    Ok(())
}

/// JSON if the file starts with `{`, otherwise the manifest's format.
fn sniff_format(path: &Path, recorded: FormatArg) -> FormatArg {
    match std::fs::read(path) {
        Ok(bytes) => match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
            Some(b'{') => FormatArg::Json,
            Some(_) => FormatArg::Csv,
            None => recorded,
        },
        Err(_) => recorded,
    }
}
