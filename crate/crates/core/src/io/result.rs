use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selectors::{SelectionConfig, SelectionResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultFormat {
    #[default]
    Json,
    Csv,
}

/// Writes a selection result.
///
/// JSON holds `pi`, `trace`, `timings_ms` and `config`. CSV has one row per
/// iteration: `iteration,points_selected,indices,mmd_squared,cumulative_ms`,
/// with the iteration's indices joined by `;`.
pub fn write_result(result: &SelectionResult, path: &Path, format: ResultFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_result_to(result, BufWriter::new(file), format).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Same as [`write_result`] but to any writer, e.g. standard output.
pub fn write_result_to<W: Write>(result: &SelectionResult, mut out: W, format: ResultFormat) -> Result<()> {
    let io = |e| Error::io("<output>", e);
    match format {
        ResultFormat::Json => {
            serde_json::to_writer_pretty(&mut out, result)?;
            writeln!(out).map_err(io)?;
        }
        ResultFormat::Csv => write_csv(result, &mut out).map_err(io)?,
    }
    out.flush().map_err(io)
}

fn write_csv<W: Write>(result: &SelectionResult, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "iteration,points_selected,indices,mmd_squared,cumulative_ms")?;
    let mut points = 0;
    let mut elapsed = 0.0;
    for (i, ((row, mmd), ms)) in result.pi.iter().zip(&result.trace).zip(&result.timings_ms).enumerate() {
        points += row.len();
        elapsed += ms;
        let joined: Vec<String> = row.iter().map(usize::to_string).collect();
        writeln!(out, "{},{},{},{},{}", i + 1, points, joined.join(";"), mmd, elapsed)?;
    }
    Ok(())
}

/// Reads a JSON result written by [`write_result`].
pub fn read_result(path: &Path) -> Result<SelectionResult> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let result: SelectionResult = serde_json::from_reader(std::io::BufReader::new(file))?;
    check_read(result, path)
}

/// Reads a CSV result. The CSV layout has no config, so the caller supplies it.
pub fn read_result_csv(path: &Path, config: SelectionConfig) -> Result<SelectionResult> {
    let name = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        path: name.clone(),
        line: 0,
        msg: e.to_string(),
    })?;
    let mut result = SelectionResult {
        pi: Vec::new(),
        trace: Vec::new(),
        timings_ms: Vec::new(),
        config,
    };
    let mut last_ms = 0.0;
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let bad = |msg: String| Error::Parse {
            path: name.clone(),
            line,
            msg,
        };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", rec.len())));
        }
        let row = rec[2]
            .split(';')
            .map(|x| x.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("indices: {e}")))?;
        let mmd: f64 = rec[3].trim().parse().map_err(|e| bad(format!("mmd_squared: {e}")))?;
        let ms: f64 = rec[4].trim().parse().map_err(|e| bad(format!("cumulative_ms: {e}")))?;
        result.pi.push(row);
        result.trace.push(mmd);
        result.timings_ms.push((ms - last_ms).max(0.0));
        last_ms = ms;
    }
    check_read(result, path)
}

fn check_read(result: SelectionResult, path: &Path) -> Result<SelectionResult> {
    if result.pi.is_empty() || result.trace.len() != result.pi.len() {
        return Err(Error::DegenerateData(format!(
            "{}: result needs one trace value per iteration",
            path.display()
        )));
    }
    Ok(result)
}
