use std::path::{Path, PathBuf};

use quant_core::SelectionConfig;
use serde::{Deserialize, Serialize};

use crate::args::FormatArg;
use crate::problem::{io_failure, verify_digests, Failure, InputDigest, ProblemSpec};

/// Resolved configuration of a `select` run; enough to reproduce its selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    pub points: usize,
    pub problem: ProblemSpec,
    pub selection: SelectionConfig,
    pub inputs: Vec<InputDigest>,
    pub result: Option<PathBuf>,
    pub result_format: FormatArg,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
        let manifest: Self = serde_json::from_str(&text).map_err(|e| io_failure(path, e))?;
        verify_digests(&manifest.inputs)?;
        Ok(manifest)
    }

    pub fn write(&self, path: &Path) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(self).map_err(|e| io_failure(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| io_failure(path, e))
    }
}

/// `out.json` -> `out.json.manifest.json`.
pub fn manifest_path(result: &Path) -> PathBuf {
    let mut name = result.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    result.with_file_name(name)
}
