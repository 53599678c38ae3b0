//! Reading candidate sets and writing results and reports.

mod diagnose;
mod result;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::Points;

pub use diagnose::{diagnose, DiagnosticReport};
pub use result::{read_result, read_result_csv, write_result, write_result_to, ResultFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateFormat {
    #[default]
    Csv,
}

/// The finite set of points the algorithms select from, with optional scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    points: Points,
    scores: Option<Points>,
    provenance: String,
}

impl CandidateSet {
    pub fn new(points: Points) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::DegenerateData("empty candidate set".into()));
        }
        Ok(Self {
            points,
            scores: None,
            provenance: String::new(),
        })
    }

    pub fn with_scores(mut self, scores: Points) -> Result<Self> {
        if scores.len() != self.points.len() {
            return Err(Error::ShapeMismatch {
                what: "score matrix".into(),
                expected: self.points.len(),
                found: scores.len(),
            });
        }
        if scores.dim() != self.points.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.points.dim(),
                found: scores.dim(),
            });
        }
        self.scores = Some(scores);
        Ok(self)
    }

    pub fn with_provenance(mut self, note: impl Into<String>) -> Self {
        self.provenance = note.into();
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn scores(&self) -> Option<&Points> {
        self.scores.as_ref()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }
}

/// Loads points (and optionally a parallel score file of identical shape).
///
/// CSV: one point per row; a first row that does not parse as numbers is taken
/// as a header. Row order is preserved.
pub fn load_candidates(path: &Path, format: CandidateFormat, score_path: Option<&Path>) -> Result<CandidateSet> {
    let CandidateFormat::Csv = format;
    let (points, rows) = read_csv_matrix(path)?;
    let mut set = CandidateSet::new(points)?.with_provenance(format!("{} rows 0..{}", path.display(), rows));
    if let Some(sp) = score_path {
        let (scores, _) = read_csv_matrix(sp)?;
        set = set.with_scores(scores)?;
    }
    Ok(set)
}

fn read_csv_matrix(path: &Path) -> Result<(Points, usize)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv_matrix(file, &path.display().to_string())
}

pub(crate) fn parse_csv_matrix<R: std::io::Read>(reader: R, name: &str) -> Result<(Points, usize)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut dim = None;
    let mut rows = 0usize;
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 1;
        let rec = rec.map_err(|e| Error::Parse {
            path: name.into(),
            line,
            msg: e.to_string(),
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if k == 0 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    path: name.into(),
                    line,
                    msg: format!("non-numeric field: {e}"),
                })
            }
        };
        let d = *dim.get_or_insert(values.len());
        if values.len() != d {
            return Err(Error::Parse {
                path: name.into(),
                line,
                msg: format!("ragged row: expected {d} columns, found {}", values.len()),
            });
        }
        if let Some(col) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: rows, col });
        }
        data.extend(values);
        rows += 1;
    }
    let dim = dim.ok_or_else(|| Error::DegenerateData(format!("{name}: no numeric rows")))?;
    Ok((Points::new(dim, data)?, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn loads_plain_and_headed_csv() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(&dir, "a.csv", "0,0\n1,1\n");
        let b = write(&dir, "b.csv", "x1,x2\n0,0\n1,1\n");
        let sa = load_candidates(&a, CandidateFormat::Csv, None).unwrap();
        let sb = load_candidates(&b, CandidateFormat::Csv, None).unwrap();
        assert_eq!((sa.len(), sa.dim()), (2, 2));
        assert_eq!(sa.points(), sb.points());
    }

    #[test]
    fn score_shape_mismatch_names_counts() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(&dir, "a.csv", "0,0\n1,1\n");
        let s = write(&dir, "s.csv", "0,0\n1,1\n2,2\n");
        let err = load_candidates(&a, CandidateFormat::Csv, Some(&s)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('3') && msg.contains('2'), "{msg}");
    }

    #[test]
    fn ragged_and_non_finite_rows() {
        let dir = tempfile::tempdir().unwrap();
        let r = write(&dir, "r.csv", "0,0\n1\n");
        assert!(matches!(
            load_candidates(&r, CandidateFormat::Csv, None),
            Err(Error::Parse { line: 2, .. })
        ));
        let nf = write(&dir, "nf.csv", "h1,h2\n0,0\n1,inf\n");
        assert!(matches!(
            load_candidates(&nf, CandidateFormat::Csv, None),
            Err(Error::NonFinite { row: 1, col: 1 })
        ));
        let txt = write(&dir, "t.csv", "0,0\nfoo,1\n");
        assert!(load_candidates(&txt, CandidateFormat::Csv, None).is_err());
    }

    #[test]
    fn decimal_point_only() {
        let (p, _) = parse_csv_matrix("1.5,2.25\n-3e-2,4\n".as_bytes(), "mem").unwrap();
        assert_eq!(p.as_slice(), &[1.5, 2.25, -0.03, 4.0]);
        // a decimal comma is a column separator, which makes the row ragged
        assert!(parse_csv_matrix("1.5,2.0\n\"1,5\",2.0\n".as_bytes(), "mem").is_err());
    }
}
