//! Merging summaries from several experiment runs into one table.

use std::collections::BTreeSet;
use std::path::Path;

use super::experiment::{format_table, SummaryRow, SUMMARY_HEADER};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const EXPERIMENT_MANIFEST: &str = "manifest-experiment.json";

fn parse_opt<T: std::str::FromStr>(s: &str, path: &Path) -> Result<Option<T>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::format(path.display().to_string(), format!("bad value `{s}`")))
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let err = |e: csv::Error| Error::format(path.display().to_string(), e.to_string());
    let mut rdr = csv::Reader::from_path(path).map_err(err)?;
    let header = rdr.headers().map_err(err)?.clone();
    if header.iter().ne(SUMMARY_HEADER) {
        return Err(Error::format(path.display().to_string(), "unexpected summary columns"));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(err)?;
        rows.push(SummaryRow {
            shape: rec[0].to_string(),
            estimator: rec[1].to_string(),
            episodes: parse_opt(&rec[2], path)?.unwrap_or(0),
            success_rate: parse_opt(&rec[3], path)?,
            mean_trials: parse_opt(&rec[4], path)?,
            max_trials: parse_opt(&rec[5], path)?,
        });
    }
    Ok(rows)
}

/// Run id recorded in a run directory's manifest, checking its schema.
pub fn read_run_id(dir: &Path) -> Result<String> {
    let path = dir.join(EXPERIMENT_MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    match v.get("schema_version").and_then(|s| s.as_u64()) {
        Some(n) if n == SCHEMA_VERSION as u64 => {}
        other => {
            return Err(Error::SchemaMismatch {
                path,
                expected: SCHEMA_VERSION,
                found: other.map_or_else(|| "none".to_string(), |n| n.to_string()),
            })
        }
    }
    Ok(v.get("run_id")
        .and_then(|s| s.as_str())
        .map(str::to_string)
        .unwrap_or_else(|| dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()))
}

/// Rows from every run, keyed by `(shape, estimator)`. A repeated key gets
/// the run id appended to its shape so nothing is overwritten.
pub fn merge_runs(dirs: &[&Path]) -> Result<Vec<SummaryRow>> {
    if dirs.is_empty() {
        return Err(Error::InvalidParameter("report needs at least one run directory".into()));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for dir in dirs {
        let run_id = read_run_id(dir)?;
        for mut row in read_summary_csv(&dir.join("summary.csv"))? {
            let key = (row.shape.clone(), row.estimator.clone());
            if !seen.insert(key) {
                let mut n = 1;
                let base = format!("{}@{}", row.shape, run_id);
                let mut name = base.clone();
                while !seen.insert((name.clone(), row.estimator.clone())) {
                    n += 1;
                    name = format!("{base}#{n}");
                }
                row.shape = name;
            }
            out.push(row);
        }
    }
    Ok(out)
}

pub fn report_table(dirs: &[&Path]) -> Result<String> {
    Ok(format_table(&merge_runs(dirs)?))
}
