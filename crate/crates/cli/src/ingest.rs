use std::io::Write;
use std::path::Path;

use ewps_core::Dataset;

use crate::{CliError, CliResult};

/// Parses a single-column CSV body. A first line that is not a number is
/// taken as a header; blank lines are ignored. Errors name the 1-based line.
pub fn parse_csv(text: &str) -> CliResult<Dataset> {
    let mut values = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim().trim_start_matches('\u{feff}');
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        if line.contains(',') || line.contains(';') || line.contains('\t') {
            return Err(CliError::usage(format!(
                "line {lineno}: expected a single column, got {line:?}"
            )));
        }
        let v: f64 = match line.parse() {
            Ok(v) => v,
            Err(_) if values.is_empty() && i == 0 => continue,
            Err(_) => {
                return Err(CliError::usage(format!(
                    "line {lineno}: cannot parse {line:?} as a number"
                )))
            }
        };
        if !(v.is_finite() && v > 0.0) {
            return Err(CliError::usage(format!(
                "line {lineno}: {v} is not a positive finite lifetime"
            )));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::usage("no data rows found"));
    }
    Ok(Dataset::new(values)?)
}

/// Reads and validates `path`, logging a one-line summary to `log`.
pub fn ingest_csv(path: &Path, log: &mut dyn Write) -> CliResult<Dataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let d = parse_csv(&text).map_err(|e| CliError {
        code: e.code,
        message: format!("{}: {}", path.display(), e.message),
    })?;
    let s = d.summary();
    writeln!(
        log,
        "read {}: n={} min={} max={} mean={:.6}",
        path.display(),
        s.n,
        s.min,
        s.max,
        s.mean
    )?;
    Ok(d)
}
