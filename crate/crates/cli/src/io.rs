//! Output locations and atomic file writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Environment variable holding the default root for relative output directories.
pub const OUTPUT_ROOT_VAR: &str = "STRIDER_OUTPUT_ROOT";

/// `--out` wins; otherwise the configured directory, placed under
/// `$STRIDER_OUTPUT_ROOT` when it is relative and the variable is set.
pub fn resolve_output(cli_out: Option<&Path>, configured: &Path) -> PathBuf {
    if let Some(p) = cli_out {
        return p.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) if configured.is_relative() && !root.is_empty() => PathBuf::from(root).join(configured),
        _ => configured.to_path_buf(),
    }
}

/// Writes via a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(CliError::io(dir))?;
    tmp.write_all(bytes).map_err(CliError::io(path))?;
    tmp.as_file().sync_all().map_err(CliError::io(path))?;
    tmp.persist(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

/// Serializes rows of string fields with a header as CSV, atomically.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    write_atomic(path, &bytes)
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
