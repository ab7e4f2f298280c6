//! File output helpers. Every writer maps failures to [`CliError::Io`] with the path.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Writes `rows` as CSV with a header taken from the row type's field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let map = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Config(format!("{}: {other:?}", path.display())),
    };
    let mut w = csv::Writer::from_path(path).map_err(map)?;
    for row in rows {
        w.serialize(row).map_err(map)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// `dir/name`, creating `dir` first.
pub fn output_path(dir: &Path, name: &str) -> CliResult<PathBuf> {
    ensure_dir(dir)?;
    Ok(dir.join(name))
}
