//! CSV/JSON input and atomic output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;
use wismc::WismcModel;

use crate::error::{CliError, CliResult};

/// Writes `bytes` to a temp file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut tmp = NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Serializes rows with a header into CSV bytes.
pub fn csv_bytes<I, R>(header: &[&str], rows: I) -> CliResult<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Usage(format!("csv encoding failed: {e}"));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row).map_err(fail)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Usage(format!("csv encoding failed: {e}")))
}

pub fn json_bytes<T: serde::Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value).map_err(wismc::Error::from)?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x:?}")
    }
}

/// Reads a return series CSV with a `return` column (an optional `t`
/// column is ignored).
pub fn read_returns(path: &Path) -> CliResult<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => CliError::data(path, format!("{other:?}")),
        })?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::data(path, e.to_string()))?
        .clone();
    let col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("return"))
        .ok_or_else(|| CliError::data(path, "missing 'return' column"))?;
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| CliError::data(path, format!("line {line}: {e}")))?;
        let v: f64 = rec
            .get(col)
            .and_then(|f| f.parse().ok())
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| CliError::data(path, format!("line {line}: malformed return")))?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(CliError::data(path, "no returns"));
    }
    Ok(out)
}

pub fn read_model(path: &Path) -> CliResult<WismcModel> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    WismcModel::from_json(&text).map_err(|e| CliError::data(path, e.to_string()))
}

pub fn open(path: &Path) -> CliResult<fs::File> {
    fs::File::open(path).map_err(|e| CliError::io(path, e))
}
