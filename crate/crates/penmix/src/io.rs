//! Single-column numeric CSV input and small file helpers.

use std::fs;
use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

/// Reads one numeric column. Lines starting with `#` are comments, blank
/// lines are skipped, and the first record is a header iff `header` is set.
pub fn read_data<R: Read>(input: R, header: bool) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.context("malformed CSV")?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 1 {
            bail!("line {line}: expected one column, found {}", record.len());
        }
        let field = &record[0];
        match field.parse::<f64>() {
            Ok(x) if x.is_finite() => out.push(x),
            _ => bail!("line {line}: `{field}` is not a finite number"),
        }
    }
    Ok(out)
}

pub fn read_data_file(path: &Path, header: bool) -> Result<Vec<f64>> {
    let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_data(file, header).with_context(|| format!("reading {}", path.display()))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}
