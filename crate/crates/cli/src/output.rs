use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// `key,value` rows for the scalar fields of a flat object. Arrays are
/// joined with `;`.
pub fn to_kv_csv<T: Serialize>(value: &T) -> String {
    let mut out = String::from("key,value\n");
    if let Value::Object(map) = serde_json::to_value(value).expect("report serializes") {
        for (k, v) in map {
            let cell = match &v {
                Value::Array(items) => items.iter().map(scalar).collect::<Vec<_>>().join(";"),
                Value::Object(_) => continue,
                other => scalar(other),
            };
            writeln!(out, "{k},{cell}").unwrap();
        }
    }
    out
}

/// Header plus one row per record, columns in field order of the first.
pub fn to_table_csv<T: Serialize>(rows: &[T]) -> String {
    let values: Vec<Value> = rows.iter().map(|r| serde_json::to_value(r).expect("row serializes")).collect();
    let Some(Value::Object(first)) = values.first() else {
        return String::new();
    };
    let keys: Vec<&String> = first.keys().collect();
    let mut out = keys.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(",");
    out.push('\n');
    for v in &values {
        let row: Vec<String> = keys.iter().map(|k| v.get(k.as_str()).map(scalar).unwrap_or_default()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn print(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}
