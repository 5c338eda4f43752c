//! JSON configs with dotted-path overrides.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::CliError;

/// Reads a JSON file. Syntax errors report line and column.
pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Applies `key.path=value`. The value is parsed as JSON when possible and
/// kept as a string otherwise; intermediate objects are created as needed.
/// Numeric segments index into arrays.
pub fn apply_set(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{assignment}`")))?;
    if path.is_empty() {
        return Err(CliError::Usage(format!("--set has an empty key in `{assignment}`")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        node = match node {
            Value::Array(items) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| CliError::Usage(format!("`{seg}` in `{path}` must index an array")))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| CliError::Usage(format!("index {idx} in `{path}` is out of range ({len})")))?
            }
            other => {
                if !other.is_object() {
                    *other = Value::Object(Default::default());
                }
                let map = other.as_object_mut().expect("object");
                map.entry(seg.to_string()).or_insert(Value::Null)
            }
        };
        if last {
            *node = value;
            return Ok(());
        }
    }
    unreachable!("loop returns on the last segment")
}

/// Converts to a typed config, naming the offending field on failure.
pub fn parse_typed<T: DeserializeOwned>(value: Value) -> Result<T, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::Config(e.inner().to_string())
        } else {
            CliError::Config(format!("at `{path}`: {}", e.inner()))
        }
    })
}
