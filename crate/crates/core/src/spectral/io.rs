//! Field files: a flat little-endian `f64` array (row-major nodes,
//! component-major) next to a JSON sidecar `{components, dim, n, name}`.
//! The sidecar shares the data file's stem with a `.json` extension.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use super::field::Field;
use super::grid::GridSpec;
use crate::error::{Error, Result};

pub fn sidecar_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("json")
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `field` to `path` and its sidecar; `extra` keys are merged into the sidecar.
pub fn write_field<K>(field: &Field<K>, path: &Path, name: &str, extra: &[(&str, Value)]) -> Result<()> {
    let mut bytes = Vec::with_capacity(field.data().len() * 8);
    for v in field.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))?;
    let mut meta = Map::new();
    meta.insert("components".into(), json!(field.dim()));
    meta.insert("dim".into(), json!(field.dim()));
    meta.insert("n".into(), json!(field.grid().n()));
    meta.insert("name".into(), json!(name));
    for (k, v) in extra {
        meta.insert((*k).to_string(), v.clone());
    }
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(&Value::Object(meta)).expect("json");
    fs::write(&side, text).map_err(|e| io_err(&side, e))
}

/// Reads a field and its sidecar metadata.
pub fn read_field<K>(path: &Path) -> Result<(Field<K>, Map<String, Value>)> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| io_err(&side, e))?;
    let meta: Map<String, Value> = serde_json::from_str::<Value>(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", side.display())))?
        .as_object()
        .cloned()
        .ok_or_else(|| Error::Format(format!("{}: sidecar must be a JSON object", side.display())))?;
    let get = |key: &str| -> Result<usize> {
        meta.get(key)
            .and_then(Value::as_u64)
            .map(|v| v as usize)
            .ok_or_else(|| Error::Format(format!("{}: missing or invalid key `{key}`", side.display())))
    };
    let dim = get("dim")?;
    let n = get("n")?;
    let components = get("components")?;
    if components != dim {
        return Err(Error::Format(format!(
            "{}: expected {dim} components, sidecar says {components}",
            side.display()
        )));
    }
    let grid = GridSpec::new(dim, n)?;
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() != 8 * dim * grid.len() {
        return Err(Error::Format(format!(
            "{}: expected {} bytes, found {}",
            path.display(),
            8 * dim * grid.len(),
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    Ok((Field::from_vec(&grid, data)?, meta))
}
