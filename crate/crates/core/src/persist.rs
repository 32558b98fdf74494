//! Small file-format helpers shared by dataset, model, and config files.
//!
//! Everything on disk is either a `t,value[,label]` CSV (see
//! [`crate::series`]) or a line-oriented `key=value` file. Floats are
//! written with the shortest representation that parses back to identical
//! bits, so a rerun of the same binary reproduces files byte for byte.

use crate::error::{Error, Result};
use std::path::Path;

/// Writes a file atomically: the content lands in a sibling temp file
/// which is renamed over the target, so readers never observe a partial
/// write and a crashed run leaves the previous version intact.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Domain(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, contents)?;
    match std::fs::rename(&tmp, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e.into())
        }
    }
}

/// Parses a `key=value` file into ordered pairs.
///
/// Blank lines and lines starting with `#` are skipped. Keys may repeat
/// (list-valued entries); order is preserved. Errors carry the 1-based
/// line number of the offending row.
pub fn parse_key_value(name: &str, text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::Malformed {
            file: name.to_string(),
            row,
            msg: format!("expected 'key=value', got '{trimmed}'"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Malformed {
                file: name.to_string(),
                row,
                msg: "empty key".into(),
            });
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Looks up a single-valued key, erroring when it is absent or repeated.
pub fn require_unique<'a>(
    pairs: &'a [(String, String)],
    key: &str,
    file: &str,
) -> Result<&'a str> {
    let mut found = None;
    for (k, v) in pairs {
        if k == key {
            if found.is_some() {
                return Err(Error::Malformed {
                    file: file.to_string(),
                    row: 0,
                    msg: format!("key '{key}' appears more than once"),
                });
            }
            found = Some(v.as_str());
        }
    }
    found.ok_or_else(|| Error::Malformed {
        file: file.to_string(),
        row: 0,
        msg: format!("missing key '{key}'"),
    })
}

/// Parses a float field, naming the key in the error.
pub fn parse_f64_field(value: &str, key: &str, file: &str) -> Result<f64> {
    value.parse().map_err(|_| Error::Malformed {
        file: file.to_string(),
        row: 0,
        msg: format!("key '{key}': unparseable number '{value}'"),
    })
}

/// Parses an integer field, naming the key in the error.
pub fn parse_u64_field(value: &str, key: &str, file: &str) -> Result<u64> {
    value.parse().map_err(|_| Error::Malformed {
        file: file.to_string(),
        row: 0,
        msg: format!("key '{key}': unparseable integer '{value}'"),
    })
}
