//! JSON-lines files with a one-line schema header.
//!
//! Every JSON-lines artifact starts with `{"schema":"<name>"}` so a loader
//! can refuse a file of the wrong kind before reading any record. Readers
//! also accept headerless files; writers always emit the header.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed { path: String, line: usize, reason: String },
    #[error("{path}: declared schema `{found}`, expected `{expected}`")]
    SchemaMismatch {
        path: String,
        expected: String,
        found: String,
    },
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
}

/// A record together with the 1-based line it was read from.
#[derive(Debug, Clone, PartialEq)]
pub struct Numbered<T> {
    pub line: usize,
    pub value: T,
}

pub fn read<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<Numbered<T>>, JsonlError> {
    let text = fs::read_to_string(path).map_err(|source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text, &path.display().to_string(), schema)
}

pub fn parse<T: DeserializeOwned>(text: &str, origin: &str, schema: &str) -> Result<Vec<Numbered<T>>, JsonlError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        if out.is_empty() && line_is_header(raw) {
            let header: Header = serde_json::from_str(raw).map_err(|e| JsonlError::Malformed {
                path: origin.to_string(),
                line,
                reason: e.to_string(),
            })?;
            if header.schema != schema {
                return Err(JsonlError::SchemaMismatch {
                    path: origin.to_string(),
                    expected: schema.to_string(),
                    found: header.schema,
                });
            }
            continue;
        }
        let value = serde_json::from_str(raw).map_err(|e| JsonlError::Malformed {
            path: origin.to_string(),
            line,
            reason: e.to_string(),
        })?;
        out.push(Numbered { line, value });
    }
    Ok(out)
}

fn line_is_header(raw: &str) -> bool {
    match serde_json::from_str::<serde_json::Value>(raw) {
        Ok(serde_json::Value::Object(map)) => map.len() == 1 && map.contains_key("schema"),
        _ => false,
    }
}

pub fn render<T: Serialize>(schema: &str, records: &[T]) -> String {
    let mut out = serde_json::to_string(&Header {
        schema: schema.to_string(),
    })
    .expect("header serializes");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write<T: Serialize>(path: &Path, schema: &str, records: &[T]) -> Result<(), JsonlError> {
    write_text(path, &render(schema, records))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), JsonlError> {
    let io = |source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        a: u32,
    }

    #[test]
    fn header_is_checked() {
        let text = render("rows", &[Row { a: 1 }, Row { a: 2 }]);
        assert_eq!(text, "{\"schema\":\"rows\"}\n{\"a\":1}\n{\"a\":2}\n");
        let rows: Vec<Numbered<Row>> = parse(&text, "t", "rows").unwrap();
        assert_eq!(
            rows[1],
            Numbered {
                line: 3,
                value: Row { a: 2 }
            }
        );
        let err = parse::<Row>(&text, "t", "other").unwrap_err();
        assert!(matches!(err, JsonlError::SchemaMismatch { .. }));
    }

    #[test]
    fn headerless_and_bad_lines() {
        let rows: Vec<Numbered<Row>> = parse("{\"a\":5}\n\n", "t", "rows").unwrap();
        assert_eq!(rows.len(), 1);
        let err = parse::<Row>("{\"a\":5}\n{\"a\":\n", "t", "rows").unwrap_err();
        assert!(err.to_string().starts_with("t:2:"), "{err}");
    }
}
