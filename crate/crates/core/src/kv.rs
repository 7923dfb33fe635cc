//! Line-oriented `key = value` files used for pipeline configs, synthetic
//! specs and quantization configs. `#` starts a comment; keys may repeat.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse(text: &str, file: &str) -> Result<Vec<Entry>> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                file: file.to_string(),
                line: idx + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse { file: file.to_string(), line: idx + 1, msg: "empty key".into() });
        }
        entries.push(Entry { key: key.to_string(), value: value.trim().to_string(), line: idx + 1 });
    }
    Ok(entries)
}

pub fn read(path: &Path) -> Result<Vec<Entry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, &path.display().to_string())
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

pub(crate) fn parse_err(file: &str, entry: &Entry, msg: impl Into<String>) -> Error {
    Error::Parse { file: file.to_string(), line: entry.line, msg: msg.into() }
}

pub(crate) fn value<T: std::str::FromStr>(file: &str, entry: &Entry) -> Result<T> {
    entry
        .value
        .parse()
        .map_err(|_| parse_err(file, entry, format!("bad value `{}` for `{}`", entry.value, entry.key)))
}
