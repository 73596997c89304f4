//! Flat `key = value` text documents.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored. An
//! optional `[section args]` line starts a new section; entries before the
//! first section belong to the preamble. Values are trimmed but otherwise
//! kept verbatim, so parsing is left to the caller.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub line: usize,
    /// Text between the brackets, e.g. `job seed-1`.
    pub header: String,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvDoc {
    pub preamble: Vec<Entry>,
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KvError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for KvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for KvError {}

impl KvDoc {
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut doc = KvDoc::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let header = rest.strip_suffix(']').ok_or_else(|| KvError {
                    line,
                    message: format!("unterminated section header `{content}`"),
                })?;
                doc.sections.push(Section { line, header: header.trim().to_string(), entries: Vec::new() });
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| KvError {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(KvError { line, message: "empty key".into() });
            }
            let entry = Entry { line, key: key.to_string(), value: value.trim().to_string() };
            match doc.sections.last_mut() {
                Some(section) => section.entries.push(entry),
                None => doc.preamble.push(entry),
            }
        }
        Ok(doc)
    }

    /// Last value for `key` in the preamble.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.preamble.iter().rev().find(|e| e.key == key).map(|e| e.value.as_str())
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

pub fn parse_bool(value: &str) -> Option<bool> {
    match value {
        "true" | "on" | "yes" | "1" => Some(true),
        "false" | "off" | "no" | "0" => Some(false),
        _ => None,
    }
}
