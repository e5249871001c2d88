//! Canonical on-disk forms.
//!
//! Documents are JSON objects `{"schema_version", "kind", "body"}`. Corpora are
//! line-delimited: a header line `{"schema_version", "kind": "corpus"}`
//! followed by one dialogue per line.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Database, Dialogue, GoalSet, Manual};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("parse error at byte {offset} (line {line}, column {column}): {message}")]
    Parse {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported schema version {found} (expected {SCHEMA_VERSION})")]
    Version { found: u32 },
    #[error("expected a '{expected}' document, found '{found}'")]
    Kind { expected: String, found: String },
}

/// A type stored as a standalone document.
pub trait DocumentKind: Serialize + DeserializeOwned {
    const KIND: &'static str;
}

impl DocumentKind for Manual {
    const KIND: &'static str = "manual";
}
impl DocumentKind for Database {
    const KIND: &'static str = "database";
}
impl DocumentKind for GoalSet {
    const KIND: &'static str = "goals";
}
impl DocumentKind for Dialogue {
    const KIND: &'static str = "dialogue";
}

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    schema_version: u32,
    kind: &'a str,
    body: &'a T,
}

#[derive(Deserialize)]
struct EnvelopeIn<T> {
    schema_version: u32,
    kind: String,
    body: T,
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    kind: String,
}

fn parse_error(text: &str, base: usize, err: &serde_json::Error) -> CodecError {
    let (line, column) = (err.line(), err.column());
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            offset += column.saturating_sub(1).min(l.len());
            break;
        }
        offset += l.len();
    }
    CodecError::Parse {
        offset: base + offset,
        line,
        column,
        message: err.to_string(),
    }
}

fn check_header(version: u32, kind: &str, expected: &str) -> Result<(), CodecError> {
    if version != SCHEMA_VERSION {
        return Err(CodecError::Version { found: version });
    }
    if kind != expected {
        return Err(CodecError::Kind {
            expected: expected.to_string(),
            found: kind.to_string(),
        });
    }
    Ok(())
}

pub fn to_document<T: DocumentKind>(value: &T) -> String {
    let env = EnvelopeOut {
        schema_version: SCHEMA_VERSION,
        kind: T::KIND,
        body: value,
    };
    let mut s = serde_json::to_string_pretty(&env).expect("core types serialize");
    s.push('\n');
    s
}

pub fn from_document<T: DocumentKind>(text: &str) -> Result<T, CodecError> {
    if let Ok(h) = serde_json::from_str::<EnvelopeIn<serde::de::IgnoredAny>>(text) {
        check_header(h.schema_version, &h.kind, T::KIND)?;
    }
    let env: EnvelopeIn<T> = serde_json::from_str(text).map_err(|e| parse_error(text, 0, &e))?;
    check_header(env.schema_version, &env.kind, T::KIND)?;
    Ok(env.body)
}

/// Writes a line-delimited file of `kind` records.
pub fn to_lines<T: Serialize>(kind: &str, records: &[T]) -> String {
    let header = Header {
        schema_version: SCHEMA_VERSION,
        kind: kind.to_string(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn from_lines<T: DeserializeOwned>(kind: &str, text: &str) -> Result<Vec<T>, CodecError> {
    let mut offset = 0;
    let mut records = Vec::new();
    let mut header_seen = false;
    for line in text.split_inclusive('\n') {
        let body = line.trim_end_matches(['\n', '\r']);
        if body.trim().is_empty() {
            offset += line.len();
            continue;
        }
        if !header_seen {
            let h: Header =
                serde_json::from_str(body).map_err(|e| parse_error(body, offset, &e))?;
            check_header(h.schema_version, &h.kind, kind)?;
            header_seen = true;
        } else {
            records.push(serde_json::from_str(body).map_err(|e| parse_error(body, offset, &e))?);
        }
        offset += line.len();
    }
    if !header_seen {
        return Err(CodecError::Parse {
            offset: text.len(),
            line: 1,
            column: 1,
            message: format!("missing '{kind}' header line"),
        });
    }
    Ok(records)
}

pub fn corpus_to_string(dialogues: &[Dialogue]) -> String {
    to_lines("corpus", dialogues)
}

pub fn corpus_from_str(text: &str) -> Result<Vec<Dialogue>, CodecError> {
    from_lines("corpus", text)
}
