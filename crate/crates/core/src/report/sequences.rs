use std::collections::BTreeSet;
use std::path::Path;

use serde_json::Value;

use super::ReportError;
use crate::executor::{Sequence, SequenceEntry};

/// Sequences in `ours` that `theirs` does not contain. Plain set difference,
/// no subsequence matching.
pub fn diff_sequences(ours: &BTreeSet<Sequence>, theirs: &BTreeSet<Sequence>) -> BTreeSet<Sequence> {
    ours.difference(theirs).cloned().collect()
}

fn parse_sequence(v: &Value) -> Result<Sequence, String> {
    match v {
        Value::Array(items) => items
            .iter()
            .map(|i| {
                i.as_str()
                    .ok_or_else(|| format!("sequence entry {i} is not a string"))?
                    .parse::<SequenceEntry>()
            })
            .collect(),
        Value::String(s) => s.split("->").map(|p| p.trim().parse::<SequenceEntry>()).collect(),
        other => Err(format!("expected a sequence, got {other}")),
    }
}

/// Loads a set of sequences from a JSON file holding an array of sequences
/// (each an array of `"METHOD /path"` strings or one `"A -> B"` string), or
/// an object with such an array under `sequences` (e.g. a report.json).
pub fn load_sequence_set(path: &Path) -> Result<BTreeSet<Sequence>, ReportError> {
    let bad = |message: String| ReportError::Format {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let list = match &value {
        Value::Array(a) => a,
        Value::Object(o) => o
            .get("sequences")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("object has no \"sequences\" array".into()))?,
        _ => return Err(bad("expected an array or an object".into())),
    };
    list.iter().map(|v| parse_sequence(v).map_err(&bad)).collect()
}
