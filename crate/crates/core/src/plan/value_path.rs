use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

/// Terminal segment that yields the length of the addressed array.
pub const COUNT_SEGMENT: &str = "#count";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathRoot {
    Body,
    Headers,
}

/// Location of a value inside a response: `"status"`, `"items/0/id"`,
/// `"items/#count"`, `"headers:X-Rate-Limit"`. The empty path is the whole body.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ValuePath {
    pub root: PathRoot,
    pub segments: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("extraction miss at {path}: {reason}")]
pub struct ExtractionMiss {
    pub path: String,
    pub reason: String,
}

impl ValuePath {
    pub fn body(segments: &[&str]) -> Self {
        Self {
            root: PathRoot::Body,
            segments: segments.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn header(name: &str) -> Self {
        Self {
            root: PathRoot::Headers,
            segments: vec![name.to_string()],
        }
    }
}

impl FromStr for ValuePath {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (root, rest) = if let Some(rest) = s.strip_prefix("headers:") {
            (PathRoot::Headers, rest)
        } else if let Some(rest) = s.strip_prefix("body:") {
            (PathRoot::Body, rest)
        } else {
            (PathRoot::Body, s)
        };
        let segments: Vec<String> = rest
            .trim_matches('/')
            .split('/')
            .filter(|seg| !seg.is_empty())
            .map(str::to_string)
            .collect();
        if let Some(pos) = segments.iter().position(|seg| seg == COUNT_SEGMENT) {
            if pos + 1 != segments.len() {
                return Err(format!("{COUNT_SEGMENT} must be the last segment in {s:?}"));
            }
        }
        if root == PathRoot::Headers && segments.is_empty() {
            return Err(format!("header path {s:?} names no header"));
        }
        Ok(Self { root, segments })
    }
}

impl fmt::Display for ValuePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.root == PathRoot::Headers {
            f.write_str("headers:")?;
        }
        f.write_str(&self.segments.join("/"))
    }
}

impl Serialize for ValuePath {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ValuePath {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

fn navigate(mut current: &Value, segments: &[String], path: &ValuePath) -> Result<Value, ExtractionMiss> {
    let miss = |reason: String| ExtractionMiss {
        path: path.to_string(),
        reason,
    };
    for seg in segments {
        if seg == COUNT_SEGMENT {
            return match current {
                Value::Array(items) => Ok(Value::from(items.len())),
                Value::Object(map) => Ok(Value::from(map.len())),
                other => Err(miss(format!("cannot count a {}", kind_name(other)))),
            };
        }
        current = match current {
            Value::Object(map) => map
                .get(seg)
                .ok_or_else(|| miss(format!("missing key {seg:?}")))?,
            Value::Array(items) => {
                let index: usize = seg
                    .parse()
                    .map_err(|_| miss(format!("{seg:?} is not an array index")))?;
                items
                    .get(index)
                    .ok_or_else(|| miss(format!("index {index} out of bounds ({})", items.len())))?
            }
            other => return Err(miss(format!("cannot descend into a {}", kind_name(other)))),
        };
    }
    Ok(current.clone())
}

pub(crate) fn kind_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Navigates `path` through a response. Header names are matched
/// case-insensitively and yield strings; header values that look like JSON
/// are not reinterpreted.
pub fn extract_value(
    body: &Value,
    headers: &BTreeMap<String, String>,
    path: &ValuePath,
) -> Result<Value, ExtractionMiss> {
    match path.root {
        PathRoot::Body => navigate(body, &path.segments, path),
        PathRoot::Headers => {
            let name = &path.segments[0];
            let value = headers
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(name))
                .map(|(_, v)| Value::String(v.clone()))
                .ok_or_else(|| ExtractionMiss {
                    path: path.to_string(),
                    reason: format!("missing header {name:?}"),
                })?;
            navigate(&value, &path.segments[1..], path)
        }
    }
}
