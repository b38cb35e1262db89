//! Normalized view of an OpenAPI 3.x / Swagger 2.0 contract.
//!
//! Both document flavours lower into the same [`ApiSpecification`]: a sorted,
//! duplicate-free list of `(method, path template)` operations with their
//! parameters and documented responses.

mod parse;
mod route;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use parse::parse_spec;
pub use route::{fill_template, placeholders, strip_query};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("document is neither YAML nor JSON: {0}")]
    UnparseableDocument(String),
    #[error("unsupported document version: {0}")]
    UnsupportedVersion(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("ambiguous match for {method} {path}: candidates {candidates:?}")]
    AmbiguousMatch {
        method: String,
        path: String,
        candidates: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecFormat {
    #[serde(rename = "openapi3")]
    OpenApi3,
    #[serde(rename = "swagger2")]
    Swagger2,
}

impl fmt::Display for SpecFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpecFormat::OpenApi3 => "openapi3",
            SpecFormat::Swagger2 => "swagger2",
        })
    }
}

/// Which flavour `parse_spec` should accept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FormatHint {
    OpenApi3,
    Swagger2,
    #[default]
    Auto,
}

/// HTTP methods that may appear under a path item. Variants are declared in
/// lexicographic order of their upper-case names so the derived `Ord` matches
/// string order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HttpMethod {
    Delete,
    Get,
    Head,
    Options,
    Patch,
    Post,
    Put,
}

impl HttpMethod {
    pub const ALL: [HttpMethod; 7] = [
        HttpMethod::Delete,
        HttpMethod::Get,
        HttpMethod::Head,
        HttpMethod::Options,
        HttpMethod::Patch,
        HttpMethod::Post,
        HttpMethod::Put,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HttpMethod::Delete => "DELETE",
            HttpMethod::Get => "GET",
            HttpMethod::Head => "HEAD",
            HttpMethod::Options => "OPTIONS",
            HttpMethod::Patch => "PATCH",
            HttpMethod::Post => "POST",
            HttpMethod::Put => "PUT",
        }
    }
}

impl fmt::Display for HttpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HttpMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HttpMethod::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown HTTP method {s:?}"))
    }
}

impl<'de> Deserialize<'de> for HttpMethod {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamLocation {
    Path,
    Query,
    Header,
    BodyField,
    FormField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    String,
    Number,
    Integer,
    Boolean,
    Array,
    Object,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDef {
    pub name: String,
    pub location: ParamLocation,
    pub required: bool,
    pub value_kind: ValueKind,
}

/// A schema fragment as it appears in the document; local `$ref`s are kept
/// unexpanded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SchemaRef(pub Value);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeaderDef {
    pub value_kind: ValueKind,
    pub format: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResponseDef {
    pub schema: Option<SchemaRef>,
    /// Declared response headers keyed by their lower-cased name.
    pub headers: BTreeMap<String, HeaderDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Operation {
    pub http_method: HttpMethod,
    pub path_template: String,
    pub operation_id: Option<String>,
    pub parameters: Vec<ParameterDef>,
    pub request_body_schema: Option<SchemaRef>,
    /// Keyed by three-digit status code or `"default"`.
    pub documented_responses: BTreeMap<String, ResponseDef>,
}

impl Operation {
    pub fn key(&self) -> OperationKey {
        OperationKey {
            method: self.http_method,
            path: self.path_template.clone(),
        }
    }

    pub fn is_documented_status(&self, status: u16) -> bool {
        self.documented_responses.contains_key(&status.to_string())
            || self.documented_responses.contains_key("default")
    }

    /// The response entry that applies to `status`, falling back to `default`.
    pub fn response_for(&self, status: u16) -> Option<&ResponseDef> {
        self.documented_responses
            .get(&status.to_string())
            .or_else(|| self.documented_responses.get("default"))
    }

    pub fn form_fields(&self) -> impl Iterator<Item = &ParameterDef> {
        self.parameters
            .iter()
            .filter(|p| p.location == ParamLocation::FormField)
    }
}

/// `(method, path template)`: the unit of operational coverage.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OperationKey {
    pub method: HttpMethod,
    pub path: String,
}

impl OperationKey {
    pub fn new(method: HttpMethod, path: impl Into<String>) -> Self {
        Self {
            method,
            path: path.into(),
        }
    }
}

impl fmt::Display for OperationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.method, self.path)
    }
}

impl FromStr for OperationKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (method, path) = s
            .trim()
            .split_once(char::is_whitespace)
            .ok_or_else(|| format!("expected \"METHOD /path\", got {s:?}"))?;
        Ok(Self::new(method.parse()?, path.trim()))
    }
}

impl Serialize for OperationKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OperationKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSpecification {
    pub title: String,
    pub version: String,
    pub format: SpecFormat,
    /// Supplied by the caller; any `servers`/`host` entry in the document is
    /// ignored.
    pub base_url: Option<String>,
    /// Swagger 2.0 `basePath`, already folded into every path template.
    #[serde(default)]
    pub base_path: String,
    /// Sorted by path, then method.
    operations: Vec<Operation>,
    #[serde(skip)]
    pub raw_text: String,
}

impl ApiSpecification {
    pub fn with_base_url(mut self, base_url: impl Into<String>) -> Self {
        self.base_url = Some(base_url.into());
        self
    }

    /// Operations ordered by path template, then method name.
    pub fn list_operations(&self) -> &[Operation] {
        &self.operations
    }

    pub fn operation_count(&self) -> usize {
        self.operations.len()
    }

    pub fn operation_keys(&self) -> impl Iterator<Item = OperationKey> + '_ {
        self.operations.iter().map(Operation::key)
    }

    /// Exact lookup by documented template.
    pub fn operation(&self, method: HttpMethod, path_template: &str) -> Option<&Operation> {
        self.operations
            .iter()
            .find(|op| op.http_method == method && op.path_template == path_template)
    }

    /// Maps a concrete request path (base URL already stripped) back to the
    /// documented operation. Literal template segments win over placeholders;
    /// any remaining tie is reported as [`SpecError::AmbiguousMatch`].
    pub fn resolve_operation(
        &self,
        method: &str,
        concrete_path: &str,
    ) -> Result<Option<&Operation>, SpecError> {
        let Ok(method) = method.parse::<HttpMethod>() else {
            return Ok(None);
        };
        route::resolve(&self.operations, method, concrete_path)
    }

    /// Lookup used for plan steps and prose mentions: exact template first,
    /// then route resolution, then both again with the `basePath` prefix for
    /// paths written relative to it.
    pub fn locate(&self, method: HttpMethod, path: &str) -> Result<Option<&Operation>, SpecError> {
        let path = strip_query(path);
        if let Some(op) = self.operation(method, path) {
            return Ok(Some(op));
        }
        let direct = route::resolve(&self.operations, method, path);
        if !matches!(direct, Ok(None)) || self.base_path.is_empty() || path.starts_with(&self.base_path) {
            return direct;
        }
        let prefixed = format!("{}{}", self.base_path, path);
        if let Some(op) = self.operation(method, &prefixed) {
            return Ok(Some(op));
        }
        route::resolve(&self.operations, method, &prefixed)
    }
}
