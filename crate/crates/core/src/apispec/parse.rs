use std::collections::BTreeMap;

use serde_json::{Map, Value};

use super::{
    route::placeholders, ApiSpecification, FormatHint, HeaderDef, HttpMethod, Operation,
    ParamLocation, ParameterDef, ResponseDef, SchemaRef, SpecError, SpecFormat, ValueKind,
};

const MAX_REF_DEPTH: usize = 32;

/// Parses a YAML or JSON OpenAPI 3.x / Swagger 2.0 document. Content sniffing
/// decides the syntax; `hint` only restricts the accepted flavour.
pub fn parse_spec(document_text: &str, hint: FormatHint) -> Result<ApiSpecification, SpecError> {
    let root = load_document(document_text)?;
    let root_obj = root
        .as_object()
        .ok_or_else(|| SpecError::UnparseableDocument("document root is not a mapping".into()))?;

    let format = detect_format(root_obj)?;
    match (hint, format) {
        (FormatHint::Auto, _)
        | (FormatHint::OpenApi3, SpecFormat::OpenApi3)
        | (FormatHint::Swagger2, SpecFormat::Swagger2) => {}
        (_, found) => {
            return Err(SpecError::UnsupportedVersion(format!(
                "format hint does not match document ({found})"
            )))
        }
    }

    let info = root_obj.get("info");
    let text_field = |key: &str| {
        info.and_then(|i| i.get(key))
            .map(|v| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .unwrap_or_default()
    };

    let base_path = match format {
        SpecFormat::Swagger2 => root_obj
            .get("basePath")
            .and_then(Value::as_str)
            .map(|p| p.trim_end_matches('/').to_string())
            .unwrap_or_default(),
        SpecFormat::OpenApi3 => String::new(),
    };
    let base_url = server_url(root_obj, format);

    let paths = root_obj
        .get("paths")
        .ok_or_else(|| SpecError::SchemaViolation("missing `paths` object".into()))?
        .as_object()
        .ok_or_else(|| SpecError::SchemaViolation("`paths` is not a mapping".into()))?;

    let ctx = Ctx { root: &root, format };
    let mut operations: BTreeMap<(String, HttpMethod), Operation> = BTreeMap::new();
    for (raw_path, item) in paths {
        if raw_path.starts_with("x-") {
            continue;
        }
        if !raw_path.starts_with('/') {
            return Err(SpecError::SchemaViolation(format!(
                "path {raw_path:?} does not begin with '/'"
            )));
        }
        let item = ctx.deref(item)?;
        let item = item.as_object().ok_or_else(|| {
            SpecError::SchemaViolation(format!("path item {raw_path:?} is not a mapping"))
        })?;
        let template = format!("{base_path}{raw_path}");
        let shared = item.get("parameters");
        for method in HttpMethod::ALL {
            let Some(op) = item.get(&method.as_str().to_ascii_lowercase()) else {
                continue;
            };
            let op = ctx.deref(op)?.as_object().ok_or_else(|| {
                SpecError::SchemaViolation(format!("{method} {raw_path} is not a mapping"))
            })?;
            let operation = ctx.operation(method, &template, shared, op)?;
            operations.insert((template.clone(), method), operation);
        }
    }

    Ok(ApiSpecification {
        title: text_field("title"),
        version: text_field("version"),
        format,
        base_url,
        base_path,
        operations: operations.into_values().collect(),
        raw_text: document_text.to_string(),
    })
}

/// Absolute service root named by the document, if any. Swagger's basePath
/// is already part of every template, so only scheme and host are kept.
fn server_url(root: &Map<String, Value>, format: SpecFormat) -> Option<String> {
    let url = match format {
        SpecFormat::OpenApi3 => root.get("servers")?.get(0)?.get("url")?.as_str()?.to_string(),
        SpecFormat::Swagger2 => {
            let host = root.get("host")?.as_str()?;
            let scheme = root
                .get("schemes")
                .and_then(|s| s.get(0))
                .and_then(Value::as_str)
                .unwrap_or("http");
            format!("{scheme}://{host}")
        }
    };
    let url = url.trim_end_matches('/');
    (url.starts_with("http://") || url.starts_with("https://")).then(|| url.to_string())
}

fn load_document(text: &str) -> Result<Value, SpecError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        if let Ok(v) = serde_json::from_str::<Value>(text) {
            return Ok(v);
        }
    }
    let yaml: serde_yaml::Value =
        serde_yaml::from_str(text).map_err(|e| SpecError::UnparseableDocument(e.to_string()))?;
    Ok(yaml_to_json(yaml))
}

fn yaml_key(key: serde_yaml::Value) -> String {
    match key {
        serde_yaml::Value::String(s) => s,
        serde_yaml::Value::Bool(b) => b.to_string(),
        serde_yaml::Value::Number(n) => n.to_string(),
        serde_yaml::Value::Null => "null".into(),
        serde_yaml::Value::Tagged(t) => yaml_key(t.value),
        other => serde_yaml::to_string(&other)
            .unwrap_or_default()
            .trim()
            .to_string(),
    }
}

/// YAML allows non-string keys (`200:`); JSON objects need strings.
fn yaml_to_json(value: serde_yaml::Value) -> Value {
    match value {
        serde_yaml::Value::Null => Value::Null,
        serde_yaml::Value::Bool(b) => Value::Bool(b),
        serde_yaml::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Value::from(i)
            } else if let Some(u) = n.as_u64() {
                Value::from(u)
            } else {
                n.as_f64()
                    .and_then(serde_json::Number::from_f64)
                    .map(Value::Number)
                    .unwrap_or(Value::Null)
            }
        }
        serde_yaml::Value::String(s) => Value::String(s),
        serde_yaml::Value::Sequence(seq) => Value::Array(seq.into_iter().map(yaml_to_json).collect()),
        serde_yaml::Value::Mapping(map) => Value::Object(
            map.into_iter()
                .map(|(k, v)| (yaml_key(k), yaml_to_json(v)))
                .collect(),
        ),
        serde_yaml::Value::Tagged(t) => yaml_to_json(t.value),
    }
}

fn detect_format(root: &Map<String, Value>) -> Result<SpecFormat, SpecError> {
    if let Some(v) = root.get("swagger") {
        let version = match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        return if version == "2.0" || version == "2" {
            Ok(SpecFormat::Swagger2)
        } else {
            Err(SpecError::UnsupportedVersion(format!("swagger {version}")))
        };
    }
    if let Some(v) = root.get("openapi") {
        let version = match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        return if version.starts_with("3.") || version == "3" {
            Ok(SpecFormat::OpenApi3)
        } else {
            Err(SpecError::UnsupportedVersion(format!("openapi {version}")))
        };
    }
    Err(SpecError::UnsupportedVersion(
        "no `swagger` or `openapi` version field".into(),
    ))
}

struct Ctx<'a> {
    root: &'a Value,
    format: SpecFormat,
}

impl<'a> Ctx<'a> {
    /// Follows local `$ref` chains. Remote references are rejected.
    fn deref(&self, mut value: &'a Value) -> Result<&'a Value, SpecError> {
        for _ in 0..MAX_REF_DEPTH {
            let Some(reference) = value.get("$ref").and_then(Value::as_str) else {
                return Ok(value);
            };
            let pointer = reference.strip_prefix('#').ok_or_else(|| {
                SpecError::SchemaViolation(format!("non-local $ref {reference:?} is not supported"))
            })?;
            value = self.root.pointer(pointer).ok_or_else(|| {
                SpecError::SchemaViolation(format!("unresolved $ref {reference:?}"))
            })?;
        }
        Err(SpecError::SchemaViolation("$ref chain too deep".into()))
    }

    fn value_kind(&self, schema: Option<&'a Value>) -> ValueKind {
        let Some(schema) = schema.and_then(|s| self.deref(s).ok()) else {
            return ValueKind::String;
        };
        match schema.get("type").and_then(Value::as_str) {
            Some("integer") => ValueKind::Integer,
            Some("number") => ValueKind::Number,
            Some("boolean") => ValueKind::Boolean,
            Some("array") => ValueKind::Array,
            Some("object") => ValueKind::Object,
            Some(_) => ValueKind::String,
            None if schema.get("properties").is_some() => ValueKind::Object,
            None if schema.get("items").is_some() => ValueKind::Array,
            None => ValueKind::String,
        }
    }

    /// One parameter per top-level property of an object schema.
    fn field_params(&self, schema: &'a Value, location: ParamLocation) -> Vec<ParameterDef> {
        let Ok(schema) = self.deref(schema) else {
            return Vec::new();
        };
        let required: Vec<&str> = schema
            .get("required")
            .and_then(Value::as_array)
            .map(|r| r.iter().filter_map(Value::as_str).collect())
            .unwrap_or_default();
        schema
            .get("properties")
            .and_then(Value::as_object)
            .map(|props| {
                props
                    .iter()
                    .map(|(name, prop)| ParameterDef {
                        name: name.clone(),
                        location,
                        required: required.contains(&name.as_str()),
                        value_kind: self.value_kind(Some(prop)),
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    fn operation(
        &self,
        method: HttpMethod,
        template: &str,
        shared: Option<&'a Value>,
        op: &'a Map<String, Value>,
    ) -> Result<Operation, SpecError> {
        // Operation-level parameters override path-level ones with the same
        // (name, in) pair.
        let mut raw: Vec<&'a Value> = Vec::new();
        for list in [shared, op.get("parameters")].into_iter().flatten() {
            let Some(list) = list.as_array() else {
                return Err(SpecError::SchemaViolation(format!(
                    "parameters of {method} {template} is not a list"
                )));
            };
            for p in list {
                let p = self.deref(p)?;
                let key = (p.get("name"), p.get("in"));
                raw.retain(|q| (q.get("name"), q.get("in")) != key);
                raw.push(p);
            }
        }

        let mut parameters = Vec::new();
        let mut request_body_schema = None;
        for p in raw {
            let name = p.get("name").and_then(Value::as_str).unwrap_or_default();
            let required = p.get("required").and_then(Value::as_bool).unwrap_or(false);
            let schema_or_self = p.get("schema").unwrap_or(p);
            let location = match p.get("in").and_then(Value::as_str) {
                Some("path") => ParamLocation::Path,
                Some("query") => ParamLocation::Query,
                Some("header") => ParamLocation::Header,
                Some("formData") => ParamLocation::FormField,
                Some("body") => {
                    if let Some(schema) = p.get("schema") {
                        parameters.extend(self.field_params(schema, ParamLocation::BodyField));
                        request_body_schema = Some(SchemaRef(schema.clone()));
                    }
                    continue;
                }
                _ => continue,
            };
            parameters.push(ParameterDef {
                name: name.to_string(),
                location,
                required: required || location == ParamLocation::Path,
                value_kind: self.value_kind(Some(schema_or_self)),
            });
        }

        if let Some(body) = op.get("requestBody") {
            let body = self.deref(body)?;
            if let Some(content) = body.get("content").and_then(Value::as_object) {
                let json = content
                    .iter()
                    .find(|(ct, _)| ct.as_str() == "application/json")
                    .or_else(|| content.iter().find(|(ct, _)| ct.contains("json")));
                let form = content.iter().find(|(ct, _)| {
                    ct.as_str() == "application/x-www-form-urlencoded"
                        || ct.as_str() == "multipart/form-data"
                });
                if let Some(schema) = json.and_then(|(_, media)| media.get("schema")) {
                    parameters.extend(self.field_params(schema, ParamLocation::BodyField));
                    request_body_schema = Some(SchemaRef(schema.clone()));
                } else if let Some(schema) = form.and_then(|(_, media)| media.get("schema")) {
                    parameters.extend(self.field_params(schema, ParamLocation::FormField));
                    request_body_schema = Some(SchemaRef(schema.clone()));
                } else if let Some(schema) = content.values().find_map(|m| m.get("schema")) {
                    request_body_schema = Some(SchemaRef(schema.clone()));
                }
            }
        }

        for name in placeholders(template) {
            let declared = parameters
                .iter()
                .any(|p| p.location == ParamLocation::Path && p.name == name);
            if !declared {
                parameters.push(ParameterDef {
                    name,
                    location: ParamLocation::Path,
                    required: true,
                    value_kind: ValueKind::String,
                });
            }
        }

        let mut documented_responses = BTreeMap::new();
        if let Some(responses) = op.get("responses").and_then(Value::as_object) {
            for (code, response) in responses {
                let is_status = code.len() == 3 && code.bytes().all(|b| b.is_ascii_digit());
                if !(is_status || code == "default") {
                    continue;
                }
                documented_responses.insert(code.clone(), self.response(self.deref(response)?));
            }
        }

        Ok(Operation {
            http_method: method,
            path_template: template.to_string(),
            operation_id: op
                .get("operationId")
                .and_then(Value::as_str)
                .map(str::to_string),
            parameters,
            request_body_schema,
            documented_responses,
        })
    }

    fn response(&self, response: &'a Value) -> ResponseDef {
        let schema = match self.format {
            SpecFormat::Swagger2 => response.get("schema").cloned(),
            SpecFormat::OpenApi3 => response
                .get("content")
                .and_then(Value::as_object)
                .and_then(|content| {
                    content
                        .get("application/json")
                        .or_else(|| content.values().next())
                })
                .and_then(|media| media.get("schema"))
                .cloned(),
        };
        let headers = response
            .get("headers")
            .and_then(Value::as_object)
            .map(|headers| {
                headers
                    .iter()
                    .filter_map(|(name, header)| {
                        let header = self.deref(header).ok()?;
                        let schema = match self.format {
                            SpecFormat::Swagger2 => header,
                            SpecFormat::OpenApi3 => header.get("schema").unwrap_or(header),
                        };
                        let schema = self.deref(schema).ok()?;
                        Some((
                            name.to_ascii_lowercase(),
                            HeaderDef {
                                value_kind: self.value_kind(Some(schema)),
                                format: schema
                                    .get("format")
                                    .and_then(Value::as_str)
                                    .map(str::to_string),
                            },
                        ))
                    })
                    .collect()
            })
            .unwrap_or_default();
        ResponseDef {
            schema: schema.map(SchemaRef),
            headers,
        }
    }
}
