use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

use super::value_path::ValuePath;
use crate::apispec::HttpMethod;
use crate::diagnostic::Diagnostic;
use crate::mt::{lenient, Hlmt};

/// Returns the binding name when `value` is a whole-value reference `"${name}"`.
pub fn binding_ref(value: &Value) -> Option<&str> {
    let s = value.as_str()?.trim();
    let name = s.strip_prefix("${")?.strip_suffix('}')?;
    let valid = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    valid.then_some(name)
}

/// Collects every binding reference in a JSON template.
pub(crate) fn collect_refs<'a>(value: &'a Value, out: &mut Vec<&'a str>) {
    if let Some(name) = binding_ref(value) {
        out.push(name);
        return;
    }
    match value {
        Value::Array(items) => items.iter().for_each(|v| collect_refs(v, out)),
        Value::Object(map) => map.values().for_each(|v| collect_refs(v, out)),
        _ => {}
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestStep {
    pub method: HttpMethod,
    /// Documented path template, e.g. `/pet/{petId}`.
    pub path: String,
    #[serde(default)]
    pub path_args: BTreeMap<String, Value>,
    #[serde(default)]
    pub query: BTreeMap<String, Value>,
    #[serde(default)]
    pub headers: BTreeMap<String, Value>,
    #[serde(default)]
    pub body: Value,
    /// A non-2xx response aborts the scenario when set.
    #[serde(default = "default_true")]
    pub expect_success: bool,
    #[serde(default)]
    pub extract: BTreeMap<String, ValuePath>,
}

impl RequestStep {
    pub fn new(method: HttpMethod, path: impl Into<String>) -> Self {
        Self {
            method,
            path: path.into(),
            path_args: BTreeMap::new(),
            query: BTreeMap::new(),
            headers: BTreeMap::new(),
            body: Value::Null,
            expect_success: true,
            extract: BTreeMap::new(),
        }
    }

    /// Binding names this step reads, in a stable order.
    pub fn referenced_bindings(&self) -> Vec<&str> {
        let mut refs = Vec::new();
        for map in [&self.path_args, &self.query, &self.headers] {
            map.values().for_each(|v| collect_refs(v, &mut refs));
        }
        collect_refs(&self.body, &mut refs);
        refs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationKind {
    Equality,
    Difference,
    Inclusion,
    Exclusion,
    #[serde(alias = "count_delta")]
    CountDelta,
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelationKind::Equality => "equality",
            RelationKind::Difference => "difference",
            RelationKind::Inclusion => "inclusion",
            RelationKind::Exclusion => "exclusion",
            RelationKind::CountDelta => "count-delta",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Binding(String),
    Literal(Value),
}

impl Operand {
    fn to_wire(&self) -> Value {
        match self {
            Operand::Binding(name) => Value::String(format!("${{{name}}}")),
            Operand::Literal(v) => v.clone(),
        }
    }

    fn from_wire(v: Value) -> Self {
        match binding_ref(&v) {
            Some(name) => Operand::Binding(name.to_string()),
            None => Operand::Literal(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationAssertion {
    pub kind: RelationKind,
    /// Binding name of the left operand.
    pub left: String,
    pub right: Operand,
    pub delta: Option<i64>,
}

#[derive(Serialize, Deserialize)]
struct AssertionWire {
    kind: RelationKind,
    left: Value,
    right: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<i64>,
}

impl Serialize for RelationAssertion {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        AssertionWire {
            kind: self.kind,
            left: Operand::Binding(self.left.clone()).to_wire(),
            right: self.right.to_wire(),
            delta: self.delta,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RelationAssertion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = AssertionWire::deserialize(d)?;
        // The left side must be a binding; a bare name is accepted too.
        let left = match &wire.left {
            v if binding_ref(v).is_some() => binding_ref(v).unwrap_or_default().to_string(),
            Value::String(s) if !s.trim().is_empty() => s.trim().to_string(),
            other => {
                return Err(serde::de::Error::custom(format!(
                    "assertion left operand must be a binding reference, got {other}"
                )))
            }
        };
        Ok(Self {
            kind: wire.kind,
            left,
            right: Operand::from_wire(wire.right),
            delta: wire.delta,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlanLabels {
    pub given: String,
    pub when: String,
    pub then: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmtPlan {
    #[serde(default)]
    pub hlmt_id: String,
    pub labels: PlanLabels,
    #[serde(default)]
    pub given_steps: Vec<RequestStep>,
    #[serde(default)]
    pub when_steps: Vec<RequestStep>,
    #[serde(default)]
    pub assertions: Vec<RelationAssertion>,
    #[serde(default)]
    pub placeholder: bool,
}

impl EmtPlan {
    pub fn given_label(&self) -> &str {
        &self.labels.given
    }

    pub fn when_label(&self) -> &str {
        &self.labels.when
    }

    pub fn then_label(&self) -> &str {
        &self.labels.then
    }

    /// Given steps followed by When steps, in execution order.
    pub fn steps(&self) -> impl Iterator<Item = &RequestStep> {
        self.given_steps.iter().chain(&self.when_steps)
    }

    pub fn step_count(&self) -> usize {
        self.given_steps.len() + self.when_steps.len()
    }

    /// All named extractions; a later definition of the same name wins.
    pub fn bindings(&self) -> BTreeMap<String, ValuePath> {
        self.steps()
            .flat_map(|s| s.extract.iter())
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    pub fn binding_names(&self) -> BTreeSet<&str> {
        self.steps()
            .flat_map(|s| s.extract.keys())
            .map(String::as_str)
            .collect()
    }

    pub fn labels_match(&self, hlmt: &Hlmt) -> bool {
        self.labels.given == hlmt.given_text()
            && self.labels.when == hlmt.when_text()
            && self.labels.then == hlmt.then_text()
    }
}

/// A no-op stand-in for a scenario whose plan could not be produced. It keeps
/// the scenario's labels, issues no requests and is never counted as an
/// executable test.
pub fn make_placeholder(hlmt: &Hlmt) -> EmtPlan {
    EmtPlan {
        hlmt_id: hlmt.id().to_string(),
        labels: PlanLabels {
            given: hlmt.given_text().to_string(),
            when: hlmt.when_text().to_string(),
            then: hlmt.then_text().to_string(),
        },
        given_steps: Vec::new(),
        when_steps: Vec::new(),
        assertions: Vec::new(),
        placeholder: true,
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanParseError {
    #[error("no plan document found: {0}")]
    NotFound(String),
    #[error("malformed plan document: {0}")]
    Malformed(String),
    #[error("label mismatch: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    LabelMismatch(Vec<Diagnostic>),
}

impl PlanParseError {
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            PlanParseError::NotFound(m) | PlanParseError::Malformed(m) => {
                vec![Diagnostic::new("plan", m.clone())]
            }
            PlanParseError::LabelMismatch(d) => d.clone(),
        }
    }
}

/// Recovers a plan document from model output and checks that its labels
/// reproduce the scenario texts verbatim.
pub fn parse_plan_output(raw: &str, hlmt: &Hlmt) -> Result<EmtPlan, PlanParseError> {
    let value = lenient::recover_object(raw).map_err(|e| PlanParseError::NotFound(e.to_string()))?;
    let mut plan: EmtPlan =
        serde_json::from_value(value).map_err(|e| PlanParseError::Malformed(e.to_string()))?;
    let mut mismatches = Vec::new();
    for (name, got, want) in [
        ("labels.given", &plan.labels.given, hlmt.given_text()),
        ("labels.when", &plan.labels.when, hlmt.when_text()),
        ("labels.then", &plan.labels.then, hlmt.then_text()),
    ] {
        if got != want {
            mismatches.push(Diagnostic::new(
                name,
                format!("label mismatch: expected {want:?}, got {got:?}"),
            ));
        }
    }
    if !mismatches.is_empty() {
        return Err(PlanParseError::LabelMismatch(mismatches));
    }
    plan.hlmt_id = hlmt.id().to_string();
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn hlmt() -> Hlmt {
        Hlmt::new("MR1", "t", "g", "w", "th")
    }

    #[test]
    fn binding_reference_syntax() {
        assert_eq!(binding_ref(&json!("${seed_id}")), Some("seed_id"));
        assert_eq!(binding_ref(&json!("id-${x}")), None);
        assert_eq!(binding_ref(&json!("${}")), None);
        assert_eq!(binding_ref(&json!(3)), None);
    }

    #[test]
    fn wire_defaults_and_round_trip() {
        let raw = r#"{"labels": {"given": "g", "when": "w", "then": "th"},
            "given_steps": [{"method": "post", "path": "/pet", "body": {"name": "x"}, "extract": {"id": "id"}}],
            "when_steps": [{"method": "GET", "path": "/pet/{petId}", "path_args": {"petId": "${id}"}, "expect_success": false}],
            "assertions": [{"kind": "equality", "left": "id", "right": 3},
                           {"kind": "count_delta", "left": "${id}", "right": "${id}", "delta": 0}]}"#;
        let plan = parse_plan_output(raw, &hlmt()).unwrap();
        assert_eq!(plan.hlmt_id, "MR1");
        assert!(plan.given_steps[0].expect_success);
        assert!(!plan.when_steps[0].expect_success);
        assert_eq!(plan.assertions[0].right, Operand::Literal(json!(3)));
        assert_eq!(plan.assertions[1].right, Operand::Binding("id".into()));
        assert_eq!(plan.assertions[1].kind, RelationKind::CountDelta);

        let text = serde_json::to_string(&plan).unwrap();
        let back: EmtPlan = serde_json::from_str(&text).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn mismatched_labels_are_rejected() {
        let raw = r#"{"labels": {"given": "g", "when": "other", "then": "th"}}"#;
        let err = parse_plan_output(raw, &hlmt()).unwrap_err();
        assert!(err.to_string().contains("label mismatch"));
        assert_eq!(err.diagnostics()[0].location, "labels.when");
    }

    #[test]
    fn placeholder_shape() {
        let p = make_placeholder(&hlmt());
        assert!(p.placeholder);
        assert_eq!(p.step_count(), 0);
        assert!(p.assertions.is_empty());
        assert!(p.labels_match(&hlmt()));
    }
}
