use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use super::lenient::{self, LenientError};
use super::normalize_title;
use crate::diagnostic::Diagnostic;

/// A Given/When/Then metamorphic scenario. Given holds the seed input, When the
/// transformation producing the follow-up input, Then the relation between
/// the two outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hlmt {
    id: String,
    scenario_title: String,
    given_text: String,
    when_text: String,
    then_text: String,
    iteration_index: u32,
    semantic_slug: String,
}

impl Hlmt {
    pub fn new(
        id: impl Into<String>,
        scenario_title: impl Into<String>,
        given: impl Into<String>,
        when: impl Into<String>,
        then: impl Into<String>,
    ) -> Self {
        let scenario_title = scenario_title.into();
        Self {
            id: id.into(),
            semantic_slug: normalize_title(&scenario_title),
            scenario_title,
            given_text: given.into(),
            when_text: when.into(),
            then_text: then.into(),
            iteration_index: 1,
        }
    }

    pub fn with_iteration(mut self, iteration_index: u32) -> Self {
        self.iteration_index = iteration_index.max(1);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn scenario_title(&self) -> &str {
        &self.scenario_title
    }

    pub fn given_text(&self) -> &str {
        &self.given_text
    }

    pub fn when_text(&self) -> &str {
        &self.when_text
    }

    pub fn then_text(&self) -> &str {
        &self.then_text
    }

    pub fn iteration_index(&self) -> u32 {
        self.iteration_index
    }

    pub fn semantic_slug(&self) -> &str {
        &self.semantic_slug
    }

    /// The Given/When/Then texts concatenated, for scanning operation mentions.
    pub fn body_text(&self) -> String {
        format!("{}\n{}\n{}", self.given_text, self.when_text, self.then_text)
    }

    pub fn to_record(&self) -> HlmtRecord {
        HlmtRecord {
            id: self.id.clone(),
            scenario: self.scenario_title.clone(),
            given: self.given_text.clone(),
            when: self.when_text.clone(),
            then: self.then_text.clone(),
        }
    }
}

/// Persistence and prompt format: `{"id","scenario","given","when","then"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HlmtRecord {
    pub id: String,
    pub scenario: String,
    pub given: String,
    pub when: String,
    pub then: String,
}

impl From<HlmtRecord> for Hlmt {
    fn from(r: HlmtRecord) -> Self {
        Hlmt::new(r.id, r.scenario, r.given, r.when, r.then)
    }
}

impl Serialize for Hlmt {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Hlmt {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        HlmtRecord::deserialize(d).map(Hlmt::from)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedHlmts {
    pub hlmts: Vec<Hlmt>,
    /// Array items that were dropped, one diagnostic per item.
    pub dropped: Vec<Diagnostic>,
}

fn field(obj: &serde_json::Map<String, Value>, names: &[&str]) -> Option<String> {
    obj.iter()
        .find(|(k, _)| names.iter().any(|n| k.eq_ignore_ascii_case(n)))
        .and_then(|(_, v)| match v {
            Value::String(s) => Some(s.trim().to_string()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        })
        .filter(|s| !s.is_empty())
}

/// Extracts scenarios from arbitrary model output. Items lacking a required
/// field are dropped with a diagnostic; only a missing array is an error.
pub fn parse_hlmt_list(raw_output: &str) -> Result<ParsedHlmts, LenientError> {
    let value = lenient::recover_array(raw_output)?;
    let Value::Array(items) = value else {
        return Err(LenientError::NoArrayFound("recovered value is not an array".into()));
    };
    let mut parsed = ParsedHlmts::default();
    for (i, item) in items.iter().enumerate() {
        let Some(obj) = item.as_object() else {
            parsed
                .dropped
                .push(Diagnostic::new(format!("item[{i}]"), "not an object"));
            continue;
        };
        let fields = [
            ("id", field(obj, &["id"])),
            ("scenario", field(obj, &["scenario", "scenario_title", "title"])),
            ("given", field(obj, &["given"])),
            ("when", field(obj, &["when"])),
            ("then", field(obj, &["then"])),
        ];
        let missing: Vec<&str> = fields
            .iter()
            .filter(|(_, v)| v.is_none())
            .map(|(n, _)| *n)
            .collect();
        if !missing.is_empty() {
            parsed.dropped.push(Diagnostic::new(
                format!("item[{i}]"),
                format!("missing field(s): {}", missing.join(", ")),
            ));
            continue;
        }
        let [id, scenario, given, when, then] = fields.map(|(_, v)| v.unwrap_or_default());
        parsed.hlmts.push(Hlmt::new(id, scenario, given, when, then));
    }
    Ok(parsed)
}

/// Checks text fields and id uniqueness against the scenarios that precede
/// `hlmt` in the same iteration.
pub fn validate_hlmt(hlmt: &Hlmt, earlier_in_iteration: &[Hlmt]) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (name, text) in [
        ("id", hlmt.id()),
        ("scenario", hlmt.scenario_title()),
        ("given", hlmt.given_text()),
        ("when", hlmt.when_text()),
        ("then", hlmt.then_text()),
    ] {
        if text.trim().is_empty() {
            out.push(Diagnostic::new(name, "must not be empty"));
        }
    }
    if earlier_in_iteration
        .iter()
        .any(|h| h.id() == hlmt.id() && h.iteration_index() == hlmt.iteration_index())
    {
        out.push(Diagnostic::new(
            "id",
            format!("duplicate id {:?} within iteration {}", hlmt.id(), hlmt.iteration_index()),
        ));
    }
    out
}
