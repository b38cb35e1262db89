use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ScenarioResult;
use crate::apispec::{strip_query, ApiSpecification, HttpMethod, OperationKey};

const UNRESOLVED: &str = " (unresolved)";

/// One issued request, normalized to its documented template when possible.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SequenceEntry {
    pub method: HttpMethod,
    pub path: String,
    pub resolved: bool,
}

impl SequenceEntry {
    pub fn resolved(method: HttpMethod, template: impl Into<String>) -> Self {
        Self {
            method,
            path: template.into(),
            resolved: true,
        }
    }

    pub fn operation_key(&self) -> Option<OperationKey> {
        self.resolved.then(|| OperationKey::new(self.method, &self.path))
    }
}

impl fmt::Display for SequenceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.method, self.path)?;
        if !self.resolved {
            f.write_str(UNRESOLVED)?;
        }
        Ok(())
    }
}

impl FromStr for SequenceEntry {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (body, resolved) = match s.strip_suffix(UNRESOLVED) {
            Some(b) => (b, false),
            None => (s, true),
        };
        let key: OperationKey = body.parse()?;
        Ok(Self {
            method: key.method,
            path: key.path,
            resolved,
        })
    }
}

impl Serialize for SequenceEntry {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SequenceEntry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered operations actually issued by one scenario.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sequence(pub Vec<SequenceEntry>);

impl Sequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[SequenceEntry] {
        &self.0
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" -> ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl FromIterator<SequenceEntry> for Sequence {
    fn from_iter<I: IntoIterator<Item = SequenceEntry>>(iter: I) -> Self {
        Sequence(iter.into_iter().collect())
    }
}

/// Maps every attempted request of `result` back to its template. Requests
/// the document cannot place keep their concrete path and are flagged.
pub fn extract_sequence(result: &ScenarioResult, spec: &ApiSpecification) -> Sequence {
    result
        .step_outcomes
        .iter()
        .filter(|s| s.attempted())
        .map(|s| {
            let method = s.request.method;
            match spec.locate(method, &s.request.path) {
                Ok(Some(op)) => SequenceEntry::resolved(method, &op.path_template),
                _ => SequenceEntry {
                    method,
                    path: strip_query(&s.request.path).to_string(),
                    resolved: false,
                },
            }
        })
        .collect()
}
