use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::model::RelationKind;
use super::value_path::kind_name;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum RelationVerdict {
    Holds,
    Violated { reason: String },
    /// Operands of the wrong type for the relation; counts as violated.
    TypeMismatch { reason: String },
}

impl RelationVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, RelationVerdict::Holds)
    }
}

fn numbers_equal(a: &serde_json::Number, b: &serde_json::Number) -> bool {
    if let (Some(x), Some(y)) = (a.as_i64(), b.as_i64()) {
        return x == y;
    }
    if let (Some(x), Some(y)) = (a.as_u64(), b.as_u64()) {
        return x == y;
    }
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x == y,
        _ => false,
    }
}

/// Deep structural equality where `1` and `1.0` compare equal.
pub fn json_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => numbers_equal(x, y),
        (Value::Array(x), Value::Array(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| json_equal(p, q))
        }
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len()
                && x.iter()
                    .all(|(k, v)| y.get(k).is_some_and(|w| json_equal(v, w)))
        }
        _ => a == b,
    }
}

/// Element membership for arrays, substring for texts, key/value subset for
/// objects. Any other pairing is "not included".
fn includes(container: &Value, item: &Value) -> bool {
    match (container, item) {
        (Value::Array(items), _) => items.iter().any(|x| json_equal(x, item)),
        (Value::String(haystack), Value::String(needle)) => haystack.contains(needle.as_str()),
        (Value::Object(outer), Value::Object(inner)) => inner
            .iter()
            .all(|(k, v)| outer.get(k).is_some_and(|w| json_equal(w, v))),
        _ => false,
    }
}

fn verdict(ok: bool, reason: impl FnOnce() -> String) -> RelationVerdict {
    if ok {
        RelationVerdict::Holds
    } else {
        RelationVerdict::Violated { reason: reason() }
    }
}

/// Evaluates one relation between resolved operands. Total: never panics and
/// never errors; operand type problems come back as `TypeMismatch`.
pub fn check_relation(kind: RelationKind, left: &Value, right: &Value, delta: Option<i64>) -> RelationVerdict {
    match kind {
        RelationKind::Equality => verdict(json_equal(left, right), || {
            format!("expected {left} == {right}")
        }),
        RelationKind::Difference => verdict(!json_equal(left, right), || {
            format!("expected {left} != {right}")
        }),
        RelationKind::Inclusion => verdict(includes(left, right), || {
            format!("{right} is not included in {left}")
        }),
        RelationKind::Exclusion => verdict(!includes(left, right), || {
            format!("{right} is included in {left}")
        }),
        RelationKind::CountDelta => {
            let (Value::Number(l), Value::Number(r)) = (left, right) else {
                return RelationVerdict::TypeMismatch {
                    reason: format!(
                        "count-delta needs numbers, got {} and {}",
                        kind_name(left),
                        kind_name(right)
                    ),
                };
            };
            let delta = delta.unwrap_or(0);
            let holds = match (l.as_i64(), r.as_i64()) {
                (Some(a), Some(b)) => a.checked_sub(b) == Some(delta),
                _ => match (l.as_f64(), r.as_f64()) {
                    (Some(a), Some(b)) => ((a - b) - delta as f64).abs() < 1e-9,
                    _ => false,
                },
            };
            verdict(holds, || format!("expected {left} - {right} == {delta}"))
        }
    }
}
