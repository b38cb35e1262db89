use std::collections::BTreeSet;

use serde_json::Value;

use super::model::{EmtPlan, Operand, RelationKind, RequestStep};
use crate::apispec::{placeholders, ApiSpecification};
use crate::diagnostic::Diagnostic;

fn step_known(spec: &ApiSpecification, step: &RequestStep) -> bool {
    !matches!(spec.locate(step.method, &step.path), Ok(None))
}

/// Structural validation of a plan against the API contract. An empty result
/// means the plan is executable.
pub fn validate_plan(plan: &EmtPlan, spec: &ApiSpecification) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (name, label) in [
        ("labels.given", &plan.labels.given),
        ("labels.when", &plan.labels.when),
        ("labels.then", &plan.labels.then),
    ] {
        if label.trim().is_empty() {
            out.push(Diagnostic::new(name, "label must not be empty"));
        }
    }

    if plan.placeholder {
        if plan.step_count() > 0 || !plan.assertions.is_empty() {
            out.push(Diagnostic::new(
                "plan",
                "placeholder plans must not contain steps or assertions",
            ));
        }
        return out;
    }

    if plan.given_steps.is_empty() {
        out.push(Diagnostic::new("given_steps", "at least one given step is required"));
    }
    if plan.when_steps.is_empty() {
        out.push(Diagnostic::new("when_steps", "at least one when step is required"));
    }
    if plan.assertions.is_empty() {
        out.push(Diagnostic::new("assertions", "at least one assertion is required"));
    }

    let all_defined = plan.binding_names();
    let mut defined: BTreeSet<&str> = BTreeSet::new();
    let located = plan
        .given_steps
        .iter()
        .enumerate()
        .map(|(i, s)| (format!("given_steps[{i}]"), s))
        .chain(
            plan.when_steps
                .iter()
                .enumerate()
                .map(|(i, s)| (format!("when_steps[{i}]"), s)),
        );
    for (location, step) in located {
        if !step.path.starts_with('/') {
            out.push(Diagnostic::new(&location, format!("path {:?} must begin with '/'", step.path)));
        } else if !step_known(spec, step) {
            out.push(Diagnostic::new(
                &location,
                format!("unknown operation {} {}", step.method, step.path),
            ));
        }
        for name in placeholders(&step.path) {
            if !step.path_args.contains_key(&name) {
                out.push(Diagnostic::new(&location, format!("missing path argument {name:?}")));
            }
        }
        for (name, value) in &step.path_args {
            if matches!(value, Value::Array(_) | Value::Object(_) | Value::Null) {
                out.push(Diagnostic::new(
                    &location,
                    format!("path argument {name:?} must be a scalar or binding reference"),
                ));
            }
        }
        for name in step.referenced_bindings() {
            if defined.contains(name) {
                continue;
            }
            let message = if all_defined.contains(name) {
                format!("forward reference to binding {name:?}")
            } else {
                format!("undefined binding {name:?}")
            };
            out.push(Diagnostic::new(&location, message));
        }
        defined.extend(step.extract.keys().map(String::as_str));
    }

    for (i, assertion) in plan.assertions.iter().enumerate() {
        let location = format!("assertions[{i}]");
        let mut refs = vec![assertion.left.as_str()];
        if let Operand::Binding(name) = &assertion.right {
            refs.push(name);
        }
        for name in refs {
            if !defined.contains(name) {
                out.push(Diagnostic::new(&location, format!("undefined binding {name:?}")));
            }
        }
        if assertion.kind == RelationKind::CountDelta {
            if assertion.delta.is_none() {
                out.push(Diagnostic::new(&location, "count-delta requires a delta"));
            }
            if let Operand::Literal(v) = &assertion.right {
                if !v.is_number() {
                    out.push(Diagnostic::new(&location, "count-delta requires numeric operands"));
                }
            }
        } else if assertion.delta.is_some() {
            out.push(Diagnostic::new(&location, "delta is only valid for count-delta"));
        }
    }
    out
}
