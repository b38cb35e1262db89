use std::collections::BTreeMap;
use std::time::Instant;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use url::form_urlencoded;

use super::{
    classify_failure, extract_sequence, ExecutionContext, Outcome, Phase, RelationOutcome, RequestSummary,
    ScenarioResult, Sequence, StepOutcome, Verdict,
};
use crate::apispec::{fill_template, HttpMethod, Operation, ValueKind};
use crate::plan::{binding_ref, check_relation, extract_value, EmtPlan, Operand, RequestStep};

type Bindings = BTreeMap<String, Value>;

fn substitute(value: &Value, bindings: &Bindings) -> Result<Value, String> {
    if let Some(name) = binding_ref(value) {
        return bindings.get(name).cloned().ok_or_else(|| name.to_string());
    }
    Ok(match value {
        Value::Array(items) => Value::Array(
            items
                .iter()
                .map(|v| substitute(v, bindings))
                .collect::<Result<_, _>>()?,
        ),
        Value::Object(map) => Value::Object(
            map.iter()
                .map(|(k, v)| Ok((k.clone(), substitute(v, bindings)?)))
                .collect::<Result<Map<_, _>, String>>()?,
        ),
        other => other.clone(),
    })
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// A fully resolved request, ready to send.
struct Prepared {
    method: HttpMethod,
    path: String,
    headers: Vec<(String, String)>,
    body: Option<Vec<u8>>,
}

fn prepare(
    step: &RequestStep,
    op: Option<&Operation>,
    bindings: &Bindings,
    ctx: &ExecutionContext<'_>,
) -> Result<Prepared, String> {
    let unbound = |name: String| format!("binding {name:?} has no value");

    // Steps written relative to a Swagger basePath run against the full template.
    let template = match op {
        Some(op) if op.path_template != step.path && op.path_template.ends_with(step.path.as_str()) => {
            op.path_template.as_str()
        }
        _ => step.path.as_str(),
    };
    let mut args = BTreeMap::new();
    for (name, v) in &step.path_args {
        args.insert(name.clone(), scalar_text(&substitute(v, bindings).map_err(unbound)?));
    }
    let mut path = fill_template(template, &args)?;

    let mut query: Vec<(String, String)> = Vec::new();
    for (name, v) in &step.query {
        match substitute(v, bindings).map_err(unbound)? {
            Value::Array(items) => query.extend(items.iter().map(|i| (name.clone(), scalar_text(i)))),
            other => query.push((name.clone(), scalar_text(&other))),
        }
    }

    let mut body = substitute(&step.body, bindings).map_err(unbound)?;
    // Form fields travel in the query string.
    if let (Some(op), Value::Object(fields)) = (op, &mut body) {
        for form in op.form_fields() {
            if let Some(v) = fields.remove(&form.name) {
                query.push((form.name.clone(), scalar_text(&v)));
            }
        }
        if fields.is_empty() && op.form_fields().next().is_some() {
            body = Value::Null;
        }
    }
    if !query.is_empty() {
        let encoded = form_urlencoded::Serializer::new(String::new())
            .extend_pairs(query.iter())
            .finish();
        path = format!("{path}?{encoded}");
    }

    let mut headers = ctx.static_headers.clone();
    for (name, v) in &step.headers {
        headers.push((name.clone(), scalar_text(&substitute(v, bindings).map_err(unbound)?)));
    }
    let body = match body {
        Value::Null => None,
        other => {
            headers.push(("Content-Type".into(), "application/json".into()));
            Some(serde_json::to_vec(&other).map_err(|e| e.to_string())?)
        }
    };
    Ok(Prepared {
        method: step.method,
        path,
        headers,
        body,
    })
}

enum Sent {
    Response {
        status: u16,
        headers: BTreeMap<String, String>,
        body: Value,
    },
    Timeout,
    Transport(String),
}

fn is_timeout(err: &ureq::Error) -> bool {
    match err {
        ureq::Error::Timeout(_) => true,
        ureq::Error::Io(e) => matches!(e.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock),
        _ => false,
    }
}

fn send(ctx: &ExecutionContext<'_>, req: &Prepared) -> Sent {
    let url = format!("{}{}", ctx.base_url, req.path);
    let mut builder = ureq::http::Request::builder().method(req.method.as_str()).uri(&url);
    for (k, v) in &req.headers {
        builder = builder.header(k.as_str(), v.as_str());
    }
    let response = match &req.body {
        Some(bytes) => builder.body(bytes.clone()).map(|r| ctx.agent.run(r)),
        None => builder.body(()).map(|r| ctx.agent.run(r)),
    };
    let mut response = match response {
        Err(e) => return Sent::Transport(format!("invalid request: {e}")),
        Ok(Err(e)) if is_timeout(&e) => return Sent::Timeout,
        Ok(Err(e)) => return Sent::Transport(e.to_string()),
        Ok(Ok(r)) => r,
    };
    let status = response.status().as_u16();
    let headers = response
        .headers()
        .iter()
        .map(|(k, v)| (k.as_str().to_ascii_lowercase(), String::from_utf8_lossy(v.as_bytes()).into_owned()))
        .collect();
    let text = match response.body_mut().read_to_string() {
        Ok(t) => t,
        Err(e) if is_timeout(&e) => return Sent::Timeout,
        Err(_) => String::new(),
    };
    let body = if text.trim().is_empty() {
        Value::Null
    } else {
        serde_json::from_str(&text).unwrap_or(Value::String(text))
    };
    Sent::Response { status, headers, body }
}

/// Date-time validation of the response headers the contract declares with a
/// `date-time` format.
fn header_violation(op: Option<&Operation>, status: u16, headers: &BTreeMap<String, String>) -> Option<String> {
    let declared = op?.response_for(status)?;
    for (name, def) in &declared.headers {
        if def.value_kind != ValueKind::String || def.format.as_deref() != Some("date-time") {
            continue;
        }
        if let Some(value) = headers.get(name) {
            if chrono::DateTime::parse_from_rfc3339(value.trim()).is_err() {
                return Some(format!("header {name} is not a valid date-time: {value:?}"));
            }
        }
    }
    None
}

/// Runs `plan` step by step. A placeholder plan issues no traffic; the first
/// failed exchange aborts the rest (a header format violation alone does
/// not); assertions are checked only when nothing aborted. No more than `budget_remaining` requests are issued.
pub fn execute_scenario(plan: &EmtPlan, ctx: &ExecutionContext<'_>, budget_remaining: u64) -> ScenarioResult {
    let mut result = ScenarioResult {
        hlmt_id: plan.hlmt_id.clone(),
        verdict: Verdict::Passed,
        step_outcomes: Vec::new(),
        relation_verdicts: Vec::new(),
        failure_class: None,
        sequence: Sequence::default(),
        requests_spent: 0,
        annotation: None,
    };
    if plan.placeholder {
        result.verdict = Verdict::FailedPlaceholder;
        result.failure_class = classify_failure(&result, ctx.spec);
        return result;
    }

    let mut bindings = Bindings::new();
    let mut aborted = false;
    let phased = plan
        .given_steps
        .iter()
        .map(|s| (Phase::Given, s))
        .chain(plan.when_steps.iter().map(|s| (Phase::When, s)));
    for (step_index, (phase, step)) in phased.enumerate() {
        let mut record = StepOutcome {
            step_index,
            phase,
            request: RequestSummary {
                method: step.method,
                path: step.path.clone(),
                body_digest: None,
            },
            expect_success: step.expect_success,
            status_code: None,
            latency_ms: 0,
            outcome: Outcome::Skipped,
            detail: None,
        };
        if aborted {
            result.step_outcomes.push(record);
            continue;
        }
        let op = ctx.spec.locate(step.method, &step.path).ok().flatten();
        let prepared = match prepare(step, op, &bindings, ctx) {
            Ok(p) => p,
            Err(detail) => {
                record.outcome = Outcome::ExtractionMiss;
                record.detail = Some(detail);
                aborted = true;
                result.step_outcomes.push(record);
                continue;
            }
        };
        record.request.path = prepared.path.clone();
        record.request.body_digest = prepared.body.as_deref().map(digest);

        if result.requests_spent >= budget_remaining {
            record.outcome = Outcome::TransportError;
            record.detail = Some("budget exhausted".into());
            aborted = true;
            result.step_outcomes.push(record);
            continue;
        }
        let started = Instant::now();
        let sent = send(ctx, &prepared);
        record.latency_ms = started.elapsed().as_millis() as u64;
        result.requests_spent += 1;
        log::debug!("{} {} -> {}", prepared.method, prepared.path, record.latency_ms);

        match sent {
            Sent::Timeout => {
                record.outcome = Outcome::Timeout;
                record.detail = Some(format!("no response within {:?}", ctx.timeout));
            }
            Sent::Transport(detail) => {
                record.outcome = Outcome::TransportError;
                record.detail = Some(detail);
            }
            Sent::Response { status, headers, body } => {
                record.status_code = Some(status);
                record.outcome = Outcome::Ok;
                let success = (200..300).contains(&status);
                if step.expect_success && !success {
                    record.outcome = Outcome::HttpError;
                    record.detail = Some(format!("expected 2xx, got {status}"));
                } else if op.is_some_and(|o| !o.is_documented_status(status)) {
                    record.outcome = Outcome::HttpError;
                    record.detail = Some(format!("status {status} is not documented"));
                } else {
                    for (name, path) in &step.extract {
                        match extract_value(&body, &headers, path) {
                            Ok(v) => {
                                bindings.insert(name.clone(), v);
                            }
                            Err(miss) => {
                                record.outcome = Outcome::ExtractionMiss;
                                record.detail = Some(miss.to_string());
                                break;
                            }
                        }
                    }
                    if record.outcome == Outcome::Ok {
                        if let Some(detail) = header_violation(op, status, &headers) {
                            record.outcome = Outcome::ContractViolation;
                            record.detail = Some(detail);
                        }
                    }
                }
            }
        }
        // A malformed header is a finding, not a broken exchange: the body
        // arrived, so the scenario keeps going.
        aborted = !matches!(record.outcome, Outcome::Ok | Outcome::ContractViolation);
        result.step_outcomes.push(record);
    }

    if !aborted {
        for (assertion_index, a) in plan.assertions.iter().enumerate() {
            let left = bindings.get(&a.left).cloned().unwrap_or(Value::Null);
            let right = match &a.right {
                Operand::Binding(name) => bindings.get(name).cloned().unwrap_or(Value::Null),
                Operand::Literal(v) => v.clone(),
            };
            result.relation_verdicts.push(RelationOutcome {
                assertion_index,
                kind: a.kind,
                verdict: check_relation(a.kind, &left, &right, a.delta),
            });
        }
    }

    let all_ok = result.step_outcomes.iter().all(|s| s.outcome == Outcome::Ok);
    let all_hold = result.relation_verdicts.iter().all(|r| r.verdict.holds());
    if !(all_ok && all_hold) {
        result.verdict = Verdict::Failed;
        result.failure_class = classify_failure(&result, ctx.spec);
    }
    result.sequence = extract_sequence(&result, ctx.spec);
    result
}
