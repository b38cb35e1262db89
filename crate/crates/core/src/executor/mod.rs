//! Runs plans over HTTP against the system under test and classifies what
//! went wrong.

mod run;
mod sequence;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::apispec::{ApiSpecification, HttpMethod};
use crate::plan::{RelationKind, RelationVerdict};

pub use run::execute_scenario;
pub use sequence::{extract_sequence, Sequence, SequenceEntry};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Given,
    When,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Ok,
    HttpError,
    Timeout,
    TransportError,
    ExtractionMiss,
    /// A declared date-time response header did not parse.
    ContractViolation,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestSummary {
    pub method: HttpMethod,
    /// Concrete path including any query string, without the base URL.
    pub path: String,
    pub body_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step_index: usize,
    pub phase: Phase,
    pub request: RequestSummary,
    pub expect_success: bool,
    pub status_code: Option<u16>,
    pub latency_ms: u64,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl StepOutcome {
    /// A request went out and either got a status or ran out of time.
    pub fn attempted(&self) -> bool {
        self.status_code.is_some() || self.outcome == Outcome::Timeout
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Passed,
    Failed,
    FailedPlaceholder,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Passed => "passed",
            Verdict::Failed => "failed",
            Verdict::FailedPlaceholder => "failed-placeholder",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    Timeout,
    TransportError,
    ServerCrash,
    RequestContract,
    UndocumentedStatus,
    ResponseContract,
    RelationViolation,
    Placeholder,
}

impl FailureKind {
    pub const ALL: [FailureKind; 8] = [
        FailureKind::Timeout,
        FailureKind::TransportError,
        FailureKind::ServerCrash,
        FailureKind::RequestContract,
        FailureKind::UndocumentedStatus,
        FailureKind::ResponseContract,
        FailureKind::RelationViolation,
        FailureKind::Placeholder,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureKind::Timeout => "timeout",
            FailureKind::TransportError => "transport-error",
            FailureKind::ServerCrash => "server-crash",
            FailureKind::RequestContract => "request-contract",
            FailureKind::UndocumentedStatus => "undocumented-status",
            FailureKind::ResponseContract => "response-contract",
            FailureKind::RelationViolation => "relation-violation",
            FailureKind::Placeholder => "placeholder",
        }
    }
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureClass {
    pub class: FailureKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationOutcome {
    pub assertion_index: usize,
    pub kind: RelationKind,
    #[serde(flatten)]
    pub verdict: RelationVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub hlmt_id: String,
    pub verdict: Verdict,
    pub step_outcomes: Vec<StepOutcome>,
    pub relation_verdicts: Vec<RelationOutcome>,
    pub failure_class: Option<FailureClass>,
    pub sequence: Sequence,
    pub requests_spent: u64,
    /// Manual true/false-positive label; never set by the engine.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
}

impl ScenarioResult {
    pub fn is_placeholder(&self) -> bool {
        self.verdict == Verdict::FailedPlaceholder
    }

    pub fn failure_kind(&self) -> Option<FailureKind> {
        self.failure_class.as_ref().map(|f| f.class)
    }
}

/// Everything the executor needs besides the plan itself.
pub struct ExecutionContext<'a> {
    pub spec: &'a ApiSpecification,
    pub base_url: String,
    pub timeout: Duration,
    /// Sent with every request before the step's own headers.
    pub static_headers: Vec<(String, String)>,
    agent: ureq::Agent,
}

impl<'a> ExecutionContext<'a> {
    pub fn new(spec: &'a ApiSpecification, base_url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .proxy(None)
            .max_redirects(0)
            .build()
            .new_agent();
        Self {
            spec,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            timeout,
            static_headers: Vec::new(),
            agent,
        }
    }

    pub fn with_headers(mut self, headers: Vec<(String, String)>) -> Self {
        self.static_headers = headers;
        self
    }
}

fn is_5xx(status: Option<u16>) -> bool {
    matches!(status, Some(500..=599))
}

fn is_4xx(status: Option<u16>) -> bool {
    matches!(status, Some(400..=499))
}

fn step_label(s: &StepOutcome) -> String {
    format!("{} {}", s.request.method, s.request.path)
}

fn documented(step: &StepOutcome, spec: &ApiSpecification) -> bool {
    let Some(status) = step.status_code else {
        return true;
    };
    match spec.locate(step.request.method, &step.request.path) {
        Ok(Some(op)) => op.is_documented_status(status),
        _ => true,
    }
}

/// Root-cause class of a failed scenario; the first matching class in
/// precedence order wins. Returns `None` for a scenario that passed.
pub fn classify_failure(result: &ScenarioResult, spec: &ApiSpecification) -> Option<FailureClass> {
    if result.verdict == Verdict::FailedPlaceholder {
        return Some(FailureClass {
            class: FailureKind::Placeholder,
            detail: "no executable plan; scenario discarded".into(),
        });
    }
    let steps = &result.step_outcomes;
    let found = |pred: &dyn Fn(&StepOutcome) -> bool| steps.iter().find(|s| pred(s));

    if let Some(s) = found(&|s| s.outcome == Outcome::Timeout) {
        return Some(FailureClass {
            class: FailureKind::Timeout,
            detail: format!("{} timed out", step_label(s)),
        });
    }
    if let Some(s) = found(&|s| s.outcome == Outcome::TransportError) {
        return Some(FailureClass {
            class: FailureKind::TransportError,
            detail: format!(
                "{}: {}",
                step_label(s),
                s.detail.as_deref().unwrap_or("transport failure")
            ),
        });
    }
    if let Some(s) = found(&|s| is_5xx(s.status_code)) {
        return Some(FailureClass {
            class: FailureKind::ServerCrash,
            detail: format!("{} returned {}", step_label(s), s.status_code.unwrap_or_default()),
        });
    }
    if let Some(s) = found(&|s| s.expect_success && is_4xx(s.status_code)) {
        return Some(FailureClass {
            class: FailureKind::RequestContract,
            detail: format!("{} returned {}", step_label(s), s.status_code.unwrap_or_default()),
        });
    }
    if let Some(s) = found(&|s| !documented(s, spec)) {
        return Some(FailureClass {
            class: FailureKind::UndocumentedStatus,
            detail: format!(
                "{} returned undocumented status {}",
                step_label(s),
                s.status_code.unwrap_or_default()
            ),
        });
    }
    if let Some(s) = found(&|s| matches!(s.outcome, Outcome::ExtractionMiss | Outcome::ContractViolation)) {
        return Some(FailureClass {
            class: FailureKind::ResponseContract,
            detail: format!("{}: {}", step_label(s), s.detail.as_deref().unwrap_or("bad response")),
        });
    }
    if let Some(s) = found(&|s| s.outcome == Outcome::HttpError) {
        // Non-2xx on an expected-success step that none of the above caught.
        return Some(FailureClass {
            class: FailureKind::RequestContract,
            detail: format!("{} returned {}", step_label(s), s.status_code.unwrap_or_default()),
        });
    }
    if let Some(r) = result.relation_verdicts.iter().find(|r| !r.verdict.holds()) {
        let reason = match &r.verdict {
            RelationVerdict::Violated { reason } | RelationVerdict::TypeMismatch { reason } => reason.as_str(),
            RelationVerdict::Holds => "",
        };
        return Some(FailureClass {
            class: FailureKind::RelationViolation,
            detail: format!("assertion {} ({}) violated: {reason}", r.assertion_index, r.kind),
        });
    }
    None
}
