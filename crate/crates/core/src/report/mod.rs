//! Per-iteration summaries, session totals, and the on-disk artifact set.

mod persist;
mod sequences;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::apispec::OperationKey;
use crate::executor::{FailureKind, ScenarioResult, Sequence, Verdict};
use crate::mt::Hlmt;
use crate::session::{ScenarioRecord, SessionConfig, SessionState, StopReason, PLATEAU_RULE};

pub use persist::{artifact_manifest, load_annotations, persist_session, render_markdown, ReportError};
pub use sequences::{diff_sequences, load_sequence_set};

pub const LABEL_TRUE_POSITIVE: &str = "true-positive";
pub const LABEL_FALSE_POSITIVE: &str = "false-positive";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: u32,
    pub hlmt_count: usize,
    /// Executable plans; placeholders are not counted here.
    pub emt_count: usize,
    pub passed: usize,
    pub failed: usize,
    pub placeholders: usize,
    pub by_failure_class: BTreeMap<FailureKind, usize>,
    pub coverage_percent: f64,
    pub newly_covered: Vec<OperationKey>,
    pub requests_spent: u64,
    pub new_slugs: usize,
    pub plateau_counter: u32,
    pub elapsed_secs: f64,
}

/// Verdict and failure class counts for one batch. Session-level fields
/// (coverage, plateau, timing) are left for the caller to fill in.
pub fn summarize_iteration(results: &[ScenarioResult], hlmts: &[Hlmt]) -> IterationSummary {
    let mut s = IterationSummary {
        iteration: hlmts.first().map(Hlmt::iteration_index).unwrap_or(0),
        hlmt_count: hlmts.len(),
        requests_spent: results.iter().map(|r| r.requests_spent).sum(),
        ..Default::default()
    };
    for r in results {
        match r.verdict {
            Verdict::Passed => s.passed += 1,
            Verdict::Failed => s.failed += 1,
            Verdict::FailedPlaceholder => s.placeholders += 1,
        }
        if let Some(kind) = r.failure_kind() {
            *s.by_failure_class.entry(kind).or_default() += 1;
        }
    }
    s.emt_count = s.passed + s.failed;
    s
}

/// True positive rate over annotated failures, or `unlabeled` when no
/// failure carries an annotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tpr {
    Unlabeled,
    Percent(f64),
}

impl fmt::Display for Tpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tpr::Unlabeled => f.write_str("unlabeled"),
            Tpr::Percent(p) => write!(f, "{p:.1}"),
        }
    }
}

impl Serialize for Tpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Tpr::Unlabeled => s.serialize_str("unlabeled"),
            Tpr::Percent(p) => s.serialize_f64(*p),
        }
    }
}

impl<'de> Deserialize<'de> for Tpr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) if s == "unlabeled" => Ok(Tpr::Unlabeled),
            serde_json::Value::Number(n) => Ok(Tpr::Percent(n.as_f64().unwrap_or(0.0))),
            other => Err(serde::de::Error::custom(format!("bad tpr value {other}"))),
        }
    }
}

/// Session totals in the shape of the evaluation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub hlmt_count: usize,
    pub emt_count: usize,
    pub passed: usize,
    pub failed: usize,
    pub placeholders: usize,
    pub coverage_percent: f64,
    pub elapsed_secs: f64,
    pub requests_spent: u64,
    /// Failed scenarios annotated as real defects.
    pub tpft: usize,
    pub annotated_failed: usize,
    pub tpr: Tpr,
}

impl MetricsRow {
    pub fn compute(records: &[ScenarioRecord], iterations: &[IterationSummary], coverage: f64, elapsed: Duration) -> Self {
        let mut row = MetricsRow {
            hlmt_count: iterations.iter().map(|i| i.hlmt_count).sum(),
            emt_count: 0,
            passed: 0,
            failed: 0,
            placeholders: 0,
            coverage_percent: coverage,
            elapsed_secs: elapsed.as_secs_f64(),
            requests_spent: records.iter().map(|r| r.result.requests_spent).sum(),
            tpft: 0,
            annotated_failed: 0,
            tpr: Tpr::Unlabeled,
        };
        for rec in records {
            match rec.result.verdict {
                Verdict::Passed => row.passed += 1,
                Verdict::FailedPlaceholder => row.placeholders += 1,
                Verdict::Failed => {
                    row.failed += 1;
                    match rec.result.annotation.as_deref() {
                        Some(LABEL_TRUE_POSITIVE) => {
                            row.tpft += 1;
                            row.annotated_failed += 1;
                        }
                        Some(_) => row.annotated_failed += 1,
                        None => {}
                    }
                }
            }
        }
        row.emt_count = row.passed + row.failed;
        if row.annotated_failed > 0 {
            row.tpr = Tpr::Percent(row.tpft as f64 / row.annotated_failed as f64 * 100.0);
        }
        row
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: String,
    pub config: SessionConfig,
    pub plateau_rule: String,
    pub stop_reason: StopReason,
    pub iterations: Vec<IterationSummary>,
    pub totals: MetricsRow,
    pub operation_count: usize,
    pub covered_operations: Vec<OperationKey>,
    /// Semantic slug to the `iteration:id` of every scenario sharing it.
    pub semantic_groups: BTreeMap<String, Vec<String>>,
    /// Distinct issued sequences, in first-seen order.
    pub sequences: Vec<Sequence>,
    pub failed_sequences: Vec<Sequence>,
    pub artifacts: Vec<String>,
}

/// Everything a session produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub report: SessionReport,
    pub hlmts_by_iteration: Vec<(u32, Vec<Hlmt>)>,
    pub records: Vec<ScenarioRecord>,
}

impl SessionOutcome {
    /// Attaches labels keyed by `iteration:id` or bare `id`, then recomputes
    /// the totals.
    pub fn annotate(&mut self, labels: &BTreeMap<String, String>) {
        for rec in &mut self.records {
            let key = format!("{}:{}", rec.iteration, rec.result.hlmt_id);
            if let Some(l) = labels.get(&key).or_else(|| labels.get(&rec.result.hlmt_id)) {
                rec.result.annotation = Some(l.clone());
            }
        }
        let r = &mut self.report;
        r.totals = MetricsRow::compute(
            &self.records,
            &r.iterations,
            r.totals.coverage_percent,
            Duration::from_secs_f64(r.totals.elapsed_secs),
        );
    }

    pub fn results(&self) -> impl Iterator<Item = &ScenarioResult> {
        self.records.iter().map(|r| &r.result)
    }

    pub fn record(&self, hlmt_id: &str) -> Option<&ScenarioRecord> {
        self.records.iter().find(|r| r.result.hlmt_id == hlmt_id)
    }
}

pub(crate) fn build_report(
    session_id: &str,
    config: &SessionConfig,
    state: &SessionState,
    stop_reason: StopReason,
    elapsed: Duration,
    hlmts_by_iteration: Vec<(u32, Vec<Hlmt>)>,
    records: Vec<ScenarioRecord>,
) -> SessionOutcome {
    let mut semantic_groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (iteration, hlmts) in &hlmts_by_iteration {
        for h in hlmts {
            semantic_groups
                .entry(h.semantic_slug().to_string())
                .or_default()
                .push(format!("{iteration}:{}", h.id()));
        }
    }
    let mut sequences: Vec<Sequence> = Vec::new();
    let mut failed_sequences: Vec<Sequence> = Vec::new();
    for rec in records.iter().filter(|r| !r.result.is_placeholder()) {
        let seq = &rec.result.sequence;
        if !sequences.contains(seq) {
            sequences.push(seq.clone());
        }
        if rec.result.verdict == Verdict::Failed && !failed_sequences.contains(seq) {
            failed_sequences.push(seq.clone());
        }
    }
    let report = SessionReport {
        session_id: session_id.to_string(),
        config: config.clone(),
        plateau_rule: PLATEAU_RULE.to_string(),
        stop_reason,
        totals: MetricsRow::compute(&records, &state.iteration_summaries, state.coverage_percent(), elapsed),
        iterations: state.iteration_summaries.clone(),
        operation_count: state.operation_count,
        covered_operations: state.covered_operations.iter().cloned().collect(),
        semantic_groups,
        sequences,
        failed_sequences,
        artifacts: Vec::new(),
    };
    let mut outcome = SessionOutcome {
        report,
        hlmts_by_iteration,
        records,
    };
    outcome.report.artifacts = artifact_manifest(&outcome);
    outcome
}
