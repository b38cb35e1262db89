use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use super::{SessionOutcome, SessionReport};
use crate::executor::FailureKind;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn plan_file_name(iteration: u32, hlmt_id: &str) -> String {
    let id: String = hlmt_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("plans/iter_{iteration:02}_{id}.json")
}

/// Relative paths of every file `persist_session` writes, sorted.
pub fn artifact_manifest(outcome: &SessionOutcome) -> Vec<String> {
    let mut files: Vec<String> = ["coverage.json", "hlmts.json", "report.json", "report.md", "results.jsonl"]
        .into_iter()
        .map(String::from)
        .collect();
    files.extend(outcome.records.iter().map(|r| plan_file_name(r.iteration, &r.result.hlmt_id)));
    files.sort();
    files.dedup();
    files
}

// Going through Value sorts object keys.
fn sorted_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("artifact serializes")
}

fn write(dir: &Path, rel: &str, text: &str) -> Result<(), ReportError> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(&path, text).map_err(io_err(&path))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

/// Writes the artifact set into `dir`, creating it if needed.
pub fn persist_session(outcome: &SessionOutcome, dir: &Path) -> Result<(), ReportError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;

    let hlmts: Vec<Value> = outcome
        .hlmts_by_iteration
        .iter()
        .flat_map(|(iteration, hs)| {
            hs.iter().map(move |h| {
                let mut v = sorted_json(h);
                v["iteration"] = json!(iteration);
                v["semantic_slug"] = json!(h.semantic_slug());
                v
            })
        })
        .collect();
    write(dir, "hlmts.json", &pretty(&Value::Array(hlmts)))?;

    for rec in &outcome.records {
        write(dir, &plan_file_name(rec.iteration, &rec.result.hlmt_id), &pretty(&sorted_json(&rec.plan)))?;
    }

    let mut lines = String::new();
    for rec in &outcome.records {
        let mut v = sorted_json(&rec.result);
        v["iteration"] = json!(rec.iteration);
        lines.push_str(&serde_json::to_string(&v).expect("value serializes"));
        lines.push('\n');
    }
    write(dir, "results.jsonl", &lines)?;

    let r = &outcome.report;
    let coverage = json!({
        "operation_count": r.operation_count,
        "covered": r.covered_operations,
        "coverage_percent": r.totals.coverage_percent,
        "by_iteration": r.iterations.iter().map(|i| json!({
            "iteration": i.iteration,
            "coverage_percent": i.coverage_percent,
            "newly_covered": i.newly_covered,
        })).collect::<Vec<_>>(),
    });
    write(dir, "coverage.json", &pretty(&coverage))?;
    write(dir, "report.json", &pretty(&sorted_json(r)))?;
    write(dir, "report.md", &render_markdown(r))?;
    Ok(())
}

/// Reads labels for failed scenarios. Accepts either an object mapping
/// `iteration:id` (or bare `id`) to a label, or an array of
/// `{"hlmt_id", "label", "iteration"?}` records.
pub fn load_annotations(path: &Path) -> Result<BTreeMap<String, String>, ReportError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |message: String| ReportError::Format {
        path: path.to_path_buf(),
        message,
    };
    let value: Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let mut out = BTreeMap::new();
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let label = v.as_str().ok_or_else(|| bad(format!("label for {k} is not a string")))?;
                out.insert(k, label.to_string());
            }
        }
        Value::Array(items) => {
            for item in items {
                let id = item["hlmt_id"].as_str().ok_or_else(|| bad("record without hlmt_id".into()))?;
                let label = item["label"].as_str().ok_or_else(|| bad(format!("record {id} without label")))?;
                let key = match item["iteration"].as_u64() {
                    Some(i) => format!("{i}:{id}"),
                    None => id.to_string(),
                };
                out.insert(key, label.to_string());
            }
        }
        _ => return Err(bad("expected an object or an array".into())),
    }
    Ok(out)
}

pub fn render_markdown(r: &SessionReport) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Session {}\n", r.session_id);
    let _ = writeln!(md, "Stopped by: {}\n", r.stop_reason);
    let _ = writeln!(md, "Plateau rule: {}\n", r.plateau_rule);
    let t = &r.totals;
    let _ = writeln!(md, "| HLMTs | EMTs | Passed | Failed | Placeholders | Coverage % | Time (s) | Requests | TPFT | TPR |");
    let _ = writeln!(md, "|---|---|---|---|---|---|---|---|---|---|");
    let _ = writeln!(
        md,
        "| {} | {} | {} | {} | {} | {:.1} | {:.1} | {} | {} | {} |\n",
        t.hlmt_count,
        t.emt_count,
        t.passed,
        t.failed,
        t.placeholders,
        t.coverage_percent,
        t.elapsed_secs,
        t.requests_spent,
        t.tpft,
        t.tpr
    );

    let _ = writeln!(md, "## Iterations\n");
    let _ = writeln!(md, "| # | HLMTs | EMTs | Passed | Failed | Placeholders | Coverage % | New slugs | Plateau |");
    let _ = writeln!(md, "|---|---|---|---|---|---|---|---|---|");
    for i in &r.iterations {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {:.1} | {} | {} |",
            i.iteration,
            i.hlmt_count,
            i.emt_count,
            i.passed,
            i.failed,
            i.placeholders,
            i.coverage_percent,
            i.new_slugs,
            i.plateau_counter
        );
    }

    let mut classes: BTreeMap<FailureKind, usize> = BTreeMap::new();
    for i in &r.iterations {
        for (k, n) in &i.by_failure_class {
            *classes.entry(*k).or_default() += n;
        }
    }
    if !classes.is_empty() {
        let _ = writeln!(md, "\n## Failure classes\n");
        for (k, n) in classes {
            let _ = writeln!(md, "- {k}: {n}");
        }
    }
    if !r.failed_sequences.is_empty() {
        let _ = writeln!(md, "\n## Failing sequences\n");
        for s in &r.failed_sequences {
            let _ = writeln!(md, "- `{s}`");
        }
    }
    let _ = writeln!(md, "\n## Covered operations ({} of {})\n", r.covered_operations.len(), r.operation_count);
    for op in &r.covered_operations {
        let _ = writeln!(md, "- {op}");
    }
    md
}
