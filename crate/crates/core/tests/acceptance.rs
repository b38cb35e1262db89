//! Offline acceptance suite. Runs every criterion against the in-process
//! testbed with scripted model responses and prints one line per criterion.
//! Built with `harness = false` so the lines always show.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, TestRunner};
use serde_json::{json, Map, Value};

use metarest::agents::{render_hlmts, AgentClients, ScriptedClient, ScriptedResponse};
use metarest::apispec::{FormatHint, HttpMethod};
use metarest::executor::{FailureKind, Sequence, Verdict};
use metarest::mt::lenient::recover_array;
use metarest::mt::{group_semantic, normalize_title, LenientError};
use metarest::plan::{check_relation, RelationKind};
use metarest::report::{diff_sequences, load_sequence_set, persist_session, SessionOutcome};
use metarest::session::{
    replay_plans, run_session, should_stop, SessionConfig, SessionOptions, SessionState, SimulatedClock, StopDecision,
    StopReason,
};
use metarest::testbed::{canned, canned_scenarios, scripted_iteration, start_testbed, CannedScenario, Fault, FaultProfile, TestbedHandle};
use metarest::{bundled, parse_spec, ApiSpecification, EmtPlan};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn testbed_spec() -> ApiSpecification {
    parse_spec(bundled::TESTBED, FormatHint::Auto).expect("testbed document parses")
}

fn options_for(tb: &Arc<TestbedHandle>, id: &str) -> SessionOptions {
    let hook = tb.clone();
    SessionOptions::default().with_session_id(id).before_each(move |_| hook.reset())
}

fn session_on(fault: Option<Fault>, script: Vec<ScriptedResponse>, cfg: &SessionConfig) -> Result<(SessionOutcome, Arc<TestbedHandle>), String> {
    let profile = fault.map_or_else(FaultProfile::none, FaultProfile::single);
    let tb = Arc::new(start_testbed(profile).map_err(|e| e.to_string())?);
    let clients = AgentClients::shared(Arc::new(ScriptedClient::new(script)));
    let outcome = run_session(&testbed_spec(), tb.base_url(), cfg, &clients, &options_for(&tb, "acceptance"))
        .map_err(|e| e.to_string())?;
    Ok((outcome, tb))
}

fn fig2_session(fault: Option<Fault>) -> Result<(SessionOutcome, Vec<metarest::executor::SequenceEntry>, Duration), String> {
    let profile = fault.map_or_else(FaultProfile::none, FaultProfile::single);
    let tb = start_testbed(profile).map_err(|e| e.to_string())?;
    let client = ScriptedClient::from_dir(&fixtures().join("scripted/fig2")).map_err(|e| e.to_string())?;
    let clients = AgentClients::shared(Arc::new(client));
    let started = Instant::now();
    let outcome = run_session(
        &testbed_spec(),
        tb.base_url(),
        &SessionConfig::default(),
        &clients,
        &SessionOptions::default().with_session_id("fig2"),
    )
    .map_err(|e| e.to_string())?;
    Ok((outcome, tb.history(), started.elapsed()))
}

const FIG2_SEQUENCE: &str = "POST /pet -> GET /pet/{petId} -> POST /pet/{petId} -> GET /pet/{petId}";

fn c1_spec_counts() -> Check {
    let t = Instant::now();
    let pet = parse_spec(bundled::PETSTORE, FormatHint::Auto).map_err(|e| e.to_string())?;
    let um = parse_spec(bundled::USER_MANAGEMENT, FormatHint::Swagger2).map_err(|e| e.to_string())?;
    let took = t.elapsed();
    ensure!(pet.operation_count() == 19, "petstore has {} operations", pet.operation_count());
    ensure!(um.operation_count() == 28, "user management has {} operations", um.operation_count());
    ensure!(took < Duration::from_secs(1), "parsing took {took:?}");
    Ok(format!("19 and 28 operations in {took:?}"))
}

fn c2_slug() -> Check {
    let title = "Updating a pet's status should be observable when retrieving that pet by its identifier.";
    let expected = "updating_a_pet_s_status_should_be_observable_when_retrieving_that_pet_by_its_identifier";
    let got = normalize_title(title);
    ensure!(got == expected, "got {got}");
    let fig2 = canned("fig2").ok_or("fig2 fixture missing")?;
    ensure!(fig2.hlmt.semantic_slug() == expected, "fixture slug {}", fig2.hlmt.semantic_slug());
    ensure!(normalize_title("Repeat login MR 12") == "repeat_login", "identifier tokens not removed");
    let reworded = metarest::Hlmt::new("MR99", "Updating a pet's status should be observable when retrieving that pet by its identifier (MR 26)", "g", "w", "t");
    let groups = group_semantic("s", &[fig2.hlmt.clone(), reworded]);
    ensure!(groups.len() == 1 && groups[0].members.len() == 2, "grouping gave {groups:?}");
    Ok(expected.to_string())
}

fn c3_fig2_correct() -> Check {
    let (outcome, history, took) = fig2_session(None)?;
    let r = &outcome.report;
    ensure!(r.iterations.len() == 1, "{} iterations", r.iterations.len());
    ensure!(outcome.records.len() == 1, "{} scenarios", outcome.records.len());
    let res = &outcome.records[0].result;
    ensure!(res.verdict == Verdict::Passed, "verdict {} ({:?})", res.verdict, res.failure_class);
    ensure!(res.requests_spent == 4, "{} requests", res.requests_spent);
    // The service's own log is an independent count.
    ensure!(history.len() == 4, "testbed saw {} requests", history.len());
    ensure!(res.sequence.to_string() == FIG2_SEQUENCE, "sequence {}", res.sequence);
    ensure!(Sequence(history).to_string() == FIG2_SEQUENCE, "testbed order differs");
    ensure!(took < Duration::from_secs(5), "took {took:?}");
    Ok(format!("passed, 4 requests, {FIG2_SEQUENCE}, {took:?}"))
}

fn c4_fig2_fault() -> Check {
    let (outcome, _, _) = fig2_session(Some(Fault::DropStatusUpdate))?;
    let res = &outcome.records.first().ok_or("no scenario ran")?.result;
    ensure!(res.verdict == Verdict::Failed, "verdict {}", res.verdict);
    ensure!(
        res.failure_kind() == Some(FailureKind::RelationViolation),
        "class {:?}",
        res.failure_class
    );
    let violated: Vec<_> = res.relation_verdicts.iter().filter(|r| !r.verdict.holds()).collect();
    ensure!(
        violated.len() == 1 && violated[0].kind == RelationKind::Difference,
        "violated assertions {violated:?}"
    );
    Ok("failed with relation-violation on the status difference".into())
}

fn c5_taxonomy() -> Check {
    let all = canned_scenarios();
    let mut lines = Vec::new();
    for fault in [
        Fault::RejectMissingField,
        Fault::InvalidExpiresHeader,
        Fault::CrashOnSequence,
        Fault::SlowEndpoint,
        Fault::DropStatusUpdate,
    ] {
        let target: &CannedScenario = all.iter().find(|c| c.fault == fault).ok_or("no scenario for fault")?;
        let (outcome, _) = session_on(Some(fault), scripted_iteration(&all), &SessionConfig::default())?;
        ensure!(outcome.records.len() == all.len(), "{fault}: {} scenarios ran", outcome.records.len());
        for rec in &outcome.records {
            let res = &rec.result;
            if res.hlmt_id == target.hlmt.id() {
                ensure!(res.verdict == Verdict::Failed, "{fault}: target {} {}", res.hlmt_id, res.verdict);
                ensure!(
                    res.failure_kind() == Some(target.expected_failure),
                    "{fault}: {} classified {:?}, expected {}",
                    res.hlmt_id,
                    res.failure_class,
                    target.expected_failure.as_str()
                );
            } else {
                ensure!(
                    res.verdict == Verdict::Passed,
                    "{fault}: bystander {} {} {:?}",
                    res.hlmt_id,
                    res.verdict,
                    res.failure_class
                );
            }
        }
        lines.push(format!("{fault}->{}", target.expected_failure.as_str()));
    }
    Ok(lines.join(", "))
}

fn c6_stopping() -> Check {
    let spec = testbed_spec();
    let cfg = SessionConfig::default();
    ensure!(cfg.request_budget == 1000, "request budget {}", cfg.request_budget);
    ensure!(cfg.time_budget == Duration::from_secs(30 * 60), "time budget {:?}", cfg.time_budget);
    ensure!(cfg.plateau_window == 5, "plateau window {}", cfg.plateau_window);
    ensure!(cfg.target_coverage == 100.0, "coverage target {}", cfg.target_coverage);
    ensure!(cfg.repair_max_attempts == 2, "repair attempts {}", cfg.repair_max_attempts);

    let clock = SimulatedClock::new();
    let now = || metarest::session::Clock::now(&clock);
    let fresh = || SessionState::new(&spec, Duration::ZERO);

    let mut s = fresh();
    s.requests_spent = 999;
    ensure!(should_stop(&s, &cfg, now()) == StopDecision::Continue, "stopped at 999 requests");
    s.requests_spent = 1000;
    ensure!(should_stop(&s, &cfg, now()) == StopDecision::Stop(StopReason::RequestBudget), "request budget");

    let s = fresh();
    clock.advance(Duration::from_secs(30 * 60 - 1));
    ensure!(should_stop(&s, &cfg, now()) == StopDecision::Continue, "stopped before 30 min");
    clock.advance(Duration::from_secs(1));
    ensure!(should_stop(&s, &cfg, now()) == StopDecision::Stop(StopReason::TimeBudget), "time budget");

    let mut s = fresh();
    for _ in 0..4 {
        s.record_progress(0, 0);
    }
    ensure!(should_stop(&s, &cfg, Duration::ZERO) == StopDecision::Continue, "plateau at 4");
    s.record_progress(0, 0);
    ensure!(should_stop(&s, &cfg, Duration::ZERO) == StopDecision::Stop(StopReason::Plateau), "plateau at 5");
    s.record_progress(1, 0);
    ensure!(s.plateau_counter == 0, "slug progress kept counter {}", s.plateau_counter);
    s.record_progress(0, 0);
    s.record_progress(0, 2);
    ensure!(s.plateau_counter == 0, "coverage progress kept counter {}", s.plateau_counter);

    let mut s = fresh();
    let keys: Vec<_> = spec.operation_keys().collect();
    s.covered_operations = keys[..keys.len() - 1].iter().cloned().collect();
    ensure!(should_stop(&s, &cfg, Duration::ZERO) == StopDecision::Continue, "stopped below 100%");
    s.covered_operations = keys.into_iter().collect();
    ensure!(should_stop(&s, &cfg, Duration::ZERO) == StopDecision::Stop(StopReason::CoverageTarget), "coverage");

    // All four firing at once resolve in priority order.
    s.requests_spent = 1000;
    s.plateau_counter = 5;
    ensure!(
        should_stop(&s, &cfg, Duration::from_secs(1800)) == StopDecision::Stop(StopReason::TimeBudget),
        "priority order"
    );
    Ok("1000 requests, 30 min, plateau 5, 100% coverage; progress resets plateau".into())
}

fn c7_repair() -> Check {
    let fig2 = canned("fig2").ok_or("fig2 fixture missing")?;
    let array = render_hlmts(std::slice::from_ref(&fig2.hlmt));
    let mut unknown_op = serde_json::to_value(&fig2.plan).map_err(|e| e.to_string())?;
    unknown_op["when_steps"][0]["method"] = json!("PATCH");
    let mut bad_labels = serde_json::to_value(&fig2.plan).map_err(|e| e.to_string())?;
    bad_labels["labels"]["given"] = json!("something else");
    let script = vec![
        ScriptedResponse::Text(array.clone()),
        ScriptedResponse::Text(array),
        ScriptedResponse::Text(unknown_op.to_string()),
        ScriptedResponse::Text(bad_labels.to_string()),
        ScriptedResponse::Text("I could not produce a plan.".into()),
    ];
    let client = Arc::new(ScriptedClient::new(script));
    let clients = AgentClients::shared(client.clone());
    let tb = Arc::new(start_testbed(FaultProfile::none()).map_err(|e| e.to_string())?);
    let outcome = run_session(&testbed_spec(), tb.base_url(), &SessionConfig::default(), &clients, &options_for(&tb, "repair"))
        .map_err(|e| e.to_string())?;
    let prompts = client.prompts();
    ensure!(prompts.len() >= 5, "{} model calls", prompts.len());
    ensure!(
        prompts[3].contains("PATCH /pet/{petId}") && prompts[4].contains("Keep the labels unchanged"),
        "repair prompts do not carry the diagnostics"
    );
    let rec = outcome.records.first().ok_or("no scenario recorded")?;
    ensure!(rec.plan.placeholder, "plan is not a placeholder");
    ensure!(rec.result.verdict == Verdict::FailedPlaceholder, "verdict {}", rec.result.verdict);
    ensure!(rec.result.requests_spent == 0, "{} requests", rec.result.requests_spent);
    ensure!(tb.history().is_empty(), "testbed saw {} requests", tb.history().len());
    let t = &outcome.report.totals;
    ensure!(t.emt_count == 0 && t.placeholders == 1, "emt_count {} placeholders {}", t.emt_count, t.placeholders);
    Ok("3 invalid drafts -> placeholder, 0 requests, excluded from emt_count".into())
}

// Emits `v` as JSON text with optional damage the lenient parser must undo.
fn emit(v: &Value, single_quotes: bool, python: bool, trailing: bool, out: &mut String) {
    let quote = |s: &str, out: &mut String| {
        if single_quotes {
            out.push('\'');
            out.push_str(s);
            out.push('\'');
        } else {
            out.push_str(&serde_json::to_string(s).unwrap());
        }
    };
    match v {
        Value::Null => out.push_str(if python { "None" } else { "null" }),
        Value::Bool(b) => out.push_str(match (b, python) {
            (true, true) => "True",
            (false, true) => "False",
            (true, false) => "true",
            (false, false) => "false",
        }),
        Value::Number(n) => out.push_str(&n.to_string()),
        Value::String(s) => quote(s, out),
        Value::Array(items) => {
            out.push('[');
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                emit(x, single_quotes, python, trailing, out);
            }
            if trailing && !items.is_empty() {
                out.push(',');
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, x)) in map.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                quote(k, out);
                out.push_str(": ");
                emit(x, single_quotes, python, trailing, out);
            }
            if trailing && !map.is_empty() {
                out.push(',');
            }
            out.push('}');
        }
    }
}

fn hlmt_array() -> impl Strategy<Value = Value> {
    let text = "[A-Za-z0-9][A-Za-z0-9 ,.:/{}()-]{0,40}";
    let flag = prop_oneof![Just(Value::Null), any::<bool>().prop_map(Value::Bool)];
    let item = (text, text, text, text, 1u32..500, proptest::option::of(flag)).prop_map(|(s, g, w, t, n, f)| {
        let mut m = Map::new();
        m.insert("id".into(), json!(format!("MR{n}")));
        m.insert("scenario".into(), json!(s));
        m.insert("given".into(), json!(g));
        m.insert("when".into(), json!(w));
        m.insert("then".into(), json!(t));
        if let Some(f) = f {
            m.insert("flaky".into(), f);
        }
        Value::Object(m)
    });
    proptest::collection::vec(item, 1..6).prop_map(Value::Array)
}

fn c8_lenient() -> Check {
    let mut runner = TestRunner::new(PtConfig {
        cases: 100,
        failure_persistence: None,
        ..PtConfig::default()
    });
    let mutations = (hlmt_array(), any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>(), "[A-Za-z .:]{0,30}");
    runner
        .run(&mutations, |(v, fence, sq, py, trailing, prose)| {
            let mut text = String::new();
            emit(&v, sq, py, trailing, &mut text);
            if fence {
                text = format!("{prose}\n```json\n{text}\n```\nDone.");
            }
            let back = recover_array(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
            prop_assert_eq!(&back, &v, "input {}", text);
            let parsed = metarest::parse_hlmt_list(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(parsed.hlmts.len(), v.as_array().unwrap().len());
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    let mut runner = TestRunner::new(PtConfig {
        cases: 100,
        failure_persistence: None,
        ..PtConfig::default()
    });
    let garbage = prop_oneof!["[A-Za-z0-9 ,.:;(){}'\"-]{0,80}", "[A-Za-z ]{0,20}\\[ ?@@[A-Za-z @#]{0,20}\\]?"];
    runner
        .run(&garbage, |g| {
            prop_assert!(
                matches!(recover_array(&g), Err(LenientError::NoArrayFound(_))),
                "recovered something from {:?}",
                g
            );
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("100 damaged arrays recovered, 100 garbage inputs rejected".into())
}

fn small_json() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        (-3i64..4).prop_map(|n| json!(n)),
        "[ab]{0,2}".prop_map(Value::String),
    ];
    leaf.prop_recursive(2, 8, 3, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
            proptest::collection::btree_map("[ab]", inner, 0..3).prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

fn c9_relations() -> Check {
    let mut runner = TestRunner::new(PtConfig {
        cases: 1000,
        failure_persistence: None,
        ..PtConfig::default()
    });
    runner
        .run(&(small_json(), small_json()), |(a, b)| {
            let h = |k| check_relation(k, &a, &b, None).holds();
            prop_assert_ne!(h(RelationKind::Equality), h(RelationKind::Difference));
            prop_assert_ne!(h(RelationKind::Inclusion), h(RelationKind::Exclusion));
            prop_assert!(check_relation(RelationKind::Equality, &a, &a, None).holds());
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    // Every array over {0,1,2} up to length 6 against every probe in 0..=3.
    let mut arrays: Vec<Vec<i64>> = vec![vec![]];
    let mut frontier = arrays.clone();
    for _ in 0..6 {
        frontier = frontier
            .iter()
            .flat_map(|a| (0..3).map(move |x| a.iter().copied().chain([x]).collect::<Vec<_>>()))
            .collect();
        arrays.extend(frontier.iter().cloned());
    }
    let mut checked = 0;
    for arr in &arrays {
        let container = json!(arr);
        for probe in 0..=3i64 {
            let oracle = arr.contains(&probe);
            let got = check_relation(RelationKind::Inclusion, &container, &json!(probe), None).holds();
            ensure!(got == oracle, "inclusion of {probe} in {arr:?}: got {got}");
            checked += 1;
        }
    }
    ensure!(arrays.len() == 1093, "{} arrays enumerated", arrays.len());
    Ok(format!("1000 random pairs, {checked} exhaustive inclusion cases"))
}

fn c10_monotonic() -> Check {
    let by_name = |n: &str| canned(n).ok_or(format!("missing fixture {n}"));
    let mut script = scripted_iteration(&[by_name("fig2")?]);
    script.extend(scripted_iteration(&[by_name("repeat_login")?, by_name("missing_name")?]));
    script.extend(scripted_iteration(&[by_name("delete_recreate")?, by_name("inventory")?]));
    let cfg = SessionConfig {
        request_budget: 14,
        ..Default::default()
    };
    let (outcome, tb) = session_on(None, script, &cfg)?;
    let r = &outcome.report;
    ensure!(r.iterations.len() == 3, "{} iterations", r.iterations.len());
    let traj: Vec<f64> = r.iterations.iter().map(|i| i.coverage_percent).collect();
    ensure!(traj.windows(2).all(|w| w[0] <= w[1]), "coverage trajectory {traj:?}");
    ensure!(r.totals.requests_spent <= cfg.request_budget, "{} requests spent", r.totals.requests_spent);
    let per_iter: u64 = r.iterations.iter().map(|i| i.requests_spent).sum();
    ensure!(per_iter == r.totals.requests_spent, "iteration sums {per_iter}");
    ensure!(r.stop_reason == StopReason::RequestBudget, "stopped by {}", r.stop_reason);
    drop(tb);
    Ok(format!("coverage {traj:?}, {} of {} requests", r.totals.requests_spent, cfg.request_budget))
}

fn c11_sequence_diff() -> Check {
    let mr3 = canned("repeat_login").ok_or("missing fixture")?;
    let (outcome, _) = session_on(Some(Fault::InvalidExpiresHeader), scripted_iteration(&[mr3]), &SessionConfig::default())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    persist_session(&outcome, dir.path()).map_err(|e| e.to_string())?;
    let ours = load_sequence_set(&dir.path().join("report.json")).map_err(|e| e.to_string())?;
    let only = diff_sequences(&ours, &BTreeSet::new());
    let expected = "POST /user -> GET /user/login -> GET /user/login";
    ensure!(only.len() == 1, "{} distinct sequences", only.len());
    let seq = only.iter().next().unwrap();
    ensure!(seq.to_string() == expected, "sequence {seq}");
    ensure!(
        seq.entries().iter().all(|e| e.resolved) && seq.entries()[0].method == HttpMethod::Post,
        "entries {seq:?}"
    );
    let res = &outcome.records[0].result;
    ensure!(res.failure_kind() == Some(FailureKind::ResponseContract), "class {:?}", res.failure_class);
    Ok(format!("{expected} is distinct"))
}

fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn c12_determinism() -> Check {
    let all = canned_scenarios();
    let (outcome, tb) = session_on(Some(Fault::DropStatusUpdate), scripted_iteration(&all), &SessionConfig::default())?;
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    persist_session(&outcome, a.path()).map_err(|e| e.to_string())?;
    persist_session(&outcome, b.path()).map_err(|e| e.to_string())?;
    let (ta, tb_files) = (read_tree(a.path()), read_tree(b.path()));
    ensure!(ta == tb_files, "persisted trees differ");
    let manifest: Vec<String> = ta.keys().map(|p| p.to_string_lossy().replace('\\', "/")).collect();
    ensure!(manifest == outcome.report.artifacts, "manifest {:?} vs {manifest:?}", outcome.report.artifacts);

    let mut plan_files: Vec<_> = ta.keys().filter(|p| p.starts_with("plans")).collect();
    plan_files.sort();
    let plans: Vec<EmtPlan> = plan_files
        .iter()
        .map(|p| serde_json::from_slice(&ta[*p]).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let hook = tb.clone();
    let reset = move |_: &EmtPlan| hook.reset();
    let replayed = replay_plans(&plans, &testbed_spec(), tb.base_url(), &SessionConfig::default(), Vec::new(), Some(&reset));
    let multiset = |it: &mut dyn Iterator<Item = Verdict>| {
        let mut m: BTreeMap<Verdict, usize> = BTreeMap::new();
        for v in it {
            *m.entry(v).or_default() += 1;
        }
        m
    };
    let original = multiset(&mut outcome.results().map(|r| r.verdict));
    let again = multiset(&mut replayed.iter().map(|r| r.verdict));
    ensure!(original == again, "verdicts {original:?} vs replay {again:?}");
    Ok(format!("{} files identical, replay verdicts {again:?}", ta.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("document operation counts", c1_spec_counts),
        ("slug of the worked example", c2_slug),
        ("worked example, correct service", c3_fig2_correct),
        ("worked example, status update dropped", c4_fig2_fault),
        ("failure taxonomy, one fault per run", c5_taxonomy),
        ("stopping criteria at defaults", c6_stopping),
        ("repair loop degrades to placeholder", c7_repair),
        ("lenient parsing properties", c8_lenient),
        ("relation predicate properties", c9_relations),
        ("coverage monotonic, budget respected", c10_monotonic),
        ("sequence diffing", c11_sequence_diff),
        ("artifact determinism and replay", c12_determinism),
    ];
    // Only the criterion lines should reach the console.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
