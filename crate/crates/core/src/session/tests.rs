use std::sync::Arc;
use std::time::Duration;

use super::*;
use crate::agents::{ScriptedClient, ScriptedResponse};
use crate::apispec::{parse_spec, FormatHint};
use crate::bundled;
use crate::executor::Verdict;
use crate::testbed::{canned, scripted_iteration, start_testbed, FaultProfile};

fn testbed_spec() -> ApiSpecification {
    parse_spec(bundled::TESTBED, FormatHint::Auto).unwrap()
}

fn state(spec: &ApiSpecification) -> SessionState {
    SessionState::new(spec, Duration::ZERO)
}

#[test]
fn stop_criteria_fire_in_priority_order() {
    let spec = testbed_spec();
    let cfg = SessionConfig {
        target_coverage: 50.0,
        plateau_window: 2,
        request_budget: 10,
        time_budget: Duration::from_secs(60),
        ..Default::default()
    };
    let mut s = state(&spec);
    assert_eq!(should_stop(&s, &cfg, Duration::from_secs(1)), StopDecision::Continue);

    s.plateau_counter = 2;
    assert_eq!(should_stop(&s, &cfg, Duration::ZERO), StopDecision::Stop(StopReason::Plateau));
    s.covered_operations = spec.operation_keys().take(4).collect();
    assert_eq!(should_stop(&s, &cfg, Duration::ZERO), StopDecision::Stop(StopReason::CoverageTarget));
    s.requests_spent = 10;
    assert_eq!(should_stop(&s, &cfg, Duration::ZERO), StopDecision::Stop(StopReason::RequestBudget));
    assert_eq!(
        should_stop(&s, &cfg, Duration::from_secs(60)),
        StopDecision::Stop(StopReason::TimeBudget)
    );
}

#[test]
fn coverage_below_target_does_not_stop() {
    let spec = testbed_spec();
    let cfg = SessionConfig::default();
    let mut s = state(&spec);
    s.covered_operations = spec.operation_keys().take(6).collect();
    assert_eq!(should_stop(&s, &cfg, Duration::ZERO), StopDecision::Continue);
    s.covered_operations = spec.operation_keys().collect();
    assert_eq!(s.coverage_percent(), 100.0);
    assert_eq!(should_stop(&s, &cfg, Duration::ZERO), StopDecision::Stop(StopReason::CoverageTarget));
}

#[test]
fn plateau_counter_resets_on_any_progress() {
    let spec = testbed_spec();
    let mut s = state(&spec);
    s.record_progress(0, 0);
    s.record_progress(0, 0);
    assert_eq!(s.plateau_counter, 2);
    s.record_progress(0, 1);
    assert_eq!(s.plateau_counter, 0);
    s.record_progress(0, 0);
    s.record_progress(1, 0);
    assert_eq!(s.plateau_counter, 0);
}

#[test]
fn empty_spec_is_fatal() {
    let spec = parse_spec("openapi: 3.0.0\ninfo: {title: t, version: '1'}\npaths: {}\n", FormatHint::Auto).unwrap();
    let clients = AgentClients::shared(Arc::new(ScriptedClient::from_texts(Vec::<String>::new())));
    let err = run_session(&spec, "http://127.0.0.1:9", &SessionConfig::default(), &clients, &SessionOptions::default());
    assert!(err.is_err());
}

#[test]
fn invalid_config_is_fatal() {
    let spec = testbed_spec();
    let clients = AgentClients::shared(Arc::new(ScriptedClient::from_texts(Vec::<String>::new())));
    let cfg = SessionConfig {
        batch_bound: 0,
        ..Default::default()
    };
    assert!(run_session(&spec, "http://127.0.0.1:9", &cfg, &clients, &SessionOptions::default()).is_err());
}

#[test]
fn single_iteration_then_exhausted_script_stops_with_no_new_tests() {
    let spec = testbed_spec();
    let tb = Arc::new(start_testbed(FaultProfile::none()).unwrap());
    let fig2 = canned("fig2").unwrap();
    let client = Arc::new(ScriptedClient::new(scripted_iteration(&[fig2])));
    let clients = AgentClients::shared(client.clone());
    let hook_tb = tb.clone();
    let options = SessionOptions::default()
        .with_session_id("unit")
        .before_each(move |_| hook_tb.reset());
    let outcome = run_session(&spec, tb.base_url(), &SessionConfig::default(), &clients, &options).unwrap();

    assert_eq!(client.calls(), 4);
    let r = &outcome.report;
    assert_eq!(r.stop_reason, StopReason::NoNewTests);
    assert_eq!(r.iterations.len(), 1);
    assert_eq!(r.iterations[0].passed, 1);
    assert_eq!(r.iterations[0].new_slugs, 1);
    assert_eq!(r.covered_operations.len(), 3);
    assert_eq!(outcome.records[0].result.verdict, Verdict::Passed);
    assert_eq!(outcome.records[0].result.requests_spent, 4);
    assert_eq!(r.totals.requests_spent, 4);
}

#[test]
fn request_budget_stops_after_the_iteration_that_exhausts_it() {
    let spec = testbed_spec();
    let tb = start_testbed(FaultProfile::none()).unwrap();
    let fig2 = canned("fig2").unwrap();
    let mut script = scripted_iteration(std::slice::from_ref(&fig2));
    script.extend(scripted_iteration(&[fig2]));
    let clients = AgentClients::shared(Arc::new(ScriptedClient::new(script)));
    let cfg = SessionConfig {
        request_budget: 3,
        ..Default::default()
    };
    let outcome = run_session(&spec, tb.base_url(), &cfg, &clients, &SessionOptions::default()).unwrap();
    assert_eq!(outcome.report.stop_reason, StopReason::RequestBudget);
    assert_eq!(outcome.report.iterations.len(), 1);
    // The fourth request was refused by the budget, not issued.
    assert_eq!(outcome.report.totals.requests_spent, 3);
}

#[test]
fn placeholder_only_iterations_reach_the_plateau() {
    let spec = testbed_spec();
    let fig2 = canned("fig2").unwrap();
    let array = crate::agents::render_hlmts(std::slice::from_ref(&fig2.hlmt));
    let mut script = Vec::new();
    for _ in 0..2 {
        script.push(ScriptedResponse::Text(array.clone()));
        script.push(ScriptedResponse::Text(array.clone()));
        for _ in 0..3 {
            script.push(ScriptedResponse::Text("no plan here".into()));
        }
    }
    let clients = AgentClients::shared(Arc::new(ScriptedClient::new(script)));
    let cfg = SessionConfig {
        plateau_window: 2,
        ..Default::default()
    };
    let outcome = run_session(&spec, "http://127.0.0.1:9", &cfg, &clients, &SessionOptions::default()).unwrap();
    let r = &outcome.report;
    assert_eq!(r.stop_reason, StopReason::Plateau);
    assert_eq!(r.iterations.len(), 2);
    assert_eq!(r.totals.placeholders, 2);
    assert_eq!(r.totals.emt_count, 0);
    assert_eq!(r.totals.requests_spent, 0);
    assert!(r.covered_operations.is_empty());
}

#[test]
fn time_budget_is_checked_between_iterations() {
    let spec = testbed_spec();
    let tb = start_testbed(FaultProfile::none()).unwrap();
    let fig2 = canned("fig2").unwrap();
    let mut script = scripted_iteration(std::slice::from_ref(&fig2));
    script.extend(scripted_iteration(&[fig2]));
    let clients = AgentClients::shared(Arc::new(ScriptedClient::new(script)));
    let clock = Arc::new(SimulatedClock::stepping(Duration::from_secs(40)));
    let options = SessionOptions {
        clock,
        ..Default::default()
    };
    let cfg = SessionConfig {
        time_budget: Duration::from_secs(60),
        ..Default::default()
    };
    let outcome = run_session(&spec, tb.base_url(), &cfg, &clients, &options).unwrap();
    assert_eq!(outcome.report.stop_reason, StopReason::TimeBudget);
    assert_eq!(outcome.report.iterations.len(), 1);
}
