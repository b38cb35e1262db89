use super::*;
use crate::agents::{LlmError, ScriptedClient, ScriptedResponse};
use crate::apispec::{parse_spec, FormatHint};
use crate::bundled;
use crate::plan::PlanParseError;
use crate::testbed::canned;

fn petstore() -> ApiSpecification {
    parse_spec(bundled::PETSTORE, FormatHint::Auto).unwrap()
}

fn ctx(spec: &ApiSpecification) -> PromptContext {
    PromptContext {
        openapi_spec: spec.raw_text.clone(),
        no_tests: 5,
        base_url: "http://localhost".into(),
        ..PromptContext::default()
    }
}

fn array_of(n: usize) -> String {
    let items: Vec<String> = (1..=n)
        .map(|i| {
            format!(
                r#"{{"id": "MR{i}", "scenario": "Scenario number {i}", "given": "GET /pet/{{petId}}", "when": "w{i}", "then": "t{i}"}}"#
            )
        })
        .collect();
    format!("[{}]", items.join(","))
}

fn run_generate(output: &str, bound: usize) -> Result<Generated, AgentError> {
    let spec = petstore();
    let client = ScriptedClient::from_texts([output]);
    let cfg = AgentConfig::default();
    let templates = PromptTemplates::default();
    generate_hlmts(Agent::new(&client, &cfg, &templates), &ctx(&spec), bound)
}

#[test]
fn generation_within_bound() {
    let g = run_generate(&array_of(4), 5).unwrap();
    assert_eq!(g.hlmts.len(), 4);
    assert_eq!(g.truncated, 0);
}

#[test]
fn generation_truncates_in_list_order() {
    let g = run_generate(&array_of(8), 5).unwrap();
    assert_eq!(g.hlmts.len(), 5);
    assert_eq!(g.truncated, 3);
    assert_eq!(g.hlmts[4].id(), "MR5");
}

#[test]
fn prose_only_is_no_array() {
    let err = run_generate("I could not think of any new tests.", 5).unwrap_err();
    assert!(matches!(err, AgentError::NoArrayFound(_)));
    assert!(run_generate("[]", 5).unwrap().hlmts.is_empty());
}

#[test]
fn exhausted_script_is_a_transport_error() {
    let spec = petstore();
    let client = ScriptedClient::from_texts(Vec::<String>::new());
    let cfg = AgentConfig::default();
    let templates = PromptTemplates::default();
    let err = generate_hlmts(Agent::new(&client, &cfg, &templates), &ctx(&spec), 5).unwrap_err();
    assert!(matches!(err, AgentError::Transport(LlmError::ScriptExhausted(0))));
}

fn candidates() -> Vec<Hlmt> {
    vec![
        Hlmt::new("MR1", "Get twice", "a seed input using GET /pet/{petId}", "GET /pet/{petId} again", "equal"),
        Hlmt::new("MR2", "Inventory delete", "GET /store/inventory", "DELETE /inventory.", "count drops"),
        Hlmt::new("MR3", "Login", "POST /user then GET /user/login?username=a", "GET /user/login", "same"),
    ]
}

fn run_refine(client: &ScriptedClient) -> Refined {
    let spec = petstore();
    let cfg = AgentConfig::default();
    let templates = PromptTemplates::default();
    refine_hlmts(Agent::new(client, &cfg, &templates), &spec, &candidates(), &ctx(&spec))
}

#[test]
fn local_filter_drops_undocumented_operations() {
    let echo = render_hlmts(&candidates());
    let r = run_refine(&ScriptedClient::from_texts([echo]));
    assert!(!r.degraded);
    let ids: Vec<&str> = r.hlmts.iter().map(Hlmt::id).collect();
    assert_eq!(ids, ["MR1", "MR3"]);
    assert!(r.diagnostics.iter().any(|d| d.message.contains("DELETE /inventory")));
}

#[test]
fn empty_refiner_output_degrades_to_local_filter() {
    let r = run_refine(&ScriptedClient::from_texts([""]));
    assert!(r.degraded);
    assert_eq!(r.hlmts.len(), 2);
    let failing = ScriptedClient::new(vec![ScriptedResponse::Fail("503".into())]);
    assert_eq!(run_refine(&failing).hlmts.len(), 2);
}

#[test]
fn refiner_may_drop_and_reword_but_not_add() {
    let reply = r#"[
        {"id": "MR3", "scenario": "Repeat login", "given": "POST /user, GET /user/login", "when": "GET /user/login", "then": "same headers"},
        {"id": "MR9", "scenario": "Invented", "given": "g", "when": "w", "then": "t"}
    ]"#;
    let r = run_refine(&ScriptedClient::from_texts([reply]));
    assert_eq!(r.hlmts.len(), 1);
    assert_eq!(r.hlmts[0].scenario_title(), "Repeat login");
    assert!(r.diagnostics.iter().any(|d| d.location == "MR9"));
    assert!(r.diagnostics.iter().any(|d| d.location == "MR1" && d.message == "dropped by refiner"));
}

#[test]
fn mentions_are_found_in_prose() {
    let m = mentioned_operations("first POST /pet, then GET /pet/{petId}. Finally DELETE /pet/1?x=y");
    let rendered: Vec<String> = m.iter().map(|(m, p)| format!("{m} {p}")).collect();
    assert_eq!(rendered, ["POST /pet", "GET /pet/{petId}", "DELETE /pet/1?x=y"]);
}

fn agent_parts(responses: Vec<&str>) -> (ScriptedClient, AgentConfig, PromptTemplates) {
    (
        ScriptedClient::from_texts(responses),
        AgentConfig::default(),
        PromptTemplates::default(),
    )
}

#[test]
fn fig2_plan_is_accepted() {
    let spec = petstore();
    let fig2 = canned("fig2").unwrap();
    let plan_text = serde_json::to_string(&fig2.plan).unwrap();
    let (client, cfg, templates) = agent_parts(vec![&plan_text]);
    let plan = generate_emt(Agent::new(&client, &cfg, &templates), &fig2.hlmt, &ctx(&spec)).unwrap();
    assert_eq!(plan.given_steps.len(), 2);
    assert_eq!(plan.when_steps.len(), 2);
    assert!(validate_plan(&plan, &spec).is_empty());
    assert!(client.prompts()[0].contains(fig2.hlmt.given_text()));
}

#[test]
fn label_mismatch_is_rejected() {
    let spec = petstore();
    let fig2 = canned("fig2").unwrap();
    let mut plan = fig2.plan.clone();
    plan.labels.then = "something else".into();
    let text = serde_json::to_string(&plan).unwrap();
    let (client, cfg, templates) = agent_parts(vec![&text]);
    let err = generate_emt(Agent::new(&client, &cfg, &templates), &fig2.hlmt, &ctx(&spec)).unwrap_err();
    match err {
        AgentError::Plan(PlanParseError::LabelMismatch(d)) => assert_eq!(d[0].location, "labels.then"),
        other => panic!("unexpected {other:?}"),
    }
}

fn invalid_plan_text() -> String {
    let mut plan = canned("fig2").unwrap().plan;
    plan.when_steps[0].method = HttpMethod::Patch;
    serde_json::to_string(&plan).unwrap()
}

fn run_loop(responses: Vec<String>, max: u32) -> (Repaired, usize) {
    let spec = petstore();
    let hlmt = canned("fig2").unwrap().hlmt;
    let client = ScriptedClient::from_texts(responses);
    let cfg = AgentConfig::default();
    let templates = PromptTemplates::default();
    let agent = Agent::new(&client, &cfg, &templates);
    let c = ctx(&spec);
    let draft = draft_emt(agent, &hlmt, &c);
    let repaired = repair_emt_loop(agent, draft, &hlmt, &spec, &c, RepairBudget::new(max));
    (repaired, client.calls())
}

#[test]
fn valid_first_plan_needs_no_repair() {
    let good = serde_json::to_string(&canned("fig2").unwrap().plan).unwrap();
    let (r, calls) = run_loop(vec![good], 2);
    assert_eq!(r.attempts_used, 0);
    assert!(!r.is_placeholder());
    assert_eq!(calls, 1);
}

#[test]
fn repaired_on_first_attempt() {
    let good = serde_json::to_string(&canned("fig2").unwrap().plan).unwrap();
    let (r, calls) = run_loop(vec![invalid_plan_text(), good], 2);
    assert_eq!(r.attempts_used, 1);
    assert!(!r.is_placeholder());
    assert_eq!(calls, 2);
}

#[test]
fn exhaustion_yields_placeholder() {
    let (r, calls) = run_loop(vec![invalid_plan_text(), invalid_plan_text(), "no plan here".into()], 2);
    assert!(r.is_placeholder());
    assert_eq!(r.attempts_used, 2);
    assert_eq!(calls, 3);
    assert!(!r.diagnostics.is_empty());
}

#[test]
fn transport_failure_costs_an_attempt() {
    let (r, calls) = run_loop(vec![invalid_plan_text(), invalid_plan_text()], 2);
    assert!(r.is_placeholder());
    assert_eq!(calls, 3);
    let (r, calls) = run_loop(vec![invalid_plan_text()], 0);
    assert!(r.is_placeholder());
    assert_eq!(calls, 1);
}

#[test]
fn repair_prompt_quotes_diagnostics() {
    let spec = petstore();
    let hlmt = canned("fig2").unwrap().hlmt;
    let client = ScriptedClient::from_texts([invalid_plan_text()]);
    let cfg = AgentConfig::default();
    let templates = PromptTemplates::default();
    let agent = Agent::new(&client, &cfg, &templates);
    let c = ctx(&spec);
    let draft = draft_emt(agent, &hlmt, &c);
    repair_emt_loop(agent, draft, &hlmt, &spec, &c, RepairBudget::new(1));
    let prompts = client.prompts();
    assert!(prompts[1].contains("unknown operation PATCH /pet/{petId}"));
    assert!(prompts[1].contains(hlmt.then_text()));
}
