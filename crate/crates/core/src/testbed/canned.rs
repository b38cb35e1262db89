//! Worked-example scenarios paired with the fault that should break each one.

use serde::Deserialize;

use super::Fault;
use crate::agents::{render_hlmts, ScriptedResponse};
use crate::executor::FailureKind;
use crate::mt::Hlmt;
use crate::plan::EmtPlan;

const SOURCES: [(&str, &str); 5] = [
    ("fig2", include_str!("../../fixtures/scenarios/fig2.json")),
    ("missing_name", include_str!("../../fixtures/scenarios/missing_name.json")),
    ("repeat_login", include_str!("../../fixtures/scenarios/repeat_login.json")),
    ("delete_recreate", include_str!("../../fixtures/scenarios/delete_recreate.json")),
    ("inventory", include_str!("../../fixtures/scenarios/inventory.json")),
];

#[derive(Debug, Clone, Deserialize)]
pub struct CannedScenario {
    pub name: String,
    /// The single fault that must flip this scenario.
    pub fault: Fault,
    pub expected_failure: FailureKind,
    pub hlmt: Hlmt,
    pub plan: EmtPlan,
}

pub fn canned_scenarios() -> Vec<CannedScenario> {
    SOURCES
        .iter()
        .map(|(name, text)| serde_json::from_str(text).unwrap_or_else(|e| panic!("fixture {name}: {e}")))
        .collect()
}

pub fn canned(name: &str) -> Option<CannedScenario> {
    canned_scenarios().into_iter().find(|c| c.name == name)
}

/// Responses for one iteration in call order: the generated array, the
/// refiner's echo of it, then one plan per scenario.
pub fn scripted_iteration(scenarios: &[CannedScenario]) -> Vec<ScriptedResponse> {
    let hlmts: Vec<Hlmt> = scenarios.iter().map(|s| s.hlmt.clone()).collect();
    let array = render_hlmts(&hlmts);
    let mut out = vec![ScriptedResponse::Text(array.clone()), ScriptedResponse::Text(array)];
    out.extend(
        scenarios
            .iter()
            .map(|s| ScriptedResponse::Text(serde_json::to_string_pretty(&s.plan).expect("plan serializes"))),
    );
    out
}
