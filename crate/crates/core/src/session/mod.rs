//! The test manager: drives generate, refine, lower, validate and execute
//! iterations under coverage, plateau, request and time bounds.

mod clock;
mod config;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::{
    draft_emt, generate_hlmts, refine_hlmts, repair_emt_loop, Agent, AgentClients, AgentRole, PromptContext,
    PromptTemplates, RepairBudget,
};
use crate::apispec::{ApiSpecification, OperationKey};
use crate::executor::{execute_scenario, ExecutionContext, ScenarioResult};
use crate::mt::{validate_hlmt, Hlmt};
use crate::plan::EmtPlan;
use crate::report::{build_report, summarize_iteration, IterationSummary, SessionOutcome};

pub use clock::{Clock, SimulatedClock, SystemClock};
pub use config::{FatalConfigError, SessionConfig};

/// How a progress-free iteration is recognized.
pub const PLATEAU_RULE: &str = "no new semantic slug and no coverage gain";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    TimeBudget,
    RequestBudget,
    CoverageTarget,
    Plateau,
    NoNewTests,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::TimeBudget => "time-budget",
            StopReason::RequestBudget => "request-budget",
            StopReason::CoverageTarget => "coverage-target",
            StopReason::Plateau => "plateau",
            StopReason::NoNewTests => "no-new-tests",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop(StopReason),
}

#[derive(Debug, Clone)]
pub struct SessionState {
    pub iteration_index: u32,
    pub all_hlmts: Vec<Hlmt>,
    pub covered_operations: BTreeSet<OperationKey>,
    pub operation_count: usize,
    pub requests_spent: u64,
    pub plateau_counter: u32,
    /// Clock reading when the session started.
    pub started_at: std::time::Duration,
    pub iteration_summaries: Vec<IterationSummary>,
    pub known_slugs: BTreeSet<String>,
}

impl SessionState {
    pub fn new(spec: &ApiSpecification, started_at: std::time::Duration) -> Self {
        Self {
            iteration_index: 0,
            all_hlmts: Vec::new(),
            covered_operations: BTreeSet::new(),
            operation_count: spec.operation_count(),
            requests_spent: 0,
            plateau_counter: 0,
            started_at,
            iteration_summaries: Vec::new(),
            known_slugs: BTreeSet::new(),
        }
    }

    pub fn coverage_percent(&self) -> f64 {
        if self.operation_count == 0 {
            return 0.0;
        }
        self.covered_operations.len() as f64 / self.operation_count as f64 * 100.0
    }

    /// Plateau accounting for one finished iteration.
    pub fn record_progress(&mut self, new_slugs: usize, coverage_gain: usize) {
        if new_slugs > 0 || coverage_gain > 0 {
            self.plateau_counter = 0;
        } else {
            self.plateau_counter += 1;
        }
    }
}

/// Stop criteria in fixed priority order: time, requests, coverage, plateau.
pub fn should_stop(state: &SessionState, config: &SessionConfig, now: std::time::Duration) -> StopDecision {
    if now.saturating_sub(state.started_at) >= config.time_budget {
        StopDecision::Stop(StopReason::TimeBudget)
    } else if state.requests_spent >= config.request_budget {
        StopDecision::Stop(StopReason::RequestBudget)
    } else if state.coverage_percent() >= config.target_coverage {
        StopDecision::Stop(StopReason::CoverageTarget)
    } else if state.plateau_counter >= config.plateau_window {
        StopDecision::Stop(StopReason::Plateau)
    } else {
        StopDecision::Continue
    }
}

/// Adds every documented operation issued by `results` to the covered set and
/// returns the newly covered ones.
pub fn update_coverage(
    state: &mut SessionState,
    results: &[ScenarioResult],
    spec: &ApiSpecification,
) -> Vec<OperationKey> {
    let mut added = Vec::new();
    for result in results.iter().filter(|r| !r.is_placeholder()) {
        for entry in result.sequence.entries() {
            let Some(key) = entry.operation_key() else {
                continue;
            };
            if spec.operation(key.method, &key.path).is_some() && state.covered_operations.insert(key.clone()) {
                added.push(key);
            }
        }
    }
    added
}

type ScenarioHook = Box<dyn Fn(&EmtPlan) + Send + Sync>;

/// Everything besides the spec, config and clients that shapes a session.
pub struct SessionOptions {
    pub session_id: String,
    pub templates: PromptTemplates,
    pub static_headers: Vec<(String, String)>,
    pub clock: Arc<dyn Clock>,
    /// Runs before each scenario executes, e.g. to reset a test fixture.
    pub before_scenario: Option<ScenarioHook>,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            session_id: default_session_id(),
            templates: PromptTemplates::default(),
            static_headers: Vec::new(),
            clock: Arc::new(SystemClock::new()),
            before_scenario: None,
        }
    }
}

impl SessionOptions {
    pub fn with_session_id(mut self, id: impl Into<String>) -> Self {
        self.session_id = id.into();
        self
    }

    pub fn before_each(mut self, hook: impl Fn(&EmtPlan) + Send + Sync + 'static) -> Self {
        self.before_scenario = Some(Box::new(hook));
        self
    }
}

pub fn default_session_id() -> String {
    format!("session-{}", chrono::Utc::now().format("%Y%m%dT%H%M%S"))
}

/// One executed scenario with everything that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub iteration: u32,
    pub hlmt: Hlmt,
    pub plan: EmtPlan,
    pub result: ScenarioResult,
}

/// Runs iterations until a stop criterion fires. Runtime trouble (model
/// failures, unreachable service) is recorded, not raised.
pub fn run_session(
    spec: &ApiSpecification,
    base_url: &str,
    config: &SessionConfig,
    clients: &AgentClients,
    options: &SessionOptions,
) -> Result<SessionOutcome, FatalConfigError> {
    config.validate()?;
    if spec.operation_count() == 0 {
        return Err(FatalConfigError("the specification documents no operations".into()));
    }
    let clock = options.clock.as_ref();
    let mut state = SessionState::new(spec, clock.now());
    let exec = ExecutionContext::new(spec, base_url, config.per_request_timeout)
        .with_headers(options.static_headers.clone());
    let agent_cfgs: Vec<_> = AgentRole::ALL.iter().map(|r| config.agent_config(*r)).collect();
    let agent = |role: AgentRole| Agent::new(clients.get(role), &agent_cfgs[role as usize], &options.templates);

    let mut per_iteration_hlmts: Vec<(u32, Vec<Hlmt>)> = Vec::new();
    let mut records: Vec<ScenarioRecord> = Vec::new();

    let stop_reason = loop {
        let iteration = state.iteration_index + 1;
        let ctx = PromptContext {
            openapi_spec: spec.raw_text.clone(),
            no_tests: config.batch_bound,
            base_url: base_url.to_string(),
            prev_tests: state.all_hlmts.clone(),
            uncovered_operations: spec
                .operation_keys()
                .filter(|k| !state.covered_operations.contains(k))
                .collect(),
            extras: Default::default(),
        };

        let candidates = match generate_hlmts(agent(AgentRole::MrGenerator), &ctx, config.batch_bound) {
            Ok(g) => g.hlmts,
            Err(e) => {
                log::warn!("iteration {iteration}: generation failed: {e}");
                Vec::new()
            }
        };
        if candidates.is_empty() {
            state.record_progress(0, 0);
            break match should_stop(&state, config, clock.now()) {
                StopDecision::Stop(reason) => reason,
                StopDecision::Continue => StopReason::NoNewTests,
            };
        }
        state.iteration_index = iteration;

        let refined = refine_hlmts(agent(AgentRole::MrRefiner), spec, &candidates, &ctx);
        for d in &refined.diagnostics {
            log::info!("iteration {iteration}: {d}");
        }
        let mut accepted: Vec<Hlmt> = Vec::new();
        for hlmt in refined.hlmts {
            let diags = validate_hlmt(&hlmt, &accepted);
            if diags.is_empty() {
                accepted.push(hlmt.with_iteration(iteration));
            } else {
                for d in diags {
                    log::warn!("iteration {iteration}: dropped {}: {d}", hlmt.id());
                }
            }
        }

        let mut plans = Vec::with_capacity(accepted.len());
        for hlmt in &accepted {
            let draft = draft_emt(agent(AgentRole::TestGenerator), hlmt, &ctx);
            let repaired = repair_emt_loop(
                agent(AgentRole::CodeRefiner),
                draft,
                hlmt,
                spec,
                &ctx,
                RepairBudget::new(config.repair_max_attempts),
            );
            let mut plan = repaired.plan;
            plan.hlmt_id = hlmt.id().to_string();
            plans.push(plan);
        }

        let mut results = Vec::with_capacity(plans.len());
        for plan in &plans {
            if let Some(hook) = &options.before_scenario {
                hook(plan);
            }
            let remaining = config.request_budget.saturating_sub(state.requests_spent);
            let result = execute_scenario(plan, &exec, remaining);
            state.requests_spent += result.requests_spent;
            log::info!("{} {}", result.hlmt_id, result.verdict);
            results.push(result);
        }

        let newly_covered = update_coverage(&mut state, &results, spec);
        let mut new_slugs = 0;
        for (hlmt, result) in accepted.iter().zip(&results) {
            if !result.is_placeholder() && state.known_slugs.insert(hlmt.semantic_slug().to_string()) {
                new_slugs += 1;
            }
        }
        state.record_progress(new_slugs, newly_covered.len());

        let mut summary = summarize_iteration(&results, &accepted);
        summary.iteration = iteration;
        summary.coverage_percent = state.coverage_percent();
        summary.newly_covered = newly_covered;
        summary.requests_spent = results.iter().map(|r| r.requests_spent).sum();
        summary.new_slugs = new_slugs;
        summary.plateau_counter = state.plateau_counter;
        summary.elapsed_secs = clock.now().saturating_sub(state.started_at).as_secs_f64();
        state.iteration_summaries.push(summary);

        for ((hlmt, plan), result) in accepted.iter().zip(plans).zip(results) {
            records.push(ScenarioRecord {
                iteration,
                hlmt: hlmt.clone(),
                plan,
                result,
            });
        }
        state.all_hlmts.extend(accepted.iter().cloned());
        per_iteration_hlmts.push((iteration, accepted));

        if let StopDecision::Stop(reason) = should_stop(&state, config, clock.now()) {
            break reason;
        }
    };

    let elapsed = clock.now().saturating_sub(state.started_at);
    Ok(build_report(
        &options.session_id,
        config,
        &state,
        stop_reason,
        elapsed,
        per_iteration_hlmts,
        records,
    ))
}

/// Executes stored plans without any generation.
pub fn replay_plans(
    plans: &[EmtPlan],
    spec: &ApiSpecification,
    base_url: &str,
    config: &SessionConfig,
    static_headers: Vec<(String, String)>,
    before_scenario: Option<&dyn Fn(&EmtPlan)>,
) -> Vec<ScenarioResult> {
    let exec = ExecutionContext::new(spec, base_url, config.per_request_timeout).with_headers(static_headers);
    let mut spent = 0;
    plans
        .iter()
        .map(|plan| {
            if let Some(hook) = before_scenario {
                hook(plan);
            }
            let r = execute_scenario(plan, &exec, config.request_budget.saturating_sub(spent));
            spent += r.requests_spent;
            r
        })
        .collect()
}

#[cfg(test)]
mod tests;
