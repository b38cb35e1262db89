use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;

use super::prompts::{render_hlmts, PromptContext, PromptTemplates, TemplateName};
use super::{AgentConfig, AgentError, CompletionRequest, LlmClient};
use crate::apispec::{ApiSpecification, HttpMethod};
use crate::diagnostic::Diagnostic;
use crate::mt::{parse_hlmt_list, Hlmt};
use crate::plan::{make_placeholder, parse_plan_output, validate_plan, EmtPlan};

/// A client bound to its role configuration and the prompt templates.
#[derive(Clone, Copy)]
pub struct Agent<'a> {
    pub client: &'a dyn LlmClient,
    pub config: &'a AgentConfig,
    pub templates: &'a PromptTemplates,
}

impl<'a> Agent<'a> {
    pub fn new(client: &'a dyn LlmClient, config: &'a AgentConfig, templates: &'a PromptTemplates) -> Self {
        Self {
            client,
            config,
            templates,
        }
    }

    fn ask(&self, template: TemplateName, ctx: &PromptContext) -> Result<String, AgentError> {
        let prompt = self.templates.render(template, ctx)?;
        let request = CompletionRequest {
            config: self.config,
            prompt: &prompt,
        };
        Ok(self.client.complete(&request)?)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Generated {
    pub hlmts: Vec<Hlmt>,
    /// Array items that were not usable scenarios.
    pub dropped: Vec<Diagnostic>,
    /// Candidates cut off by the batch bound.
    pub truncated: usize,
}

/// Asks the MR generator for at most `batch_bound` new scenarios. An empty
/// array is a normal result; output without any array is `NoArrayFound`.
pub fn generate_hlmts(agent: Agent<'_>, ctx: &PromptContext, batch_bound: usize) -> Result<Generated, AgentError> {
    let raw = agent.ask(TemplateName::MrGenerate, ctx)?;
    let parsed = parse_hlmt_list(&raw)?;
    let mut hlmts = parsed.hlmts;
    let truncated = hlmts.len().saturating_sub(batch_bound);
    if truncated > 0 {
        log::info!("generator returned {} candidates; keeping the first {batch_bound}", hlmts.len());
        hlmts.truncate(batch_bound);
    }
    for d in &parsed.dropped {
        log::warn!("dropped candidate: {d}");
    }
    Ok(Generated {
        hlmts,
        dropped: parsed.dropped,
        truncated,
    })
}

fn mention_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| {
        Regex::new(r#"\b(GET|POST|PUT|PATCH|DELETE|HEAD|OPTIONS)\s+(/[^\s,;"'`()\[\]<>]*)"#).expect("mention pattern")
    })
}

/// `METHOD /path` mentions in free text, in order of appearance.
pub fn mentioned_operations(text: &str) -> Vec<(HttpMethod, String)> {
    mention_pattern()
        .captures_iter(text)
        .filter_map(|c| {
            let method = c[1].parse().ok()?;
            let path = c[2].trim_end_matches(['.', ':', '!']).to_string();
            Some((method, path))
        })
        .collect()
}

fn unknown_mentions(hlmt: &Hlmt, spec: &ApiSpecification) -> Vec<String> {
    let text = format!("{}\n{}\n{}\n{}", hlmt.scenario_title(), hlmt.given_text(), hlmt.when_text(), hlmt.then_text());
    mentioned_operations(&text)
        .into_iter()
        // An ambiguous match still names a documented operation.
        .filter(|(m, p)| matches!(spec.locate(*m, p), Ok(None)))
        .map(|(m, p)| format!("{m} {p}"))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct Refined {
    pub hlmts: Vec<Hlmt>,
    pub diagnostics: Vec<Diagnostic>,
    /// The refiner was unusable and only the local filter ran.
    pub degraded: bool,
}

/// Runs the MR refiner, then the local filter. The model may drop or reword
/// candidates but never add new ones; the local filter then removes every
/// survivor that names an operation the document does not define.
pub fn refine_hlmts(
    agent: Agent<'_>,
    spec: &ApiSpecification,
    candidates: &[Hlmt],
    ctx: &PromptContext,
) -> Refined {
    let mut out = Refined::default();
    let ctx = ctx.clone().with_extra("candidates", render_hlmts(candidates));
    let reply = agent
        .ask(TemplateName::MrRefine, &ctx)
        .and_then(|raw| parse_hlmt_list(&raw).map_err(AgentError::from));
    let survivors: Vec<Hlmt> = match reply {
        Err(e) => {
            log::warn!("refiner unavailable, local filter only: {e}");
            out.degraded = true;
            out.diagnostics.push(Diagnostic::new("refine", format!("degraded: {e}")));
            candidates.to_vec()
        }
        Ok(parsed) => {
            let mut taken = BTreeSet::new();
            let mut kept = Vec::new();
            for item in parsed.hlmts {
                let Some(source) = candidates.iter().find(|c| c.id() == item.id()) else {
                    out.diagnostics.push(Diagnostic::new(
                        item.id(),
                        "refiner returned an id that is not a candidate; ignored",
                    ));
                    continue;
                };
                if !taken.insert(source.id().to_string()) {
                    continue;
                }
                kept.push(
                    Hlmt::new(
                        source.id(),
                        item.scenario_title(),
                        item.given_text(),
                        item.when_text(),
                        item.then_text(),
                    )
                    .with_iteration(source.iteration_index()),
                );
            }
            for c in candidates.iter().filter(|c| !taken.contains(c.id())) {
                out.diagnostics.push(Diagnostic::new(c.id(), "dropped by refiner"));
            }
            kept
        }
    };
    for hlmt in survivors {
        let unknown = unknown_mentions(&hlmt, spec);
        if unknown.is_empty() {
            out.hlmts.push(hlmt);
        } else {
            out.diagnostics.push(Diagnostic::new(
                hlmt.id(),
                format!("references undocumented operation {}", unknown.join(", ")),
            ));
        }
    }
    out
}

fn emt_context(ctx: &PromptContext, hlmt: &Hlmt) -> PromptContext {
    ctx.clone()
        .with_extra("hlmt_id", hlmt.id())
        .with_extra("scenario", hlmt.scenario_title())
        .with_extra("given", hlmt.given_text())
        .with_extra("when", hlmt.when_text())
        .with_extra("then", hlmt.then_text())
}

/// The test generator's first answer, kept with its raw text so a repair
/// prompt can quote it.
#[derive(Debug, Clone)]
pub enum PlanDraft {
    Parsed { plan: EmtPlan, raw: String },
    Unparsed { raw: String, diagnostics: Vec<Diagnostic> },
}

pub fn draft_emt(agent: Agent<'_>, hlmt: &Hlmt, ctx: &PromptContext) -> PlanDraft {
    let raw = match agent.ask(TemplateName::EmtGenerate, &emt_context(ctx, hlmt)) {
        Ok(raw) => raw,
        Err(e) => {
            return PlanDraft::Unparsed {
                raw: String::new(),
                diagnostics: vec![Diagnostic::new("llm", e.to_string())],
            }
        }
    };
    match parse_plan_output(&raw, hlmt) {
        Ok(plan) => PlanDraft::Parsed { plan, raw },
        Err(e) => PlanDraft::Unparsed {
            raw,
            diagnostics: e.diagnostics(),
        },
    }
}

/// Lowers one scenario into a plan whose labels reproduce the scenario texts.
pub fn generate_emt(agent: Agent<'_>, hlmt: &Hlmt, ctx: &PromptContext) -> Result<EmtPlan, AgentError> {
    let raw = agent.ask(TemplateName::EmtGenerate, &emt_context(ctx, hlmt))?;
    Ok(parse_plan_output(&raw, hlmt)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RepairBudget {
    pub max_attempts: u32,
    pub attempts_used: u32,
}

impl RepairBudget {
    pub fn new(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            attempts_used: 0,
        }
    }

    pub fn remaining(&self) -> u32 {
        self.max_attempts - self.attempts_used
    }

    fn try_consume(&mut self) -> bool {
        if self.attempts_used < self.max_attempts {
            self.attempts_used += 1;
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone)]
pub struct Repaired {
    pub plan: EmtPlan,
    pub attempts_used: u32,
    /// Diagnostics of the last rejected attempt; empty when the plan is valid.
    pub diagnostics: Vec<Diagnostic>,
}

impl Repaired {
    pub fn is_placeholder(&self) -> bool {
        self.plan.placeholder
    }
}

fn diagnostic_lines(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| format!("- {d}")).collect::<Vec<_>>().join("\n")
}

/// Validates the draft and, while it is rejected and attempts remain, asks
/// the code refiner for a corrected plan. Exhaustion yields the scenario's
/// placeholder plan. At most `budget.max_attempts` repair calls are made.
pub fn repair_emt_loop(
    agent: Agent<'_>,
    draft: PlanDraft,
    hlmt: &Hlmt,
    spec: &ApiSpecification,
    ctx: &PromptContext,
    mut budget: RepairBudget,
) -> Repaired {
    let (mut raw, mut diagnostics) = match draft {
        PlanDraft::Parsed { plan, raw } => {
            let diags = validate_plan(&plan, spec);
            if diags.is_empty() {
                return Repaired {
                    plan,
                    attempts_used: budget.attempts_used,
                    diagnostics: Vec::new(),
                };
            }
            (raw, diags)
        }
        PlanDraft::Unparsed { raw, diagnostics } => (raw, diagnostics),
    };
    let base = emt_context(ctx, hlmt);
    while budget.try_consume() {
        let ctx = base
            .clone()
            .with_extra("previous_output", raw.clone())
            .with_extra("diagnostics", diagnostic_lines(&diagnostics));
        match agent.ask(TemplateName::EmtRepair, &ctx) {
            Err(e) => diagnostics = vec![Diagnostic::new("llm", e.to_string())],
            Ok(out) => {
                match parse_plan_output(&out, hlmt) {
                    Err(e) => diagnostics = e.diagnostics(),
                    Ok(plan) => {
                        let diags = validate_plan(&plan, spec);
                        if diags.is_empty() {
                            return Repaired {
                                plan,
                                attempts_used: budget.attempts_used,
                                diagnostics: Vec::new(),
                            };
                        }
                        diagnostics = diags;
                    }
                }
                raw = out;
            }
        }
    }
    log::warn!("{}: repair attempts exhausted; using placeholder plan", hlmt.id());
    Repaired {
        plan: make_placeholder(hlmt),
        attempts_used: budget.attempts_used,
        diagnostics,
    }
}

#[cfg(test)]
mod tests;
