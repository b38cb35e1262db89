//! LLM-facing side of the engine: the client boundary, prompt templates and
//! the four agents (MR generator, MR refiner, test generator, code refiner).

mod client;
mod pipeline;
mod prompts;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mt::LenientError;
use crate::plan::PlanParseError;

pub use client::{
    CompletionRequest, HttpChatClient, LlmClient, LlmError, ScriptedClient, ScriptedResponse, API_KEY_ENV,
};
pub use pipeline::{
    draft_emt, generate_emt, generate_hlmts, mentioned_operations, refine_hlmts, repair_emt_loop, Agent,
    Generated, PlanDraft, Refined, RepairBudget, Repaired,
};
pub use prompts::{render_hlmts, render_prompt, PromptContext, PromptError, PromptTemplates, TemplateName};

pub const DEFAULT_MODEL: &str = "gpt-4o";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    MrGenerator,
    MrRefiner,
    TestGenerator,
    CodeRefiner,
}

impl AgentRole {
    pub const ALL: [AgentRole; 4] = [
        AgentRole::MrGenerator,
        AgentRole::MrRefiner,
        AgentRole::TestGenerator,
        AgentRole::CodeRefiner,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::MrGenerator => "mr_generator",
            AgentRole::MrRefiner => "mr_refiner",
            AgentRole::TestGenerator => "test_generator",
            AgentRole::CodeRefiner => "code_refiner",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentRole::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown agent role {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub role_name: String,
    pub model_id: String,
    pub temperature: f64,
    pub seed: Option<i64>,
    pub max_output_tokens: u32,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            role_name: String::new(),
            model_id: DEFAULT_MODEL.to_string(),
            temperature: 0.0,
            seed: None,
            max_output_tokens: 4096,
        }
    }
}

impl AgentConfig {
    pub fn for_role(role: AgentRole) -> Self {
        Self {
            role_name: role.to_string(),
            ..Self::default()
        }
    }
}

/// One client per agent role; all four may share a single client.
#[derive(Clone)]
pub struct AgentClients {
    clients: [Arc<dyn LlmClient>; 4],
}

impl AgentClients {
    pub fn shared(client: Arc<dyn LlmClient>) -> Self {
        Self {
            clients: [client.clone(), client.clone(), client.clone(), client],
        }
    }

    pub fn with_role(mut self, role: AgentRole, client: Arc<dyn LlmClient>) -> Self {
        self.clients[role.index()] = client;
        self
    }

    pub fn get(&self, role: AgentRole) -> &dyn LlmClient {
        self.clients[role.index()].as_ref()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Transport(#[from] LlmError),
    #[error(transparent)]
    NoArrayFound(#[from] LenientError),
    #[error(transparent)]
    Plan(#[from] PlanParseError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}
