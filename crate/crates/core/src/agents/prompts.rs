use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use regex::Regex;
use std::sync::OnceLock;
use thiserror::Error;

use crate::apispec::OperationKey;
use crate::mt::Hlmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemplateName {
    MrGenerate,
    MrRefine,
    EmtGenerate,
    EmtRepair,
}

impl TemplateName {
    pub const ALL: [TemplateName; 4] = [
        TemplateName::MrGenerate,
        TemplateName::MrRefine,
        TemplateName::EmtGenerate,
        TemplateName::EmtRepair,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateName::MrGenerate => "mr_generate",
            TemplateName::MrRefine => "mr_refine",
            TemplateName::EmtGenerate => "emt_generate",
            TemplateName::EmtRepair => "emt_repair",
        }
    }

    fn builtin(self) -> &'static str {
        match self {
            TemplateName::MrGenerate => include_str!("../../templates/mr_generate.txt"),
            TemplateName::MrRefine => include_str!("../../templates/mr_refine.txt"),
            TemplateName::EmtGenerate => include_str!("../../templates/emt_generate.txt"),
            TemplateName::EmtRepair => include_str!("../../templates/emt_repair.txt"),
        }
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateName::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown template {s:?}"))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("template {template} references {{{name}}}, which the context does not provide")]
    MissingPlaceholder { template: TemplateName, name: String },
}

/// Values available to the templates. The five named fields are always
/// present; `extras` carries per-call values such as `candidates`,
/// `previous_output` or `diagnostics`.
#[derive(Debug, Clone, Default)]
pub struct PromptContext {
    pub openapi_spec: String,
    pub no_tests: usize,
    pub base_url: String,
    pub prev_tests: Vec<Hlmt>,
    pub uncovered_operations: Vec<OperationKey>,
    pub extras: BTreeMap<String, String>,
}

impl PromptContext {
    pub fn with_extra(mut self, name: &str, value: impl Into<String>) -> Self {
        self.extras.insert(name.to_string(), value.into());
        self
    }

    fn lookup(&self, name: &str) -> Option<String> {
        Some(match name {
            "openapi_spec" => self.openapi_spec.clone(),
            "no_tests" => self.no_tests.to_string(),
            "base_url" => self.base_url.clone(),
            "prev_tests" => render_hlmts(&self.prev_tests),
            "uncovered_operations" => {
                if self.uncovered_operations.is_empty() {
                    "(none)".to_string()
                } else {
                    self.uncovered_operations
                        .iter()
                        .map(|k| format!("- {k}"))
                        .collect::<Vec<_>>()
                        .join("\n")
                }
            }
            other => return self.extras.get(other).cloned(),
        })
    }
}

/// HLMTs in their persisted wire form.
pub fn render_hlmts(hlmts: &[Hlmt]) -> String {
    let records: Vec<_> = hlmts.iter().map(Hlmt::to_record).collect();
    serde_json::to_string_pretty(&records).unwrap_or_else(|_| "[]".into())
}

/// Built-in templates, optionally overridden file by file from a directory
/// holding `<name>.txt`.
#[derive(Debug, Clone)]
pub struct PromptTemplates {
    texts: BTreeMap<TemplateName, String>,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            texts: TemplateName::ALL
                .into_iter()
                .map(|t| (t, t.builtin().to_string()))
                .collect(),
        }
    }
}

impl PromptTemplates {
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut templates = Self::default();
        for name in TemplateName::ALL {
            let path = dir.join(format!("{name}.txt"));
            if path.is_file() {
                templates.texts.insert(name, fs::read_to_string(path)?);
            }
        }
        Ok(templates)
    }

    pub fn text(&self, name: TemplateName) -> &str {
        &self.texts[&name]
    }

    pub fn render(&self, name: TemplateName, ctx: &PromptContext) -> Result<String, PromptError> {
        render_text(name, self.text(name), ctx)
    }
}

fn slot() -> &'static Regex {
    static SLOT: OnceLock<Regex> = OnceLock::new();
    SLOT.get_or_init(|| Regex::new(r"\{([a-z][a-z0-9_]*)\}").expect("slot pattern"))
}

/// Single-pass substitution of `{lower_snake}` slots. Substituted text is not
/// rescanned, so a spec containing `{petId}` or `{username}` is inserted
/// verbatim.
fn render_text(name: TemplateName, template: &str, ctx: &PromptContext) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let mut last = 0;
    for caps in slot().captures_iter(template) {
        let whole = caps.get(0).expect("match");
        // `${name}` is plan binding syntax, not a slot.
        if template[..whole.start()].ends_with('$') {
            continue;
        }
        let key = &caps[1];
        let value = ctx.lookup(key).ok_or_else(|| PromptError::MissingPlaceholder {
            template: name,
            name: key.to_string(),
        })?;
        out.push_str(&template[last..whole.start()]);
        out.push_str(&value);
        last = whole.end();
    }
    out.push_str(&template[last..]);
    Ok(out)
}

/// Built-in template rendering.
pub fn render_prompt(name: TemplateName, ctx: &PromptContext) -> Result<String, PromptError> {
    render_text(name, name.builtin(), ctx)
}
