use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

use super::AgentConfig;

/// Environment variable holding the provider token.
pub const API_KEY_ENV: &str = "METAREST_API_KEY";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("LLM transport error: {0}")]
    Transport(String),
    #[error("provider returned {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("scripted responses exhausted after {0} calls")]
    ScriptExhausted(usize),
}

pub struct CompletionRequest<'a> {
    pub config: &'a AgentConfig,
    pub prompt: &'a str,
}

/// The model boundary. Implementations must tolerate being shared by the
/// single session driver across the four agent roles.
pub trait LlmClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptedResponse {
    Text(String),
    /// Simulates a provider failure for this call.
    Fail(String),
}

/// Replays canned responses in call order and records every prompt it saw.
#[derive(Debug, Default)]
pub struct ScriptedClient {
    responses: Vec<ScriptedResponse>,
    state: Mutex<ScriptState>,
}

#[derive(Debug, Default)]
struct ScriptState {
    next: usize,
    prompts: Vec<String>,
}

fn leading_number(name: &str) -> Option<u64> {
    let digits: String = name.chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

impl ScriptedClient {
    pub fn new(responses: Vec<ScriptedResponse>) -> Self {
        Self {
            responses,
            state: Mutex::default(),
        }
    }

    pub fn from_texts<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Self {
        Self::new(texts.into_iter().map(|t| ScriptedResponse::Text(t.into())).collect())
    }

    /// Loads numbered response files (`01_generate.txt`, `02_refine.json`,
    /// ...) ordered by their numeric prefix. A file ending in `.err` makes
    /// that call fail with the file's content as the message.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut files: Vec<(u64, String, std::path::PathBuf)> = Vec::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if !path.is_file() {
                continue;
            }
            let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            if let Some(n) = leading_number(&name) {
                files.push((n, name, path));
            }
        }
        files.sort();
        let mut responses = Vec::with_capacity(files.len());
        for (_, name, path) in files {
            let text = fs::read_to_string(&path)?;
            responses.push(if name.ends_with(".err") {
                ScriptedResponse::Fail(text.trim().to_string())
            } else {
                ScriptedResponse::Text(text)
            });
        }
        Ok(Self::new(responses))
    }

    pub fn calls(&self) -> usize {
        self.lock().next
    }

    pub fn remaining(&self) -> usize {
        self.responses.len().saturating_sub(self.calls())
    }

    pub fn prompts(&self) -> Vec<String> {
        self.lock().prompts.clone()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, ScriptState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }
}

impl LlmClient for ScriptedClient {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        let mut state = self.lock();
        state.prompts.push(request.prompt.to_string());
        let index = state.next;
        state.next += 1;
        match self.responses.get(index) {
            Some(ScriptedResponse::Text(t)) => Ok(t.clone()),
            Some(ScriptedResponse::Fail(m)) => Err(LlmError::Transport(m.clone())),
            None => Err(LlmError::ScriptExhausted(index)),
        }
    }
}

/// OpenAI-style chat-completions client.
pub struct HttpChatClient {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    retries: u32,
    backoff: Duration,
}

impl HttpChatClient {
    /// The token is read from [`API_KEY_ENV`]; requests go out without
    /// authorization when it is unset.
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self::with_api_key(endpoint, std::env::var(API_KEY_ENV).ok(), timeout)
    }

    pub fn with_api_key(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Self {
            endpoint: endpoint.into(),
            api_key: api_key.filter(|k| !k.is_empty()),
            agent,
            retries: 2,
            backoff: Duration::from_millis(500),
        }
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn body(request: &CompletionRequest<'_>) -> Value {
        let cfg = request.config;
        let mut body = json!({
            "model": cfg.model_id,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_output_tokens,
        });
        if let Some(seed) = cfg.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    /// One attempt; `Err(true)` marks a retryable failure.
    fn attempt(&self, body: &Value) -> Result<String, (bool, LlmError)> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(e @ ureq::Error::Timeout(_)) => return Err((true, LlmError::Transport(e.to_string()))),
            Err(e) => return Err((false, LlmError::Transport(e.to_string()))),
        };
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| (true, LlmError::Transport(e.to_string())))?;
        if status >= 500 {
            return Err((true, LlmError::Provider { status, body: text }));
        }
        if !(200..300).contains(&status) {
            return Err((false, LlmError::Provider { status, body: text }));
        }
        let parsed: Value =
            serde_json::from_str(&text).map_err(|e| (false, LlmError::Transport(format!("bad provider JSON: {e}"))))?;
        parsed["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| (false, LlmError::Transport("provider reply has no message content".into())))
    }
}

impl LlmClient for HttpChatClient {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        let body = Self::body(request);
        let mut delay = self.backoff;
        let mut tries = 0;
        loop {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((true, e)) if tries < self.retries => {
                    log::warn!("{e}; retrying in {delay:?}");
                    thread::sleep(delay);
                    delay *= 2;
                    tries += 1;
                }
                Err((_, e)) => return Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;

    struct Mock {
        url: String,
        seen: Arc<Mutex<Vec<(Option<String>, Value)>>>,
        _thread: thread::JoinHandle<()>,
    }

    /// Serves `replies` (status, body) in order, then stops.
    fn mock(replies: Vec<(u16, String)>) -> Mock {
        let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", server.server_addr().to_ip().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = seen.clone();
        let handle = thread::spawn(move || {
            for (status, body) in replies {
                let Ok(mut req) = server.recv() else { return };
                let auth = req
                    .headers()
                    .iter()
                    .find(|h| h.field.equiv("Authorization"))
                    .map(|h| h.value.to_string());
                let mut text = String::new();
                let _ = req.as_reader().read_to_string(&mut text);
                log.lock().unwrap().push((auth, serde_json::from_str(&text).unwrap_or(Value::Null)));
                let _ = req.respond(tiny_http::Response::from_string(body).with_status_code(status));
            }
        });
        Mock {
            url,
            seen,
            _thread: handle,
        }
    }

    fn reply(content: &str) -> String {
        json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
    }


    #[test]
    fn retries_server_errors_then_returns_content() {
        let m = mock(vec![(503, "busy".into()), (200, reply("[]"))]);
        let client = HttpChatClient::with_api_key(&m.url, Some("tok".into()), Duration::from_secs(5))
            .with_backoff(Duration::from_millis(1));
        let mut cfg = AgentConfig::default();
        cfg.model_id = "m1".into();
        cfg.seed = Some(7);
        let out = client.complete(&CompletionRequest { config: &cfg, prompt: "hi" }).unwrap();
        assert_eq!(out, "[]");
        let seen = m.seen.lock().unwrap();
        assert_eq!(seen.len(), 2);
        assert_eq!(seen[0].0.as_deref(), Some("Bearer tok"));
        let body = &seen[1].1;
        assert_eq!(body["model"], "m1");
        assert_eq!(body["seed"], 7);
        assert_eq!(body["messages"][0]["content"], "hi");
    }

    #[test]
    fn client_errors_are_not_retried() {
        let m = mock(vec![(401, "nope".into()), (200, reply("late"))]);
        let client = HttpChatClient::with_api_key(&m.url, None, Duration::from_secs(5)).with_backoff(Duration::from_millis(1));
        let cfg = AgentConfig::default();
        let err = client.complete(&CompletionRequest { config: &cfg, prompt: "x" }).unwrap_err();
        assert_eq!(err, LlmError::Provider { status: 401, body: "nope".into() });
        assert_eq!(m.seen.lock().unwrap()[0].0, None);
    }

    #[test]
    fn scripted_directory_order_and_failures() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("10_last.txt"), "c").unwrap();
        fs::write(dir.path().join("2_middle.err"), "provider down\n").unwrap();
        fs::write(dir.path().join("01_first.json"), "a").unwrap();
        fs::write(dir.path().join("notes.md"), "ignored").unwrap();
        let client = ScriptedClient::from_dir(dir.path()).unwrap();
        let cfg = AgentConfig::default();
        let req = CompletionRequest { config: &cfg, prompt: "p" };
        assert_eq!(client.complete(&req).unwrap(), "a");
        assert_eq!(client.complete(&req), Err(LlmError::Transport("provider down".into())));
        assert_eq!(client.complete(&req).unwrap(), "c");
        assert_eq!(client.complete(&req), Err(LlmError::ScriptExhausted(3)));
        assert_eq!(client.prompts().len(), 4);
        assert_eq!(client.remaining(), 0);
    }
}
