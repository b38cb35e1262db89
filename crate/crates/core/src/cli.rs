//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 specification or artifact
//! error, 4 findings present when `--fail-on-findings` is given.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::agents::{AgentClients, HttpChatClient, LlmClient, ScriptedClient, API_KEY_ENV};
use crate::apispec::{parse_spec, ApiSpecification, FormatHint};
use crate::bundled;
use crate::executor::Verdict;
use crate::plan::{validate_plan, EmtPlan};
use crate::report::{diff_sequences, load_annotations, load_sequence_set, persist_session};
use crate::session::{default_session_id, replay_plans, run_session, SessionConfig, SessionOptions};
use crate::testbed::{start_testbed, Fault, FaultProfile, TestbedHandle};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SPEC: i32 = 3;
pub const EXIT_FINDINGS: i32 = 4;

const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

#[derive(Debug, Parser)]
#[command(name = "metarest", version, about = "Metamorphic testing for REST APIs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a generation and execution session.
    Run(RunArgs),
    /// Parse a document and list its operations.
    ValidateSpec {
        /// Path, or bundled:petstore | bundled:usermanagement | bundled:testbed.
        spec: String,
    },
    /// Execute stored plans without generating anything.
    Replay(ReplayArgs),
    /// Print sequences present in OURS but not in THEIRS.
    DiffSeq { ours: PathBuf, theirs: PathBuf },
}

#[derive(Debug, Args)]
pub struct Target {
    /// Path, or bundled:petstore | bundled:usermanagement | bundled:testbed.
    #[arg(long)]
    pub spec: String,
    /// Service root. Defaults to the document's server URL.
    #[arg(long)]
    pub base_url: Option<String>,
    /// Start the in-process pet store with the given fault (or `none`) and
    /// test it instead of an external service.
    #[arg(long, value_name = "FAULT")]
    pub testbed: Option<String>,
    /// Extra request header, `Name: value`. Repeatable.
    #[arg(long = "header", value_name = "HEADER")]
    pub headers: Vec<String>,
    /// Per-request timeout in seconds; overrides the config file.
    #[arg(long)]
    pub timeout: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub target: Target,
    /// JSON session config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Artifacts go to OUT/<session id>.
    #[arg(long, default_value = "metarest-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub session_id: Option<String>,
    /// `http` for a chat-completions endpoint, or `scripted:<dir>` to replay
    /// canned model responses.
    #[arg(long, default_value = "http")]
    pub llm: String,
    #[arg(long, default_value = DEFAULT_ENDPOINT)]
    pub llm_endpoint: String,
    /// Model id for every agent role.
    #[arg(long)]
    pub model: Option<String>,
    /// Directory with prompt template overrides.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Labels for failed scenarios, joined into the report.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub fail_on_findings: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub target: Target,
    /// A plan file or a directory of them (e.g. a session's plans/).
    #[arg(long)]
    pub plans: PathBuf,
    /// Write results.jsonl here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub fail_on_findings: bool,
}

#[derive(Debug)]
struct Failure(i32, String);

fn config_err(m: impl Into<String>) -> Failure {
    Failure(EXIT_CONFIG, m.into())
}

fn spec_err(m: impl Into<String>) -> Failure {
    Failure(EXIT_SPEC, m.into())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(Failure(code, message)) => {
            eprintln!("error: {message}");
            code
        }
    }
}

fn dispatch(command: Command) -> Result<i32, Failure> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::ValidateSpec { spec } => cmd_validate(&spec),
        Command::Replay(args) => cmd_replay(args),
        Command::DiffSeq { ours, theirs } => cmd_diff(&ours, &theirs),
    }
}

pub fn load_spec(source: &str) -> Result<ApiSpecification, String> {
    let text = match source.strip_prefix("bundled:") {
        Some("petstore") => bundled::PETSTORE.to_string(),
        Some("usermanagement") => bundled::USER_MANAGEMENT.to_string(),
        Some("testbed") => bundled::TESTBED.to_string(),
        Some(other) => return Err(format!("no bundled document named {other:?}")),
        None => std::fs::read_to_string(source).map_err(|e| format!("{source}: {e}"))?,
    };
    parse_spec(&text, FormatHint::Auto).map_err(|e| format!("{source}: {e}"))
}

fn parse_header(h: &str) -> Result<(String, String), Failure> {
    let (name, value) = h
        .split_once(':')
        .ok_or_else(|| config_err(format!("header {h:?} is not `Name: value`")))?;
    if name.trim().is_empty() {
        return Err(config_err(format!("header {h:?} has no name")));
    }
    Ok((name.trim().to_string(), value.trim().to_string()))
}

struct Resolved {
    spec: ApiSpecification,
    base_url: String,
    headers: Vec<(String, String)>,
    testbed: Option<Arc<TestbedHandle>>,
}

fn resolve_target(t: &Target) -> Result<Resolved, Failure> {
    let spec = load_spec(&t.spec).map_err(spec_err)?;
    let headers = t.headers.iter().map(|h| parse_header(h)).collect::<Result<Vec<_>, _>>()?;
    let testbed = match t.testbed.as_deref() {
        None => None,
        Some(name) => {
            let profile = if name == "none" {
                FaultProfile::none()
            } else {
                FaultProfile::single(name.parse::<Fault>().map_err(config_err)?)
            };
            let handle = start_testbed(profile).map_err(|e| config_err(e.to_string()))?;
            Some(Arc::new(handle))
        }
    };
    let base_url = match (&testbed, &t.base_url, &spec.base_url) {
        (Some(tb), _, _) => tb.base_url().to_string(),
        (None, Some(u), _) => u.clone(),
        (None, None, Some(u)) => u.clone(),
        (None, None, None) => return Err(config_err("no --base-url given and the document names no server")),
    };
    url::Url::parse(&base_url).map_err(|e| config_err(format!("base url {base_url:?}: {e}")))?;
    Ok(Resolved {
        spec,
        base_url,
        headers,
        testbed,
    })
}

fn apply_timeout(cfg: &mut SessionConfig, timeout: Option<f64>) -> Result<(), Failure> {
    if let Some(t) = timeout {
        cfg.per_request_timeout =
            Duration::try_from_secs_f64(t).map_err(|e| config_err(format!("--timeout: {e}")))?;
    }
    cfg.validate().map_err(|e| config_err(e.to_string()))
}

fn llm_client(args: &RunArgs) -> Result<Arc<dyn LlmClient>, Failure> {
    if let Some(dir) = args.llm.strip_prefix("scripted:") {
        let client = ScriptedClient::from_dir(Path::new(dir)).map_err(|e| config_err(format!("{dir}: {e}")))?;
        return Ok(Arc::new(client));
    }
    if args.llm != "http" {
        return Err(config_err(format!("--llm must be `http` or `scripted:<dir>`, got {:?}", args.llm)));
    }
    if std::env::var(API_KEY_ENV).map_or(true, |k| k.is_empty()) {
        log::warn!("{API_KEY_ENV} is not set; requests to the model endpoint carry no credentials");
    }
    Ok(Arc::new(HttpChatClient::new(args.llm_endpoint.clone(), Duration::from_secs(120))))
}

fn cmd_run(args: RunArgs) -> Result<i32, Failure> {
    let mut cfg = match &args.config {
        Some(p) => SessionConfig::load(p).map_err(|e| config_err(e.to_string()))?,
        None => SessionConfig::default(),
    };
    if let Some(model) = &args.model {
        cfg.update_agents(|a| a.model_id = model.clone());
    }
    apply_timeout(&mut cfg, args.target.timeout)?;
    let target = resolve_target(&args.target)?;
    let clients = AgentClients::shared(llm_client(&args)?);

    let mut options = SessionOptions {
        session_id: args.session_id.clone().unwrap_or_else(default_session_id),
        static_headers: target.headers.clone(),
        ..SessionOptions::default()
    };
    if let Some(dir) = &args.templates {
        options.templates = crate::agents::PromptTemplates::from_dir(dir)
            .map_err(|e| config_err(format!("{}: {e}", dir.display())))?;
    }
    if let Some(tb) = &target.testbed {
        let tb = tb.clone();
        options = options.before_each(move |_| tb.reset());
    }

    let mut outcome = run_session(&target.spec, &target.base_url, &cfg, &clients, &options)
        .map_err(|e| config_err(e.to_string()))?;
    if let Some(p) = &args.annotations {
        let labels = load_annotations(p).map_err(|e| spec_err(e.to_string()))?;
        outcome.annotate(&labels);
    }
    let dir = args.out.join(&outcome.report.session_id);
    persist_session(&outcome, &dir).map_err(|e| spec_err(e.to_string()))?;

    let t = &outcome.report.totals;
    println!(
        "session {}: {} iterations, {} HLMTs, {} EMTs ({} passed, {} failed), {} placeholders, coverage {:.1}%, {} requests, stopped by {}",
        outcome.report.session_id,
        outcome.report.iterations.len(),
        t.hlmt_count,
        t.emt_count,
        t.passed,
        t.failed,
        t.placeholders,
        t.coverage_percent,
        t.requests_spent,
        outcome.report.stop_reason
    );
    println!("artifacts in {}", dir.display());
    Ok(if args.fail_on_findings && t.failed > 0 { EXIT_FINDINGS } else { EXIT_OK })
}

fn cmd_validate(source: &str) -> Result<i32, Failure> {
    let spec = load_spec(source).map_err(spec_err)?;
    // Write errors (e.g. a closed pipe) are not worth a panic.
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{} {} ({:?}): {} operations", spec.title, spec.version, spec.format, spec.operation_count());
    for key in spec.operation_keys() {
        let _ = writeln!(out, "  {key}");
    }
    Ok(EXIT_OK)
}

fn read_plans(path: &Path) -> Result<Vec<(String, EmtPlan)>, Failure> {
    let mut files = if path.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| spec_err(format!("{}: {e}", path.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(spec_err(format!("no plan files in {}", path.display())));
    }
    files
        .drain(..)
        .map(|p| {
            let text = std::fs::read_to_string(&p).map_err(|e| spec_err(format!("{}: {e}", p.display())))?;
            let plan: EmtPlan =
                serde_json::from_str(&text).map_err(|e| spec_err(format!("{}: {e}", p.display())))?;
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((name, plan))
        })
        .collect()
}

fn cmd_replay(args: ReplayArgs) -> Result<i32, Failure> {
    let mut cfg = SessionConfig::default();
    apply_timeout(&mut cfg, args.target.timeout)?;
    let target = resolve_target(&args.target)?;
    let plans = read_plans(&args.plans)?;
    for (name, plan) in &plans {
        if !plan.placeholder {
            let diags = validate_plan(plan, &target.spec);
            if !diags.is_empty() {
                let text: Vec<String> = diags.iter().map(ToString::to_string).collect();
                return Err(spec_err(format!("{name}: {}", text.join("; "))));
            }
        }
    }
    let only_plans: Vec<EmtPlan> = plans.iter().map(|(_, p)| p.clone()).collect();
    let reset = target.testbed.clone().map(|tb| move |_: &EmtPlan| tb.reset());
    let hook = reset.as_ref().map(|f| f as &dyn Fn(&EmtPlan));
    let results = replay_plans(&only_plans, &target.spec, &target.base_url, &cfg, target.headers.clone(), hook);

    let mut failed = 0;
    for ((name, _), r) in plans.iter().zip(&results) {
        if r.verdict == Verdict::Failed {
            failed += 1;
        }
        match &r.failure_class {
            Some(c) => println!("{name} {} {} {}: {}", r.hlmt_id, r.verdict, c.class.as_str(), c.detail),
            None => println!("{name} {} {}", r.hlmt_id, r.verdict),
        }
    }
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out).map_err(|e| spec_err(format!("{}: {e}", out.display())))?;
        let lines: String = results
            .iter()
            .map(|r| serde_json::to_string(&serde_json::to_value(r).expect("result serializes")).expect("json") + "\n")
            .collect();
        let path = out.join("results.jsonl");
        std::fs::write(&path, lines).map_err(|e| spec_err(format!("{}: {e}", path.display())))?;
    }
    Ok(if args.fail_on_findings && failed > 0 { EXIT_FINDINGS } else { EXIT_OK })
}

fn cmd_diff(ours: &Path, theirs: &Path) -> Result<i32, Failure> {
    let a = load_sequence_set(ours).map_err(|e| spec_err(e.to_string()))?;
    let b = load_sequence_set(theirs).map_err(|e| spec_err(e.to_string()))?;
    let only = diff_sequences(&a, &b);
    let mut out = std::io::stdout().lock();
    for s in &only {
        let _ = writeln!(out, "{s}");
    }
    eprintln!("{} of {} sequences not in {}", only.len(), a.len(), theirs.display());
    Ok(EXIT_OK)
}
