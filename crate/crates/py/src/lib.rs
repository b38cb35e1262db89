//! Python bindings. Structured values cross the boundary as plain Python
//! objects (dicts, lists, strings) by way of JSON.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use metarest::agents::{AgentClients, HttpChatClient, LlmClient, ScriptedClient};
use metarest::apispec::FormatHint;
use metarest::executor::{ExecutionContext, Sequence};
use metarest::plan::{check_relation as check, RelationKind};
use metarest::report::{diff_sequences as diff, persist_session};
use metarest::session::{SessionConfig, SessionOptions};
use metarest::testbed::{canned_scenarios as canned, start_testbed, Fault, FaultProfile, TestbedHandle};
use metarest::{bundled, ApiSpecification, EmtPlan};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = if let Ok(s) = obj.extract::<String>() {
        // Strings are taken as JSON text, so both `'{"a": 1}'` and dicts work.
        s
    } else {
        obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?
    };
    serde_json::from_str(&text).map_err(value_err)
}

fn json_value(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(value_err)
}

/// A parsed OpenAPI or Swagger document.
#[pyclass(name = "ApiSpec", frozen)]
struct PyApiSpec {
    inner: ApiSpecification,
}

#[pymethods]
impl PyApiSpec {
    #[getter]
    fn title(&self) -> &str {
        &self.inner.title
    }

    #[getter]
    fn version(&self) -> &str {
        &self.inner.version
    }

    #[getter]
    fn format(&self) -> String {
        self.inner.format.to_string()
    }

    #[getter]
    fn base_url(&self) -> Option<String> {
        self.inner.base_url.clone()
    }

    #[getter]
    fn operation_count(&self) -> usize {
        self.inner.operation_count()
    }

    /// `"METHOD /template"` for every documented operation.
    fn operations(&self) -> Vec<String> {
        self.inner.operation_keys().map(|k| k.to_string()).collect()
    }

    /// The documented operation a concrete request maps to, if any.
    fn resolve(&self, method: &str, path: &str) -> PyResult<Option<String>> {
        let op = self.inner.resolve_operation(method, path).map_err(value_err)?;
        Ok(op.map(|o| o.key().to_string()))
    }

    fn __len__(&self) -> usize {
        self.inner.operation_count()
    }

    fn __repr__(&self) -> String {
        format!("ApiSpec({:?}, {} operations)", self.inner.title, self.inner.operation_count())
    }
}

/// The in-process pet store. `fault` is one of `fault_names()` or None.
#[pyclass(name = "Testbed", frozen)]
struct PyTestbed {
    handle: Arc<TestbedHandle>,
}

#[pymethods]
impl PyTestbed {
    #[new]
    #[pyo3(signature = (fault=None))]
    fn new(fault: Option<&str>) -> PyResult<Self> {
        let profile = match fault {
            None | Some("none") => FaultProfile::none(),
            Some(name) => FaultProfile::single(name.parse::<Fault>().map_err(value_err)?),
        };
        let handle = start_testbed(profile).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(Self {
            handle: Arc::new(handle),
        })
    }

    #[getter]
    fn base_url(&self) -> String {
        self.handle.base_url().to_string()
    }

    fn reset(&self) {
        self.handle.reset();
    }

    /// Templates of the requests served since the last reset.
    fn history(&self) -> Vec<String> {
        self.handle.history().iter().map(ToString::to_string).collect()
    }
}

#[pyfunction]
#[pyo3(signature = (text, hint="auto"))]
fn parse_spec(text: &str, hint: &str) -> PyResult<PyApiSpec> {
    let hint = match hint {
        "auto" => FormatHint::Auto,
        "openapi3" => FormatHint::OpenApi3,
        "swagger2" => FormatHint::Swagger2,
        other => return Err(value_err(format!("unknown hint {other:?}"))),
    };
    let inner = metarest::parse_spec(text, hint).map_err(value_err)?;
    Ok(PyApiSpec { inner })
}

/// One of `petstore`, `usermanagement`, `testbed`.
#[pyfunction]
fn bundled_spec(name: &str) -> PyResult<PyApiSpec> {
    let text = match name {
        "petstore" => bundled::PETSTORE,
        "usermanagement" => bundled::USER_MANAGEMENT,
        "testbed" => bundled::TESTBED,
        other => return Err(value_err(format!("no bundled document {other:?}"))),
    };
    parse_spec(text, "auto")
}

#[pyfunction]
fn normalize_title(title: &str) -> String {
    metarest::normalize_title(title)
}

/// Recovers scenarios from loosely formatted model output.
#[pyfunction]
fn parse_hlmt_list<'py>(py: Python<'py>, raw: &str) -> PyResult<Bound<'py, PyAny>> {
    let parsed = metarest::parse_hlmt_list(raw).map_err(value_err)?;
    to_py(py, &parsed.hlmts)
}

/// Structural problems of `plan` (a dict or JSON text); empty when executable.
#[pyfunction]
fn validate_plan(plan: &Bound<'_, PyAny>, spec: &PyApiSpec) -> PyResult<Vec<String>> {
    let plan: EmtPlan = from_py(plan)?;
    Ok(metarest::plan::validate_plan(&plan, &spec.inner)
        .iter()
        .map(ToString::to_string)
        .collect())
}

#[pyfunction]
#[pyo3(signature = (kind, left, right, delta=None))]
fn check_relation(kind: &str, left: &Bound<'_, PyAny>, right: &Bound<'_, PyAny>, delta: Option<i64>) -> PyResult<bool> {
    let kind: RelationKind = serde_json::from_value(Value::String(kind.to_string())).map_err(value_err)?;
    Ok(check(kind, &json_value(left)?, &json_value(right)?, delta).holds())
}

#[pyfunction]
#[pyo3(signature = (plan, spec, base_url, timeout=10.0, budget=1000))]
fn execute_plan<'py>(
    py: Python<'py>,
    plan: &Bound<'py, PyAny>,
    spec: &PyApiSpec,
    base_url: &str,
    timeout: f64,
    budget: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let plan: EmtPlan = from_py(plan)?;
    let timeout = Duration::try_from_secs_f64(timeout).map_err(value_err)?;
    let result = py.detach(|| {
        let ctx = ExecutionContext::new(&spec.inner, base_url, timeout);
        metarest::execute_scenario(&plan, &ctx, budget)
    });
    to_py(py, &result)
}

/// Runs a session and returns the report as a dict. Model output comes from
/// `responses` (a list of strings), `script_dir`, or an OpenAI-style
/// `endpoint` whose token is read from METAREST_API_KEY.
#[pyfunction]
#[pyo3(signature = (spec, base_url=None, *, responses=None, script_dir=None, endpoint=None, config=None, session_id=None, out_dir=None, testbed=None))]
#[allow(clippy::too_many_arguments)]
fn run_session<'py>(
    py: Python<'py>,
    spec: &PyApiSpec,
    base_url: Option<String>,
    responses: Option<Vec<String>>,
    script_dir: Option<PathBuf>,
    endpoint: Option<String>,
    config: Option<&Bound<'py, PyAny>>,
    session_id: Option<String>,
    out_dir: Option<PathBuf>,
    testbed: Option<&PyTestbed>,
) -> PyResult<Bound<'py, PyAny>> {
    let client: Arc<dyn LlmClient> = match (responses, script_dir, endpoint) {
        (Some(r), None, None) => Arc::new(ScriptedClient::from_texts(r)),
        (None, Some(d), None) => Arc::new(ScriptedClient::from_dir(&d).map_err(value_err)?),
        (None, None, Some(e)) => Arc::new(HttpChatClient::new(e, Duration::from_secs(120))),
        _ => return Err(value_err("give exactly one of responses, script_dir, endpoint")),
    };
    let config: SessionConfig = match config {
        Some(c) => from_py(c)?,
        None => SessionConfig::default(),
    };
    let base_url = testbed
        .map(|t| t.base_url())
        .or(base_url)
        .or_else(|| spec.inner.base_url.clone())
        .ok_or_else(|| value_err("no base_url and the document names no server"))?;

    let mut options = SessionOptions::default();
    if let Some(id) = session_id {
        options.session_id = id;
    }
    if let Some(tb) = testbed {
        let handle = tb.handle.clone();
        options = options.before_each(move |_| handle.reset());
    }
    let clients = AgentClients::shared(client);
    let outcome = py
        .detach(|| metarest::run_session(&spec.inner, &base_url, &config, &clients, &options))
        .map_err(value_err)?;
    if let Some(dir) = out_dir {
        persist_session(&outcome, &dir).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    }
    let mut report = serde_json::to_value(&outcome.report).map_err(value_err)?;
    report["records"] = serde_json::to_value(&outcome.records).map_err(value_err)?;
    to_py(py, &report)
}

fn sequence_set(items: Vec<String>) -> PyResult<BTreeSet<Sequence>> {
    items
        .iter()
        .map(|s| s.split("->").map(|p| p.trim().parse()).collect::<Result<Sequence, _>>())
        .collect::<Result<_, _>>()
        .map_err(value_err)
}

/// Sequences (as `"A -> B"` text) in `ours` but not in `theirs`.
#[pyfunction]
fn diff_sequences(ours: Vec<String>, theirs: Vec<String>) -> PyResult<Vec<String>> {
    let only = diff(&sequence_set(ours)?, &sequence_set(theirs)?);
    Ok(only.iter().map(ToString::to_string).collect())
}

#[pyfunction]
fn load_sequence_set(path: PathBuf) -> PyResult<Vec<String>> {
    let set = metarest::report::load_sequence_set(Path::new(&path)).map_err(value_err)?;
    Ok(set.iter().map(ToString::to_string).collect())
}

/// The worked-example scenarios with their fault and expected failure class.
#[pyfunction]
fn canned_scenarios<'py>(py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
    let list: Vec<Value> = canned()
        .into_iter()
        .map(|c| {
            serde_json::json!({
                "name": c.name,
                "fault": c.fault,
                "expected_failure": c.expected_failure,
                "hlmt": c.hlmt,
                "plan": c.plan,
            })
        })
        .collect();
    to_py(py, &list)
}

#[pyfunction]
fn fault_names() -> Vec<&'static str> {
    Fault::ALL.iter().map(|f| f.as_str()).collect()
}

#[pymodule]
pub fn metarest_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyApiSpec>()?;
    m.add_class::<PyTestbed>()?;
    m.add_function(wrap_pyfunction!(parse_spec, m)?)?;
    m.add_function(wrap_pyfunction!(bundled_spec, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_title, m)?)?;
    m.add_function(wrap_pyfunction!(parse_hlmt_list, m)?)?;
    m.add_function(wrap_pyfunction!(validate_plan, m)?)?;
    m.add_function(wrap_pyfunction!(check_relation, m)?)?;
    m.add_function(wrap_pyfunction!(execute_plan, m)?)?;
    m.add_function(wrap_pyfunction!(run_session, m)?)?;
    m.add_function(wrap_pyfunction!(diff_sequences, m)?)?;
    m.add_function(wrap_pyfunction!(load_sequence_set, m)?)?;
    m.add_function(wrap_pyfunction!(canned_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(fault_names, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
