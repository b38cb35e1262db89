use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};

use serde_json::{json, Value};
use tiny_http::{Header, Request, Response, Server};
use url::form_urlencoded;

use super::{Fault, FaultProfile, TestbedError, RESET_PATH};
use crate::executor::SequenceEntry;
use crate::HttpMethod;

const VALID_EXPIRY: &str = "2030-01-01T00:00:00Z";
const INVALID_EXPIRY: &str = "Tue Jan 01 00:00:00 UTC 2030 (soon)";
const STATUSES: [&str; 3] = ["available", "pending", "sold"];

#[derive(Default)]
struct State {
    pets: BTreeMap<i64, Value>,
    users: BTreeMap<String, Value>,
    next_id: i64,
    history: Vec<SequenceEntry>,
    logins: u64,
}

struct Shared {
    profile: FaultProfile,
    state: Mutex<State>,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }
}

/// A running testbed. Dropping the handle stops the server.
pub struct TestbedHandle {
    base_url: String,
    server: Arc<Server>,
    shared: Arc<Shared>,
    acceptor: Option<JoinHandle<()>>,
}

impl TestbedHandle {
    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn profile(&self) -> &FaultProfile {
        &self.shared.profile
    }

    /// Templates of every request served since the last reset, in arrival
    /// order. Unknown routes are not recorded.
    pub fn history(&self) -> Vec<SequenceEntry> {
        self.shared.lock().history.clone()
    }

    /// Clears resources and request history; the fault profile is kept.
    pub fn reset(&self) {
        *self.shared.lock() = State::default();
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.server.unblock();
        if let Some(acceptor) = self.acceptor.take() {
            let _ = acceptor.join();
        }
    }
}

impl Drop for TestbedHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

pub fn reset_state(handle: &TestbedHandle) {
    handle.reset();
}

/// Serves the pet store on an ephemeral loopback port. Each request is handled
/// on its own thread so a slow endpoint never blocks the others.
pub fn start_testbed(profile: FaultProfile) -> Result<TestbedHandle, TestbedError> {
    let server = Server::http("127.0.0.1:0").map_err(|e| TestbedError::PortUnavailable(e.to_string()))?;
    let port = server
        .server_addr()
        .to_ip()
        .map(|a| a.port())
        .ok_or_else(|| TestbedError::PortUnavailable("not an IP listener".into()))?;
    let server = Arc::new(server);
    let shared = Arc::new(Shared {
        profile,
        state: Mutex::new(State::default()),
    });
    let acceptor = {
        let server = Arc::clone(&server);
        let shared = Arc::clone(&shared);
        thread::spawn(move || {
            for request in server.incoming_requests() {
                let shared = Arc::clone(&shared);
                thread::spawn(move || handle(&shared, request));
            }
        })
    };
    Ok(TestbedHandle {
        base_url: format!("http://127.0.0.1:{port}"),
        server,
        shared,
        acceptor: Some(acceptor),
    })
}

struct Reply {
    status: u16,
    body: Value,
    headers: Vec<(&'static str, String)>,
}

impl Reply {
    fn json(status: u16, body: Value) -> Self {
        Self {
            status,
            body,
            headers: Vec::new(),
        }
    }

    fn message(status: u16, text: &str) -> Self {
        Self::json(status, json!({"code": status, "message": text}))
    }
}

#[derive(Clone, Copy)]
enum Route {
    AddPet,
    GetPet(i64),
    UpdatePet(i64),
    DeletePet(i64),
    Inventory,
    CreateUser,
    Login,
}

impl Route {
    fn template(self) -> SequenceEntry {
        let (m, p) = match self {
            Route::AddPet => (HttpMethod::Post, "/pet"),
            Route::GetPet(_) => (HttpMethod::Get, "/pet/{petId}"),
            Route::UpdatePet(_) => (HttpMethod::Post, "/pet/{petId}"),
            Route::DeletePet(_) => (HttpMethod::Delete, "/pet/{petId}"),
            Route::Inventory => (HttpMethod::Get, "/store/inventory"),
            Route::CreateUser => (HttpMethod::Post, "/user"),
            Route::Login => (HttpMethod::Get, "/user/login"),
        };
        SequenceEntry::resolved(m, p)
    }
}

fn route(method: &str, path: &str) -> Result<Route, Reply> {
    let segments: Vec<&str> = path.trim_matches('/').split('/').collect();
    let pet_id = |raw: &str| {
        raw.parse::<i64>()
            .map_err(|_| Reply::message(400, "Invalid ID supplied"))
    };
    match (method, segments.as_slice()) {
        ("POST", ["pet"]) => Ok(Route::AddPet),
        ("GET", ["pet", id]) => pet_id(id).map(Route::GetPet),
        ("POST", ["pet", id]) => pet_id(id).map(Route::UpdatePet),
        ("DELETE", ["pet", id]) => pet_id(id).map(Route::DeletePet),
        ("GET", ["store", "inventory"]) => Ok(Route::Inventory),
        ("POST", ["user"]) => Ok(Route::CreateUser),
        ("GET", ["user", "login"]) => Ok(Route::Login),
        _ => Err(Reply::message(404, "not found")),
    }
}

fn handle(shared: &Shared, mut request: Request) {
    let method = request.method().as_str().to_ascii_uppercase();
    let url = request.url().to_string();
    let (path, query) = url.split_once('?').unwrap_or((&url, ""));
    let query: BTreeMap<String, String> = form_urlencoded::parse(query.as_bytes()).into_owned().collect();
    let is_form = request
        .headers()
        .iter()
        .any(|h| h.field.equiv("Content-Type") && h.value.as_str().contains("x-www-form-urlencoded"));
    let mut raw = String::new();
    let _ = request.as_reader().read_to_string(&mut raw);

    let reply = if method == "POST" && path == RESET_PATH {
        *shared.lock() = State::default();
        Reply::json(200, json!({"reset": true}))
    } else {
        match route(&method, path) {
            Err(reply) => reply,
            Ok(route) => serve(shared, route, &query, &raw, is_form),
        }
    };

    let mut response = Response::from_string(reply.body.to_string()).with_status_code(reply.status);
    let mut headers = vec![("Content-Type", "application/json".to_string())];
    headers.extend(reply.headers);
    for (k, v) in headers {
        if let Ok(h) = Header::from_bytes(k.as_bytes(), v.as_bytes()) {
            response.add_header(h);
        }
    }
    let _ = request.respond(response);
}

fn serve(shared: &Shared, route: Route, query: &BTreeMap<String, String>, raw: &str, is_form: bool) -> Reply {
    let profile = &shared.profile;
    {
        let mut state = shared.lock();
        state.history.push(route.template());
        if profile.has(Fault::CrashOnSequence) {
            if let Some(trigger) = &profile.crash_sequence {
                if !trigger.is_empty() && state.history.ends_with(trigger.entries()) {
                    return Reply::message(500, "Internal Server Error");
                }
            }
        }
    }
    if matches!(route, Route::Inventory) && profile.has(Fault::SlowEndpoint) {
        thread::sleep(profile.slow_delay);
    }

    let mut state = shared.lock();
    match route {
        Route::AddPet => {
            let Ok(Value::Object(mut pet)) = serde_json::from_str::<Value>(raw) else {
                return Reply::message(400, "Invalid input");
            };
            if profile.has(Fault::RejectMissingField) && !pet.contains_key("name") {
                return Reply::message(400, "Invalid input: name is required");
            }
            let id = match pet.get("id").and_then(Value::as_i64) {
                Some(id) => id,
                None => {
                    state.next_id += 1;
                    state.next_id
                }
            };
            pet.insert("id".into(), json!(id));
            let pet = Value::Object(pet);
            state.pets.insert(id, pet.clone());
            Reply::json(200, pet)
        }
        Route::GetPet(id) => match state.pets.get(&id) {
            Some(pet) => Reply::json(200, pet.clone()),
            None => Reply::message(404, "Pet not found"),
        },
        Route::UpdatePet(id) => {
            let mut fields = query.clone();
            if is_form {
                fields.extend(form_urlencoded::parse(raw.as_bytes()).into_owned());
            }
            let Some(pet) = state.pets.get_mut(&id) else {
                return Reply::message(404, "Pet not found");
            };
            if let Some(name) = fields.get("name") {
                pet["name"] = json!(name);
            }
            if let Some(status) = fields.get("status") {
                if !profile.has(Fault::DropStatusUpdate) {
                    pet["status"] = json!(status);
                }
            }
            Reply::json(200, pet.clone())
        }
        Route::DeletePet(id) => match state.pets.remove(&id) {
            Some(_) => Reply::message(200, "Pet deleted"),
            None => Reply::message(404, "Pet not found"),
        },
        Route::Inventory => {
            let mut counts: BTreeMap<String, i64> = STATUSES.iter().map(|s| (s.to_string(), 0)).collect();
            for pet in state.pets.values() {
                if let Some(status) = pet.get("status").and_then(Value::as_str) {
                    *counts.entry(status.to_string()).or_default() += 1;
                }
            }
            Reply::json(200, json!(counts))
        }
        Route::CreateUser => {
            let Ok(user @ Value::Object(_)) = serde_json::from_str::<Value>(raw) else {
                return Reply::message(400, "Invalid input");
            };
            let username = user.get("username").and_then(Value::as_str).unwrap_or_default().to_string();
            state.users.insert(username, user.clone());
            Reply::json(200, user)
        }
        Route::Login => {
            state.logins += 1;
            let expires = if profile.has(Fault::InvalidExpiresHeader) {
                INVALID_EXPIRY
            } else {
                VALID_EXPIRY
            };
            let mut reply = Reply::json(200, json!(format!("logged in user session:{}", state.logins)));
            reply.headers.push(("X-Rate-Limit", "5000".into()));
            reply.headers.push(("X-Expires-After", expires.into()));
            reply
        }
    }
}
