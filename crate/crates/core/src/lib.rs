//! Metamorphic testing engine for REST APIs.
//!
//! An OpenAPI/Swagger document is normalized into an operation model, LLM
//! agents propose Given/When/Then metamorphic scenarios, the scenarios are
//! lowered into declarative request plans, and the plans run against a live
//! service under coverage and budget driven stopping criteria.

pub mod agents;
pub mod apispec;
pub mod bundled;
pub mod cli;
pub mod diagnostic;
pub mod executor;
pub mod mt;
pub mod plan;
pub mod report;
pub mod session;
pub mod testbed;

pub use apispec::{parse_spec, ApiSpecification, HttpMethod, Operation, SpecFormat};
pub use diagnostic::Diagnostic;
pub use executor::{execute_scenario, ExecutionContext, ScenarioResult, Verdict};
pub use mt::{normalize_title, parse_hlmt_list, Hlmt};
pub use plan::EmtPlan;
pub use session::{run_session, SessionConfig};
