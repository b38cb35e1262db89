//! Declarative executable metamorphic test plans.
//!
//! A plan is the executable lowering of one scenario: ordered request steps
//! for the Given (seed) and When (follow-up) phases, named extractions from
//! their responses, and relation assertions for the Then phase.

mod model;
mod relation;
mod validate;
mod value_path;

pub use model::{
    binding_ref, make_placeholder, parse_plan_output, EmtPlan, Operand, PlanLabels,
    PlanParseError, RelationAssertion, RelationKind, RequestStep,
};
pub use relation::{check_relation, json_equal, RelationVerdict};
pub use validate::validate_plan;
pub use value_path::{extract_value, ExtractionMiss, PathRoot, ValuePath, COUNT_SEGMENT};
