//! API documents shipped with the engine.

/// Pet store, OpenAPI 3.0, 19 operations.
pub const PETSTORE: &str = include_str!("../specs/petstore.yaml");

/// User management service, Swagger 2.0, 28 operations.
pub const USER_MANAGEMENT: &str = include_str!("../specs/usermanagement.yaml");

/// The subset of the pet store served by [`crate::testbed`].
pub const TESTBED: &str = include_str!("../specs/testbed.yaml");
