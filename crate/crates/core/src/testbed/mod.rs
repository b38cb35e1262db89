//! In-process pet store with switchable faults, used as the system under test
//! by the offline acceptance suite.

mod canned;
mod server;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{Sequence, SequenceEntry};
use crate::HttpMethod;

pub use canned::{canned, canned_scenarios, scripted_iteration, CannedScenario};
pub use server::{reset_state, start_testbed, TestbedHandle};

/// Path of the out-of-band reset endpoint. It is not part of the served
/// document, so it never counts toward coverage.
pub const RESET_PATH: &str = "/_testbed/reset";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    DropStatusUpdate,
    InvalidExpiresHeader,
    CrashOnSequence,
    SlowEndpoint,
    RejectMissingField,
}

impl Fault {
    pub const ALL: [Fault; 5] = [
        Fault::DropStatusUpdate,
        Fault::InvalidExpiresHeader,
        Fault::CrashOnSequence,
        Fault::SlowEndpoint,
        Fault::RejectMissingField,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Fault::DropStatusUpdate => "drop-status-update",
            Fault::InvalidExpiresHeader => "invalid-expires-header",
            Fault::CrashOnSequence => "crash-on-sequence",
            Fault::SlowEndpoint => "slow-endpoint",
            Fault::RejectMissingField => "reject-missing-field",
        }
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Fault::ALL
            .into_iter()
            .find(|f| f.as_str() == s.trim())
            .ok_or_else(|| format!("unknown fault {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultProfile {
    pub flags: BTreeSet<Fault>,
    /// Request history suffix that makes the last request of it return 500.
    pub crash_sequence: Option<Sequence>,
    pub slow_delay: Duration,
}

impl Default for FaultProfile {
    fn default() -> Self {
        Self {
            flags: BTreeSet::new(),
            crash_sequence: None,
            slow_delay: Duration::from_secs(11),
        }
    }
}

impl FaultProfile {
    /// The correct service.
    pub fn none() -> Self {
        Self::default()
    }

    /// Exactly one fault. `crash-on-sequence` gets the delete-then-recreate
    /// sequence as its trigger.
    pub fn single(fault: Fault) -> Self {
        let mut profile = Self::default().with(fault);
        if fault == Fault::CrashOnSequence {
            profile.crash_sequence = Some(Sequence(vec![
                SequenceEntry::resolved(HttpMethod::Delete, "/pet/{petId}"),
                SequenceEntry::resolved(HttpMethod::Post, "/pet"),
            ]));
        }
        profile
    }

    pub fn with(mut self, fault: Fault) -> Self {
        self.flags.insert(fault);
        self
    }

    pub fn has(&self, fault: Fault) -> bool {
        self.flags.contains(&fault)
    }
}

#[derive(Debug, Error)]
pub enum TestbedError {
    #[error("could not bind a local port: {0}")]
    PortUnavailable(String),
}
