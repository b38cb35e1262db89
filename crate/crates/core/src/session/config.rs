use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::agents::{AgentConfig, AgentRole};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("configuration error: {0}")]
pub struct FatalConfigError(pub String);

mod secs {
    use super::*;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

/// Session bounds and agent settings. The JSON config file mirrors these
/// fields one to one; durations are given in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    /// Percentage of documented operations to exercise, in [0, 100].
    pub target_coverage: f64,
    /// Consecutive progress-free iterations tolerated.
    pub plateau_window: u32,
    pub request_budget: u64,
    #[serde(with = "secs")]
    pub time_budget: Duration,
    /// Scenarios requested per iteration.
    pub batch_bound: usize,
    pub repair_max_attempts: u32,
    #[serde(with = "secs")]
    pub per_request_timeout: Duration,
    pub agent_configs: BTreeMap<AgentRole, AgentConfig>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            target_coverage: 100.0,
            plateau_window: 5,
            request_budget: 1000,
            time_budget: Duration::from_secs(30 * 60),
            batch_bound: 5,
            repair_max_attempts: 2,
            per_request_timeout: Duration::from_secs(10),
            agent_configs: BTreeMap::new(),
        }
    }
}

impl SessionConfig {
    pub fn from_json(text: &str) -> Result<Self, FatalConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| FatalConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, FatalConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FatalConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), FatalConfigError> {
        let fail = |m: String| Err(FatalConfigError(m));
        if !(0.0..=100.0).contains(&self.target_coverage) {
            return fail(format!("target_coverage must be within 0..=100, got {}", self.target_coverage));
        }
        if self.plateau_window == 0 {
            return fail("plateau_window must be positive".into());
        }
        if self.request_budget == 0 {
            return fail("request_budget must be positive".into());
        }
        if self.time_budget.is_zero() {
            return fail("time_budget must be positive".into());
        }
        if self.batch_bound == 0 {
            return fail("batch_bound must be positive".into());
        }
        if self.per_request_timeout.is_zero() {
            return fail("per_request_timeout must be positive".into());
        }
        for (role, cfg) in &self.agent_configs {
            if cfg.temperature.is_nan() || cfg.temperature < 0.0 {
                return fail(format!("{role}: temperature must be >= 0"));
            }
            if cfg.max_output_tokens == 0 {
                return fail(format!("{role}: max_output_tokens must be positive"));
            }
        }
        Ok(())
    }

    /// The role's configuration, or the defaults with the role name filled in.
    pub fn agent_config(&self, role: AgentRole) -> AgentConfig {
        let mut cfg = self.agent_configs.get(&role).cloned().unwrap_or_default();
        if cfg.role_name.is_empty() {
            cfg.role_name = role.to_string();
        }
        cfg
    }

    /// Applies `f` to every role's configuration, materializing defaults.
    pub fn update_agents(&mut self, f: impl Fn(&mut AgentConfig)) {
        for role in AgentRole::ALL {
            let mut cfg = self.agent_config(role);
            f(&mut cfg);
            self.agent_configs.insert(role, cfg);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = SessionConfig::default();
        assert_eq!(c.target_coverage, 100.0);
        assert_eq!(c.plateau_window, 5);
        assert_eq!(c.request_budget, 1000);
        assert_eq!(c.time_budget, Duration::from_secs(1800));
        assert_eq!(c.repair_max_attempts, 2);
        assert_eq!(c.per_request_timeout, Duration::from_secs(10));
        assert_eq!(c.agent_config(AgentRole::MrRefiner).temperature, 0.0);
        c.validate().unwrap();
    }

    #[test]
    fn json_round_trip_and_partial_files() {
        let c = SessionConfig::from_json(r#"{"request_budget": 50, "time_budget": 90.5}"#).unwrap();
        assert_eq!(c.request_budget, 50);
        assert_eq!(c.time_budget, Duration::from_millis(90_500));
        assert_eq!(c.plateau_window, 5);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(SessionConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn bad_values_are_fatal() {
        assert!(SessionConfig::from_json(r#"{"request_budget": -1}"#).is_err());
        assert!(SessionConfig::from_json(r#"{"target_coverage": 120}"#).is_err());
        assert!(SessionConfig::from_json(r#"{"plateau_window": 0}"#).is_err());
        assert!(SessionConfig::from_json(r#"{"no_such_field": 1}"#).is_err());
        assert!(SessionConfig::from_json(r#"{"agent_configs": {"mr_generator": {"temperature": -0.5}}}"#).is_err());
    }
}
