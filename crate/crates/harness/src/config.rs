//! Run configuration files.
//!
//! ```json
//! {
//!   "env": "markets-daily_investor-v0",
//!   "env_config": {"ORDER_FIXED_SIZE": 100, "TIMESTEP_DURATION": {"seconds": 60}},
//!   "population": {"noise_agents": 100, "value_agents": 10, "momentum_agents": 5},
//!   "seeds": [1, 2, 3],
//!   "episodes": 300,
//!   "policy": {"kind": "q_learning", "epsilon": {"start": 1.0, "end": 0.02}},
//!   "output": "runs/daily"
//! }
//! ```

use std::path::{Path, PathBuf};

use marketgym_core::background::PopulationSpec;
use marketgym_gym::registry::{self, EnvOverrides, DAILY_INVESTOR, EXECUTION};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::qlearn::QLearnerSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: String,
    #[serde(default)]
    pub env_config: EnvOverrides,
    #[serde(default)]
    pub population: PopulationSpec,
    pub seeds: Vec<u64>,
    pub episodes: u64,
    pub policy: PolicySpec,
    /// Where logs go. Not part of the run's identity: it is left out of
    /// the manifest and its hash.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Random,
    Fixed { action: usize },
    QLearning(QLearnerSpec),
}

impl RunConfig {
    /// Parses and validates. Syntax and type errors carry the line, column
    /// and field path.
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            HarnessError::Config {
                line: inner.line(),
                column: inner.column(),
                field: path,
                message: inner.to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |field: &str, message: String| HarnessError::Invalid {
            field: field.to_owned(),
            message,
        };
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "at least one seed is required".into()));
        }
        if self.episodes == 0 {
            return Err(invalid("episodes", "must be at least 1".into()));
        }
        let actions = match self.env.as_str() {
            DAILY_INVESTOR => {
                registry::daily_investor_config(&self.env_config, &self.population)?;
                3
            }
            EXECUTION => {
                registry::execution_config(&self.env_config, &self.population)?;
                3
            }
            other => return Err(marketgym_gym::EnvError::UnknownEnv(other.to_owned()).into()),
        };
        match &self.policy {
            PolicySpec::Fixed { action } if *action >= actions => Err(invalid(
                "policy.action",
                format!("action {action} is outside 0..{actions}"),
            )),
            PolicySpec::QLearning(spec) => spec.validate(&self.env),
            _ => Ok(()),
        }
    }

    /// SHA-256 of the canonical JSON form (output directory excluded).
    pub fn hash(&self) -> String {
        crate::logs::sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DAILY: &str = r#"{
        "env": "markets-daily_investor-v0",
        "env_config": {"ORDER_FIXED_SIZE": 100},
        "seeds": [1, 2],
        "episodes": 2,
        "policy": {"kind": "random"}
    }"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = RunConfig::from_json(DAILY).unwrap();
        assert_eq!(cfg.seeds, [1, 2]);
        assert_eq!(cfg.policy, PolicySpec::Random);
        assert_eq!(cfg.population, PopulationSpec::default());
    }

    #[test]
    fn type_error_names_field_and_line() {
        let text = DAILY.replace(r#""episodes": 2"#, r#""episodes": "two""#);
        match RunConfig::from_json(&text) {
            Err(HarnessError::Config { line, field, .. }) => {
                assert_eq!(line, 5);
                assert_eq!(field, "episodes");
            }
            other => panic!("{other:?}"),
        }
        let text = DAILY.replace(r#""ORDER_FIXED_SIZE": 100"#, r#""ORDER_FIXED_SIZE": 100,}"#);
        assert!(matches!(RunConfig::from_json(&text), Err(HarnessError::Config { line: 3, .. })));
    }

    #[test]
    fn nested_field_path() {
        let text = DAILY.replace(
            r#""seeds""#,
            r#""population": {"value": {"min_qty": -1}}, "seeds""#,
        );
        match RunConfig::from_json(&text) {
            Err(HarnessError::Config { field, .. }) => assert_eq!(field, "population.value.min_qty"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors() {
        for (from, to) in [
            (r#""seeds": [1, 2]"#, r#""seeds": []"#),
            (r#""episodes": 2"#, r#""episodes": 0"#),
            (r#""markets-daily_investor-v0""#, r#""markets-nope-v0""#),
            (r#"{"kind": "random"}"#, r#"{"kind": "fixed", "action": 3}"#),
            (r#""ORDER_FIXED_SIZE""#, r#""PARENT_ORDER_SIZE""#),
        ] {
            assert!(RunConfig::from_json(&DAILY.replace(from, to)).is_err(), "{to}");
        }
        let unknown = DAILY.replace(r#""seeds""#, r#""sedes": [1], "seeds""#);
        assert!(matches!(RunConfig::from_json(&unknown), Err(HarnessError::Config { .. })));
    }

    #[test]
    fn hash_tracks_content_not_output() {
        let a = RunConfig::from_json(DAILY).unwrap();
        let mut b = a.clone();
        b.output = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.episodes = 3;
        assert_ne!(a.hash(), b.hash());
    }
}
