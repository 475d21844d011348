//! Environment names and `env_config` overrides.
//!
//! Overrides are a flat JSON object with upper-case keys:
//!
//! | environment | keys |
//! |---|---|
//! | `markets-daily_investor-v0` | `ORDER_FIXED_SIZE`, `TIMESTEP_DURATION`, `INITIAL_CASH` |
//! | `markets-execution-v0` | `PARENT_ORDER_SIZE`, `DIRECTION`, `TIME_WINDOW`, `CHILD_ORDER_SIZE`, `PENALTY`, `PENALTY_SCALED`, `TIMESTEP_DURATION` |
//!
//! Durations take seconds, `"<n><unit>"` strings or `{"seconds": 60}` style
//! maps. `DIRECTION` is `"buy"` or `"sell"`.

use std::time::Duration;

use marketgym_core::background::PopulationSpec;
use marketgym_core::book::Side;
use marketgym_core::serde_duration;
use serde_json::Value;

use crate::daily_investor::{DailyInvestor, DailyInvestorConfig};
use crate::env::{EnvError, Environment, GymEnv};
use crate::execution::{Execution, ExecutionConfig};

pub const DAILY_INVESTOR: &str = "markets-daily_investor-v0";
pub const EXECUTION: &str = "markets-execution-v0";

pub type EnvOverrides = serde_json::Map<String, Value>;

pub fn registered() -> [&'static str; 2] {
    [DAILY_INVESTOR, EXECUTION]
}

fn config_err(key: &str, what: impl std::fmt::Display) -> EnvError {
    EnvError::Config(format!("{key}: {what}"))
}

fn positive_int(key: &str, v: &Value) -> Result<u64, EnvError> {
    match v.as_u64() {
        Some(n) if n > 0 => Ok(n),
        _ => Err(config_err(key, "expected a positive integer")),
    }
}

fn duration(key: &str, v: &Value) -> Result<Duration, EnvError> {
    serde_duration::parse_value(v).map_err(|e| config_err(key, e))
}

fn side(key: &str, v: &Value) -> Result<Side, EnvError> {
    match v.as_str().map(str::to_ascii_lowercase).as_deref() {
        Some("buy") => Ok(Side::Buy),
        Some("sell") => Ok(Side::Sell),
        _ => Err(config_err(key, "expected \"buy\" or \"sell\"")),
    }
}

pub fn daily_investor_config(overrides: &EnvOverrides, population: &PopulationSpec) -> Result<DailyInvestorConfig, EnvError> {
    let mut cfg = DailyInvestorConfig {
        population: population.clone(),
        ..Default::default()
    };
    for (key, v) in overrides {
        match key.as_str() {
            "ORDER_FIXED_SIZE" => cfg.order_fixed_size = positive_int(key, v)?,
            "TIMESTEP_DURATION" => cfg.timestep = duration(key, v)?,
            "INITIAL_CASH" => cfg.initial_cash = v.as_i64().ok_or_else(|| config_err(key, "expected an integer"))?,
            _ => return Err(config_err(key, format!("not a setting of {DAILY_INVESTOR}"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execution_config(overrides: &EnvOverrides, population: &PopulationSpec) -> Result<ExecutionConfig, EnvError> {
    let mut cfg = ExecutionConfig {
        population: population.clone(),
        ..Default::default()
    };
    for (key, v) in overrides {
        match key.as_str() {
            "PARENT_ORDER_SIZE" => cfg.parent_order_size = positive_int(key, v)?,
            "DIRECTION" => cfg.direction = side(key, v)?,
            "TIME_WINDOW" => cfg.time_window = duration(key, v)?,
            "CHILD_ORDER_SIZE" => cfg.child_order_size = positive_int(key, v)?,
            "PENALTY" => {
                cfg.penalty = v
                    .as_i64()
                    .filter(|p| *p >= 0)
                    .ok_or_else(|| config_err(key, "expected a non-negative integer"))?
            }
            "PENALTY_SCALED" => cfg.scale_penalty = v.as_bool().ok_or_else(|| config_err(key, "expected a boolean"))?,
            "TIMESTEP_DURATION" => cfg.timestep = duration(key, v)?,
            _ => return Err(config_err(key, format!("not a setting of {EXECUTION}"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Builds a registered environment by name.
pub fn make(name: &str, overrides: &EnvOverrides, population: &PopulationSpec) -> Result<Box<dyn Environment>, EnvError> {
    match name {
        DAILY_INVESTOR => {
            let cfg = daily_investor_config(overrides, population)?;
            Ok(Box::new(GymEnv::new(DailyInvestor::new(cfg)?)))
        }
        EXECUTION => {
            let cfg = execution_config(overrides, population)?;
            Ok(Box::new(GymEnv::new(Execution::new(cfg)?)))
        }
        other => Err(EnvError::UnknownEnv(other.to_owned())),
    }
}
