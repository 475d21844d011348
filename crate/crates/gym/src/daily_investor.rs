//! Minute-frequency investor maximizing end-of-day marked-to-market value
//! with fixed-size market orders.
//!
//! Actions: 0 BUY, 1 HOLD, 2 SELL. The observation is
//! `[holdings, imbalance (3 levels), spread, direction feature, r_t, ..., r_{t-k+1}]`
//! and the reward is the change in marked-to-market value, in cents.

use std::time::Duration;

use marketgym_core::background::{build_market, PopulationSpec};
use marketgym_core::book::{Qty, Side};
use marketgym_core::exchange::{MarketHours, MarketMessage};
use marketgym_core::kernel::KernelConfig;
use marketgym_core::raw_state::RawState;
use marketgym_core::time::SimTime;
use serde_json::json;

use crate::env::{EnvError, Info, MdpLayer};
use crate::features::{direction_feature, imbalance, mid_returns, spread};
use crate::markets::{Commands, GymAgent, GymAgentConfig, MarketRawState, OrderCommand};

pub const BUY: usize = 0;
pub const HOLD: usize = 1;
pub const SELL: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct DailyInvestorConfig {
    pub order_fixed_size: Qty,
    pub timestep: Duration,
    pub first_wakeup: SimTime,
    pub k: usize,
    pub initial_cash: i64,
    pub hours: MarketHours,
    pub population: PopulationSpec,
}

impl Default for DailyInvestorConfig {
    fn default() -> Self {
        DailyInvestorConfig {
            order_fixed_size: 100,
            timestep: Duration::from_secs(60),
            first_wakeup: SimTime::hms(9, 35, 0),
            k: 3,
            initial_cash: 10_000_000,
            hours: MarketHours::default(),
            population: PopulationSpec::default(),
        }
    }
}

impl DailyInvestorConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let fail = |m: &str| Err(EnvError::Config(m.to_owned()));
        if self.order_fixed_size == 0 {
            return fail("ORDER_FIXED_SIZE must be positive");
        }
        if self.timestep.is_zero() {
            return fail("TIMESTEP_DURATION must be positive");
        }
        if self.k == 0 {
            return fail("history length k must be at least 1");
        }
        if self.first_wakeup < self.hours.open_at || self.first_wakeup >= self.hours.close_at {
            return fail("first wakeup must fall within market hours");
        }
        self.population.validate().map_err(|e| EnvError::Config(e.to_string()))
    }
}

pub fn action_commands(action: usize, size: Qty) -> Result<Commands, EnvError> {
    Ok(match action {
        BUY => vec![OrderCommand::PlaceMarket { side: Side::Buy, qty: size }],
        HOLD => vec![OrderCommand::Noop],
        SELL => vec![OrderCommand::PlaceMarket { side: Side::Sell, qty: size }],
        _ => return Err(EnvError::InvalidAction { action, count: 3 }),
    })
}

pub fn state_vector(raw: &MarketRawState, k: usize) -> Vec<f64> {
    let mut s = vec![
        raw.holdings as f64,
        imbalance(&raw.bids, &raw.asks, Some(3)),
        spread(raw),
        direction_feature(raw),
    ];
    s.extend(mid_returns(&raw.mid_history, k));
    s
}

/// Change in `cash + holdings * last_transaction` between two raw states.
pub fn step_reward(prev: &MarketRawState, now: &MarketRawState) -> f64 {
    (now.marked_to_market() - prev.marked_to_market()) as f64
}

pub struct DailyInvestor {
    cfg: DailyInvestorConfig,
}

impl DailyInvestor {
    pub fn new(cfg: DailyInvestorConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        Ok(DailyInvestor { cfg })
    }

    pub fn config(&self) -> &DailyInvestorConfig {
        &self.cfg
    }
}

impl MdpLayer for DailyInvestor {
    type Message = MarketMessage;
    type Action = Commands;

    fn action_count(&self) -> usize {
        3
    }

    fn observation_len(&self) -> usize {
        4 + self.cfg.k
    }

    fn build_kernel(&self, seed: u64) -> Result<KernelConfig<MarketMessage, Commands>, EnvError> {
        let hours = self.cfg.hours;
        let mut market = build_market(&self.cfg.population, seed, hours.open_at, hours.close_at, hours)
            .map_err(|e| EnvError::Config(e.to_string()))?;
        let gym = market.config.add_agent(Box::new(GymAgent::new(GymAgentConfig {
            exchange: market.exchange,
            first_wakeup: self.cfg.first_wakeup,
            timestep: self.cfg.timestep,
            initial_cash: self.cfg.initial_cash,
            history_len: self.cfg.k + 1,
        })));
        market.config.set_gym_agent(gym);
        Ok(market.config)
    }

    fn on_reset(&mut self, _raw: &RawState) -> Result<(), EnvError> {
        Ok(())
    }

    fn translate(&self, action: usize, _raw: &RawState) -> Result<Commands, EnvError> {
        action_commands(action, self.cfg.order_fixed_size)
    }

    fn step_reward(&mut self, prev: &RawState, now: &RawState) -> Result<f64, EnvError> {
        let (prev, now) = (MarketRawState::from_raw(prev)?, MarketRawState::from_raw(now)?);
        if now.last_transaction.is_none() && now.holdings != 0 {
            log::warn!("no trade yet at {}: holdings marked at zero", now.time);
        }
        Ok(step_reward(&prev, &now))
    }

    fn state(&self, raw: &RawState) -> Result<Vec<f64>, EnvError> {
        Ok(state_vector(&MarketRawState::from_raw(raw)?, self.cfg.k))
    }

    fn is_done(&self, raw: &RawState) -> Result<bool, EnvError> {
        Ok(MarketRawState::from_raw(raw)?.time >= self.cfg.hours.close_at)
    }

    fn final_reward_update(&mut self, _raw: &RawState) -> Result<f64, EnvError> {
        Ok(0.0)
    }

    fn info(&self, raw: &RawState) -> Result<Info, EnvError> {
        let m = MarketRawState::from_raw(raw)?;
        let mut info = Info::new();
        info.insert("time".into(), json!(m.time.to_string()));
        info.insert("cash".into(), json!(m.cash));
        info.insert("holdings".into(), json!(m.holdings));
        info.insert("last_transaction".into(), json!(m.last_transaction));
        info.insert("marked_to_market".into(), json!(m.marked_to_market()));
        Ok(info)
    }
}
