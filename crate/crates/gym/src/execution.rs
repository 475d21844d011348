//! Parent-order execution within a time window through child market or
//! limit orders, with a terminal penalty on any unexecuted quantity.
//!
//! Actions: 0 MARKET ORDER, 1 DO NOTHING, 2 LIMIT ORDER. The observation is
//! `[holdings_pct, time_pct, difference_pct, imbalance (5 levels),
//! imbalance (all levels), price_impact, spread, direction feature, r_t, ...]`.
//!
//! The per-step reward is `sum over fills of numside * (entry - fill) * qty`
//! divided by the parent size, with `numside` +1 for buys and -1 for sells.

use std::time::Duration;

use marketgym_core::background::{build_market, PopulationSpec};
use marketgym_core::book::{Price, Qty, Side};
use marketgym_core::exchange::{MarketHours, MarketMessage};
use marketgym_core::kernel::KernelConfig;
use marketgym_core::raw_state::RawState;
use marketgym_core::time::{duration_nanos, SimTime};
use serde_json::json;

use crate::env::{EnvError, Info, MdpLayer};
use crate::features::{direction_feature, imbalance, mid_returns, spread};
use crate::markets::{Commands, Fill, GymAgent, GymAgentConfig, MarketRawState, OrderCommand};

pub const MARKET_ORDER: usize = 0;
pub const DO_NOTHING: usize = 1;
pub const LIMIT_ORDER: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct ExecutionConfig {
    pub parent_order_size: Qty,
    pub direction: Side,
    pub time_window: Duration,
    pub child_order_size: Qty,
    /// Cents per unexecuted share.
    pub penalty: i64,
    /// Divide the terminal penalty by the parent size, like the step
    /// rewards. When false it is reported in raw cents.
    pub scale_penalty: bool,
    pub timestep: Duration,
    pub starting_time: SimTime,
    pub k: usize,
    pub hours: MarketHours,
    pub population: PopulationSpec,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        ExecutionConfig {
            parent_order_size: 20_000,
            direction: Side::Buy,
            time_window: Duration::from_secs(4 * 3600),
            child_order_size: 50,
            penalty: 100,
            scale_penalty: true,
            timestep: Duration::from_secs(10),
            starting_time: SimTime::hms(9, 35, 0),
            k: 3,
            hours: MarketHours::default(),
            population: PopulationSpec::default(),
        }
    }
}

impl ExecutionConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let fail = |m: &str| Err(EnvError::Config(m.to_owned()));
        if self.parent_order_size == 0 || self.child_order_size == 0 {
            return fail("PARENT_ORDER_SIZE and CHILD_ORDER_SIZE must be positive");
        }
        if self.child_order_size > self.parent_order_size {
            return fail("CHILD_ORDER_SIZE must not exceed PARENT_ORDER_SIZE");
        }
        if self.penalty < 0 {
            return fail("PENALTY must be non-negative");
        }
        if self.timestep.is_zero() || self.time_window.is_zero() {
            return fail("TIMESTEP_DURATION and TIME_WINDOW must be positive");
        }
        if self.k == 0 {
            return fail("history length k must be at least 1");
        }
        if self.starting_time < self.hours.open_at || self.end_time() > self.hours.close_at {
            return fail("the execution window must fit within market hours");
        }
        self.population.validate().map_err(|e| EnvError::Config(e.to_string()))
    }

    pub fn end_time(&self) -> SimTime {
        self.starting_time.saturating_add(self.time_window)
    }
}

/// Fills and entry price of the current episode.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExecutionLedger {
    pub entry_price: f64,
    pub executed_qty: Qty,
    pub fills: Vec<(Price, Qty)>,
}

impl ExecutionLedger {
    pub fn remaining(&self, parent: Qty) -> Qty {
        parent.saturating_sub(self.executed_qty)
    }
}

/// Entry price: mid at the first wakeup, falling back to the last trade,
/// then to zero.
pub fn entry_price(raw: &MarketRawState) -> f64 {
    raw.mid()
        .or(raw.last_transaction.map(|p| p as f64))
        .unwrap_or(0.0)
}

/// Highest bid for a buy, lowest ask for a sell.
pub fn near_touch(raw: &MarketRawState, direction: Side) -> Option<Price> {
    match direction {
        Side::Buy => raw.best_bid(),
        Side::Sell => raw.best_ask(),
    }
}

pub fn action_commands(
    action: usize,
    raw: &MarketRawState,
    cfg: &ExecutionConfig,
    ledger: &ExecutionLedger,
) -> Result<Commands, EnvError> {
    let qty = cfg.child_order_size.min(ledger.remaining(cfg.parent_order_size));
    let side = cfg.direction;
    Ok(match action {
        _ if action > LIMIT_ORDER => return Err(EnvError::InvalidAction { action, count: 3 }),
        DO_NOTHING => Vec::new(),
        _ if qty == 0 => Vec::new(),
        MARKET_ORDER => vec![OrderCommand::CancelAll, OrderCommand::PlaceMarket { side, qty }],
        _ => match near_touch(raw, side) {
            Some(price) => vec![OrderCommand::CancelAll, OrderCommand::PlaceLimit { side, qty, price }],
            None => Vec::new(),
        },
    })
}

/// Sum of `numside * (entry - fill) * qty` over the fills.
pub fn fills_pnl(fills: &[Fill], entry: f64) -> f64 {
    fills
        .iter()
        .map(|f| f.side.sign() as f64 * (entry - f.price as f64) * f.qty as f64)
        .sum()
}

/// Zero when the parent order is complete, otherwise the penalty on the
/// shortfall as a negative amount.
pub fn terminal_update(executed: Qty, cfg: &ExecutionConfig) -> f64 {
    let shortfall = cfg.parent_order_size.saturating_sub(executed);
    let magnitude = (cfg.penalty * shortfall as i64).abs() as f64;
    if cfg.scale_penalty {
        -magnitude / cfg.parent_order_size as f64
    } else {
        -magnitude
    }
}

pub fn state_vector(raw: &MarketRawState, cfg: &ExecutionConfig, ledger: &ExecutionLedger) -> Vec<f64> {
    let holdings_pct = ledger.executed_qty as f64 / cfg.parent_order_size as f64;
    let elapsed = raw.time.nanos().saturating_sub(cfg.starting_time.nanos());
    let time_pct = elapsed as f64 / duration_nanos(cfg.time_window) as f64;
    let price_impact = raw.mid().map_or(0.0, |m| m - ledger.entry_price);
    let mut s = vec![
        holdings_pct,
        time_pct,
        holdings_pct - time_pct,
        imbalance(&raw.bids, &raw.asks, Some(5)),
        imbalance(&raw.bids, &raw.asks, None),
        price_impact,
        spread(raw),
        direction_feature(raw),
    ];
    s.extend(mid_returns(&raw.mid_history, cfg.k));
    s
}

pub struct Execution {
    cfg: ExecutionConfig,
    ledger: ExecutionLedger,
}

impl Execution {
    pub fn new(cfg: ExecutionConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        Ok(Execution {
            cfg,
            ledger: ExecutionLedger::default(),
        })
    }

    pub fn config(&self) -> &ExecutionConfig {
        &self.cfg
    }

    pub fn ledger(&self) -> &ExecutionLedger {
        &self.ledger
    }
}

impl MdpLayer for Execution {
    type Message = MarketMessage;
    type Action = Commands;

    fn action_count(&self) -> usize {
        3
    }

    fn observation_len(&self) -> usize {
        8 + self.cfg.k
    }

    fn build_kernel(&self, seed: u64) -> Result<KernelConfig<MarketMessage, Commands>, EnvError> {
        let hours = self.cfg.hours;
        let mut market = build_market(&self.cfg.population, seed, hours.open_at, self.cfg.end_time(), hours)
            .map_err(|e| EnvError::Config(e.to_string()))?;
        let gym = market.config.add_agent(Box::new(GymAgent::new(GymAgentConfig {
            exchange: market.exchange,
            first_wakeup: self.cfg.starting_time,
            timestep: self.cfg.timestep,
            initial_cash: 0,
            history_len: self.cfg.k + 1,
        })));
        market.config.set_gym_agent(gym);
        Ok(market.config)
    }

    fn on_reset(&mut self, raw: &RawState) -> Result<(), EnvError> {
        let m = MarketRawState::from_raw(raw)?;
        if m.mid().is_none() {
            log::warn!("one-sided book at {}: entry price falls back", m.time);
        }
        self.ledger = ExecutionLedger {
            entry_price: entry_price(&m),
            ..Default::default()
        };
        Ok(())
    }

    fn translate(&self, action: usize, raw: &RawState) -> Result<Commands, EnvError> {
        let m = MarketRawState::from_raw(raw)?;
        action_commands(action, &m, &self.cfg, &self.ledger)
    }

    fn step_reward(&mut self, _prev: &RawState, now: &RawState) -> Result<f64, EnvError> {
        let m = MarketRawState::from_raw(now)?;
        let dir = self.cfg.direction;
        for f in &m.fills {
            if f.side == dir {
                self.ledger.executed_qty += f.qty;
            } else {
                self.ledger.executed_qty = self.ledger.executed_qty.saturating_sub(f.qty);
            }
            self.ledger.fills.push((f.price, f.qty));
        }
        Ok(fills_pnl(&m.fills, self.ledger.entry_price) / self.cfg.parent_order_size as f64)
    }

    fn state(&self, raw: &RawState) -> Result<Vec<f64>, EnvError> {
        Ok(state_vector(&MarketRawState::from_raw(raw)?, &self.cfg, &self.ledger))
    }

    fn is_done(&self, raw: &RawState) -> Result<bool, EnvError> {
        let t = MarketRawState::from_raw(raw)?.time;
        Ok(t >= self.cfg.end_time() || self.ledger.executed_qty >= self.cfg.parent_order_size)
    }

    fn final_reward_update(&mut self, _raw: &RawState) -> Result<f64, EnvError> {
        Ok(terminal_update(self.ledger.executed_qty, &self.cfg))
    }

    fn info(&self, raw: &RawState) -> Result<Info, EnvError> {
        let m = MarketRawState::from_raw(raw)?;
        let mut info = Info::new();
        info.insert("time".into(), json!(m.time.to_string()));
        info.insert("entry_price".into(), json!(self.ledger.entry_price));
        info.insert("executed_qty".into(), json!(self.ledger.executed_qty));
        info.insert(
            "remaining_qty".into(),
            json!(self.ledger.remaining(self.cfg.parent_order_size)),
        );
        Ok(info)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fill(price: Price, qty: Qty, side: Side) -> Fill {
        Fill { price, qty, side }
    }

    #[test]
    fn pnl_sign_symmetry() {
        let parent = 20_000.0;
        assert_eq!(fills_pnl(&[fill(9990, 50, Side::Buy)], 10_000.0), 500.0);
        assert_eq!(fills_pnl(&[fill(9990, 50, Side::Buy)], 10_000.0) / parent, 0.025);
        assert_eq!(fills_pnl(&[fill(10_010, 50, Side::Buy)], 10_000.0) / parent, -0.025);
        assert_eq!(fills_pnl(&[fill(10_010, 50, Side::Sell)], 10_000.0) / parent, 0.025);
        assert_eq!(fills_pnl(&[], 10_000.0), 0.0);
    }

    #[test]
    fn terminal_penalty() {
        let cfg = ExecutionConfig::default();
        assert_eq!(terminal_update(20_000, &cfg), 0.0);
        assert_eq!(terminal_update(19_950, &cfg), -0.25);
        assert_eq!(terminal_update(0, &cfg), -100.0);
        let raw_units = ExecutionConfig {
            scale_penalty: false,
            ..Default::default()
        };
        assert_eq!(terminal_update(19_950, &raw_units), -5000.0);
    }

    #[test]
    fn state_at_origin_and_halfway() {
        let cfg = ExecutionConfig::default();
        let book = MarketRawState {
            time: cfg.starting_time,
            bids: vec![(9999, 10)],
            asks: vec![(10_001, 10)],
            ..Default::default()
        };
        let ledger = ExecutionLedger {
            entry_price: 10_000.0,
            ..Default::default()
        };
        let s = state_vector(&book, &cfg, &ledger);
        assert_eq!(s.len(), 11);
        assert_eq!(&s[..3], &[0.0, 0.0, 0.0]);
        assert_eq!(s[5], 0.0);

        let half = MarketRawState {
            time: SimTime::hms(11, 35, 0),
            bids: vec![(10_049, 10)],
            asks: vec![(10_051, 10)],
            ..Default::default()
        };
        let ledger = ExecutionLedger {
            entry_price: 10_000.0,
            executed_qty: 10_000,
            ..Default::default()
        };
        let s = state_vector(&half, &cfg, &ledger);
        assert_eq!(&s[..3], &[0.5, 0.5, 0.0]);
        assert_eq!(s[5], 50.0);
    }

    #[test]
    fn action_expansion() {
        let cfg = ExecutionConfig::default();
        let ledger = ExecutionLedger::default();
        let raw = MarketRawState {
            bids: vec![(9998, 10)],
            asks: vec![(10_002, 10)],
            ..Default::default()
        };
        assert_eq!(
            action_commands(LIMIT_ORDER, &raw, &cfg, &ledger).unwrap(),
            vec![
                OrderCommand::CancelAll,
                OrderCommand::PlaceLimit { side: Side::Buy, qty: 50, price: 9998 }
            ]
        );
        assert_eq!(
            action_commands(MARKET_ORDER, &raw, &cfg, &ledger).unwrap(),
            vec![OrderCommand::CancelAll, OrderCommand::PlaceMarket { side: Side::Buy, qty: 50 }]
        );
        assert!(action_commands(DO_NOTHING, &raw, &cfg, &ledger).unwrap().is_empty());
        assert_eq!(
            action_commands(3, &raw, &cfg, &ledger),
            Err(EnvError::InvalidAction { action: 3, count: 3 })
        );

        let sell = ExecutionConfig {
            direction: Side::Sell,
            ..Default::default()
        };
        assert_eq!(
            action_commands(LIMIT_ORDER, &raw, &sell, &ledger).unwrap()[1],
            OrderCommand::PlaceLimit { side: Side::Sell, qty: 50, price: 10_002 }
        );
    }

    #[test]
    fn limit_without_near_touch_does_nothing() {
        let cfg = ExecutionConfig::default();
        let raw = MarketRawState {
            asks: vec![(10_002, 10)],
            ..Default::default()
        };
        assert!(action_commands(LIMIT_ORDER, &raw, &cfg, &ExecutionLedger::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn last_child_is_truncated() {
        let cfg = ExecutionConfig::default();
        let ledger = ExecutionLedger {
            executed_qty: 19_980,
            ..Default::default()
        };
        let cmds = action_commands(MARKET_ORDER, &MarketRawState::default(), &cfg, &ledger).unwrap();
        assert_eq!(cmds[1], OrderCommand::PlaceMarket { side: Side::Buy, qty: 20 });
    }

    #[test]
    fn window_bounds() {
        let cfg = ExecutionConfig::default();
        assert_eq!(cfg.end_time(), SimTime::hms(13, 35, 0));
        assert!(cfg.validate().is_ok());
        let late = ExecutionConfig {
            starting_time: SimTime::hms(13, 0, 0),
            ..Default::default()
        };
        assert!(late.validate().is_err());
        let fat_child = ExecutionConfig {
            child_order_size: 30_000,
            ..Default::default()
        };
        assert!(fat_child.validate().is_err());
    }

    #[test]
    fn entry_fallbacks() {
        let two_sided = MarketRawState {
            bids: vec![(9999, 1)],
            asks: vec![(10_002, 1)],
            last_transaction: Some(5),
            ..Default::default()
        };
        assert_eq!(entry_price(&two_sided), 10_000.5);
        let one_sided = MarketRawState {
            bids: vec![(9999, 1)],
            last_transaction: Some(9990),
            ..Default::default()
        };
        assert_eq!(entry_price(&one_sided), 9990.0);
        assert_eq!(entry_price(&MarketRawState::default()), 0.0);
    }
}
