use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::exponential_delay;
use super::fundamental::FundamentalProcess;
use crate::book::{BookStats, OrderId, Price, Qty, Side};
use crate::exchange::{MarketHours, MarketMessage};
use crate::kernel::{self, Agent, AgentId, Context};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValueAgentCfg {
    #[serde(with = "crate::serde_duration")]
    pub mean_interarrival: Duration,
    /// Standard deviation of the agent's noisy view of the fundamental, cents.
    pub obs_noise: f64,
    pub min_qty: Qty,
    pub max_qty: Qty,
    /// Quote inside the spread at the observed value, clamped so the order
    /// never crosses. When false, quote exactly at the near touch.
    pub quote_toward_value: bool,
    /// When one side of the book holds fewer shares than this, quote that
    /// side at the observed value (never crossing) instead of following
    /// the mid rule. Zero disables it, and a one-sided book then holds.
    pub refill_depth: Qty,
}

impl Default for ValueAgentCfg {
    fn default() -> Self {
        ValueAgentCfg {
            mean_interarrival: Duration::from_secs(1),
            obs_noise: 10.0,
            min_qty: 50,
            max_qty: 200,
            quote_toward_value: true,
            refill_depth: 500,
        }
    }
}

/// Where a value trader quotes given the book and its fundamental
/// observation. Buys when the observation is above the mid, sells
/// otherwise (ties sell), never crossing the spread. A thin side is
/// quoted at the observed value regardless of the mid.
pub fn value_policy(cfg: &ValueAgentCfg, stats: &BookStats, observation: f64) -> Option<(Side, Price)> {
    let obs = observation.round() as Price;
    let buy_at = |ask: Option<Price>| match ask {
        Some(ask) => obs.min(ask - 1).max(1),
        None => obs.max(1),
    };
    let sell_at = |bid: Option<Price>| match bid {
        Some(bid) => obs.max(bid + 1),
        None => obs.max(1),
    };
    let thin_bids = stats.bid_depth < cfg.refill_depth;
    let thin_asks = stats.ask_depth < cfg.refill_depth;
    if thin_bids != thin_asks {
        return Some(if thin_asks {
            (Side::Sell, sell_at(stats.best_bid))
        } else {
            (Side::Buy, buy_at(stats.best_ask))
        });
    }
    match (stats.best_bid, stats.best_ask) {
        (Some(bid), Some(ask)) => {
            let mid = (bid + ask) as f64 / 2.0;
            let toward = cfg.quote_toward_value;
            if observation > mid {
                Some((Side::Buy, if toward { buy_at(Some(ask)).max(bid) } else { bid }))
            } else {
                Some((Side::Sell, if toward { sell_at(Some(bid)).min(ask) } else { ask }))
            }
        }
        _ if cfg.refill_depth == 0 => None,
        (None, Some(ask)) => Some((Side::Buy, buy_at(Some(ask)))),
        (Some(bid), None) => Some((Side::Sell, sell_at(Some(bid)))),
        (None, None) => Some((Side::Buy, (obs - 1).max(1))),
    }
}

/// Trades toward a shared mean-reverting fundamental, keeping at most one
/// resting order by cancelling before every replacement.
pub struct ValueAgent {
    cfg: ValueAgentCfg,
    exchange: AgentId,
    hours: MarketHours,
    fundamental: FundamentalProcess,
    rng: ChaCha8Rng,
    next_order: u64,
    /// Latest order and its quantity not yet reported filled. Entry fills
    /// arrive after the ack, so the ack's resting quantity is not used.
    resting: Option<(OrderId, Qty)>,
}

impl ValueAgent {
    pub fn new(cfg: ValueAgentCfg, exchange: AgentId, hours: MarketHours, fundamental: FundamentalProcess) -> Self {
        ValueAgent {
            cfg,
            exchange,
            hours,
            fundamental,
            rng: ChaCha8Rng::seed_from_u64(0),
            next_order: 0,
            resting: None,
        }
    }

    fn schedule_next(&mut self, ctx: &mut Context<'_, MarketMessage>) -> kernel::Result<()> {
        let from = ctx.now().max(self.hours.open_at);
        let at = from + exponential_delay(&mut self.rng, self.cfg.mean_interarrival);
        if at < self.hours.close_at {
            ctx.schedule_wakeup(at)?;
        }
        Ok(())
    }

    fn observe(&mut self, ctx: &Context<'_, MarketMessage>) -> f64 {
        let truth = self.fundamental.value_at(ctx.now()) as f64;
        if self.cfg.obs_noise > 0.0 {
            let noise = Normal::new(0.0, self.cfg.obs_noise).expect("positive std");
            truth + noise.sample(&mut self.rng)
        } else {
            truth
        }
    }

    fn act(&mut self, ctx: &mut Context<'_, MarketMessage>, stats: &BookStats) -> kernel::Result<()> {
        if !self.hours.is_open(ctx.now()) {
            return Ok(());
        }
        let obs = self.observe(ctx);
        let Some((side, price)) = value_policy(&self.cfg, stats, obs) else {
            return Ok(());
        };
        if let Some((order_id, _)) = self.resting.take() {
            ctx.send(self.exchange, MarketMessage::Cancel { order_id })?;
        }
        let qty = self.rng.random_range(self.cfg.min_qty..=self.cfg.max_qty);
        let order_id = OrderId::new(ctx.id(), self.next_order);
        self.next_order += 1;
        self.resting = Some((order_id, qty));
        ctx.send(self.exchange, MarketMessage::SubmitLimit { order_id, side, qty, price })
    }
}

impl<A> Agent<MarketMessage, A> for ValueAgent {
    fn name(&self) -> &str {
        "value"
    }

    fn kernel_starting(&mut self, ctx: &mut Context<'_, MarketMessage>) -> kernel::Result<()> {
        self.rng = ChaCha8Rng::seed_from_u64(ctx.agent_seed());
        self.schedule_next(ctx)
    }

    fn wakeup(&mut self, ctx: &mut Context<'_, MarketMessage>) -> kernel::Result<()> {
        if self.hours.is_open(ctx.now()) {
            ctx.send(self.exchange, MarketMessage::QueryStats)?;
        }
        self.schedule_next(ctx)
    }

    fn receive_message(
        &mut self,
        ctx: &mut Context<'_, MarketMessage>,
        _sender: AgentId,
        body: MarketMessage,
    ) -> kernel::Result<()> {
        match body {
            MarketMessage::StatsReply(stats) => self.act(ctx, &stats)?,
            MarketMessage::OrderFilled { order_id, qty, .. } => {
                if let Some((id, open)) = self.resting.as_mut() {
                    if *id == order_id {
                        *open = open.saturating_sub(qty);
                    }
                }
            }
            MarketMessage::OrderRejected { order_id, .. } if self.resting.is_some_and(|(id, _)| id == order_id) => {
                self.resting = None;
            }
            _ => {}
        }
        if self.resting.is_some_and(|(_, q)| q == 0) {
            self.resting = None;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch(bid: Option<Price>, ask: Option<Price>) -> BookStats {
        BookStats {
            best_bid: bid,
            best_ask: ask,
            bid_depth: if bid.is_some() { 1000 } else { 0 },
            ask_depth: if ask.is_some() { 1000 } else { 0 },
            ..Default::default()
        }
    }

    fn at_touch() -> ValueAgentCfg {
        ValueAgentCfg {
            quote_toward_value: false,
            refill_depth: 0,
            ..Default::default()
        }
    }

    #[test]
    fn undervalued_buys_overvalued_sells() {
        let book = touch(Some(9_999), Some(10_001));
        assert_eq!(value_policy(&at_touch(), &book, 10_100.0), Some((Side::Buy, 9_999)));
        assert_eq!(value_policy(&at_touch(), &book, 9_900.0), Some((Side::Sell, 10_001)));
    }

    #[test]
    fn tie_goes_to_sell() {
        let book = touch(Some(9_999), Some(10_001));
        assert_eq!(value_policy(&at_touch(), &book, 10_000.0), Some((Side::Sell, 10_001)));
    }

    #[test]
    fn quotes_toward_value_stay_passive() {
        let cfg = ValueAgentCfg::default();
        assert_eq!(value_policy(&cfg, &touch(Some(100), Some(110)), 200.0), Some((Side::Buy, 109)));
        assert_eq!(value_policy(&cfg, &touch(Some(100), Some(110)), 106.4), Some((Side::Buy, 106)));
        assert_eq!(value_policy(&cfg, &touch(Some(100), Some(110)), 0.0), Some((Side::Sell, 101)));
        assert_eq!(value_policy(&cfg, &touch(Some(100), Some(110)), 103.0), Some((Side::Sell, 103)));
        // One-tick spread: only the touch is left.
        assert_eq!(value_policy(&cfg, &touch(Some(100), Some(101)), 200.0), Some((Side::Buy, 100)));
        assert_eq!(value_policy(&cfg, &touch(Some(100), Some(101)), 0.0), Some((Side::Sell, 101)));
    }

    #[test]
    fn one_sided_book() {
        let holding = at_touch();
        assert_eq!(value_policy(&holding, &touch(Some(100), None), 150.0), None);
        assert_eq!(value_policy(&holding, &touch(None, None), 150.0), None);

        let cfg = ValueAgentCfg::default();
        assert_eq!(value_policy(&cfg, &touch(Some(100), None), 150.0), Some((Side::Sell, 150)));
        assert_eq!(value_policy(&cfg, &touch(Some(100), None), 50.0), Some((Side::Sell, 101)));
        assert_eq!(value_policy(&cfg, &touch(None, Some(100)), 150.0), Some((Side::Buy, 99)));
        assert_eq!(value_policy(&cfg, &touch(None, None), 150.0), Some((Side::Buy, 149)));
    }

    #[test]
    fn thin_side_is_refilled_even_against_the_mid() {
        let cfg = ValueAgentCfg::default();
        let mut book = touch(Some(100), Some(101));
        book.ask_depth = 30;
        // Undervalued, but the ask side is thin: offer at the valuation.
        assert_eq!(value_policy(&cfg, &book, 120.0), Some((Side::Sell, 120)));
        assert_eq!(value_policy(&cfg, &book, 90.0), Some((Side::Sell, 101)));
        book.bid_depth = 30;
        // Both thin: back to the mid rule.
        assert_eq!(value_policy(&cfg, &book, 120.0), Some((Side::Buy, 100)));
    }
}
