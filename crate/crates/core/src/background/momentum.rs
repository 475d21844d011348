use std::collections::VecDeque;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::exponential_delay;
use crate::book::{BookStats, OrderId, Qty, Side};
use crate::exchange::{MarketHours, MarketMessage};
use crate::kernel::{self, Agent, AgentId, Context};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MomentumAgentCfg {
    #[serde(with = "crate::serde_duration")]
    pub mean_interarrival: Duration,
    /// Window lengths in wakeups.
    pub short_window: usize,
    pub long_window: usize,
    pub order_size: Qty,
}

impl Default for MomentumAgentCfg {
    fn default() -> Self {
        MomentumAgentCfg {
            mean_interarrival: Duration::from_secs(20),
            short_window: 20,
            long_window: 50,
            order_size: 20,
        }
    }
}

fn mean_of_last(history: &VecDeque<f64>, n: usize) -> f64 {
    history.iter().rev().take(n).sum::<f64>() / n as f64
}

/// Trend follower: market buy when the short moving average of the mid is
/// above the long one, sell when below, hold otherwise.
pub fn momentum_policy(cfg: &MomentumAgentCfg, mid_history: &VecDeque<f64>) -> Option<(Side, Qty)> {
    if cfg.short_window == 0 || mid_history.len() < cfg.long_window {
        return None;
    }
    let short = mean_of_last(mid_history, cfg.short_window);
    let long = mean_of_last(mid_history, cfg.long_window);
    if short > long {
        Some((Side::Buy, cfg.order_size))
    } else if short < long {
        Some((Side::Sell, cfg.order_size))
    } else {
        None
    }
}

pub struct MomentumAgent {
    cfg: MomentumAgentCfg,
    exchange: AgentId,
    hours: MarketHours,
    rng: ChaCha8Rng,
    mids: VecDeque<f64>,
    next_order: u64,
}

impl MomentumAgent {
    pub fn new(cfg: MomentumAgentCfg, exchange: AgentId, hours: MarketHours) -> Self {
        MomentumAgent {
            cfg,
            exchange,
            hours,
            rng: ChaCha8Rng::seed_from_u64(0),
            mids: VecDeque::new(),
            next_order: 0,
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

    fn act(&mut self, ctx: &mut Context<'_, MarketMessage>, stats: &BookStats) -> kernel::Result<()> {
        let Some(mid) = stats.mid else {
            return Ok(());
        };
        self.mids.push_back(mid);
        if self.mids.len() > self.cfg.long_window.max(1) {
            self.mids.pop_front();
        }
        if !self.hours.is_open(ctx.now()) {
            return Ok(());
        }
        if let Some((side, qty)) = momentum_policy(&self.cfg, &self.mids) {
            let order_id = OrderId::new(ctx.id(), self.next_order);
            self.next_order += 1;
            ctx.send(self.exchange, MarketMessage::SubmitMarket { order_id, side, qty })?;
        }
        Ok(())
    }
}

impl<A> Agent<MarketMessage, A> for MomentumAgent {
    fn name(&self) -> &str {
        "momentum"
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
        if let MarketMessage::StatsReply(stats) = body {
            self.act(ctx, &stats)?;
        }
        Ok(())
    }
}
