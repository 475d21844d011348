use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::exponential_delay;
use crate::book::{OrderId, Qty, Side};
use crate::exchange::{MarketHours, MarketMessage};
use crate::kernel::{self, Agent, AgentId, Context};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseAgentCfg {
    #[serde(with = "crate::serde_duration")]
    pub mean_interarrival: Duration,
    pub min_qty: Qty,
    pub max_qty: Qty,
}

impl Default for NoiseAgentCfg {
    fn default() -> Self {
        NoiseAgentCfg {
            mean_interarrival: Duration::from_secs(10),
            min_qty: 1,
            max_qty: 20,
        }
    }
}

/// Coin-flip side, uniform size. Nothing while the market is closed.
pub fn noise_policy<R: Rng + ?Sized>(cfg: &NoiseAgentCfg, market_open: bool, rng: &mut R) -> Option<(Side, Qty)> {
    if !market_open {
        return None;
    }
    let side = if rng.random_bool(0.5) { Side::Buy } else { Side::Sell };
    Some((side, rng.random_range(cfg.min_qty..=cfg.max_qty)))
}

/// Sends market orders of random side and size at exponential intervals.
pub struct NoiseAgent {
    cfg: NoiseAgentCfg,
    exchange: AgentId,
    hours: MarketHours,
    rng: ChaCha8Rng,
    next_order: u64,
}

impl NoiseAgent {
    pub fn new(cfg: NoiseAgentCfg, exchange: AgentId, hours: MarketHours) -> Self {
        NoiseAgent {
            cfg,
            exchange,
            hours,
            rng: ChaCha8Rng::seed_from_u64(0),
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
}

impl<A> Agent<MarketMessage, A> for NoiseAgent {
    fn name(&self) -> &str {
        "noise"
    }

    fn kernel_starting(&mut self, ctx: &mut Context<'_, MarketMessage>) -> kernel::Result<()> {
        self.rng = ChaCha8Rng::seed_from_u64(ctx.agent_seed());
        self.schedule_next(ctx)
    }

    fn receive_message(&mut self, _: &mut Context<'_, MarketMessage>, _: AgentId, _: MarketMessage) -> kernel::Result<()> {
        Ok(())
    }

    fn wakeup(&mut self, ctx: &mut Context<'_, MarketMessage>) -> kernel::Result<()> {
        if let Some((side, qty)) = noise_policy(&self.cfg, self.hours.is_open(ctx.now()), &mut self.rng) {
            let order_id = OrderId::new(ctx.id(), self.next_order);
            self.next_order += 1;
            ctx.send(self.exchange, MarketMessage::SubmitMarket { order_id, side, qty })?;
        }
        self.schedule_next(ctx)
    }
}
