//! Runs one simulated trading day with the default background population
//! and prints a per-half-hour summary of the book.
//!
//! `cargo run --release -p marketgym-core --example day_summary -- [seed]`

use std::time::Instant;

use marketgym_core::background::{build_market, PopulationSpec};
use marketgym_core::book::Depth;
use marketgym_core::exchange::{trade_tape, MarketHours, MarketMessage};
use marketgym_core::kernel::{self, Agent, AgentId, Context, Kernel};
use marketgym_core::time::SimTime;

struct Watcher {
    exchange: AgentId,
}

impl Agent<MarketMessage> for Watcher {
    fn name(&self) -> &str {
        "watcher"
    }

    fn kernel_starting(&mut self, ctx: &mut Context<'_, MarketMessage>) -> kernel::Result<()> {
        ctx.schedule_wakeup(SimTime::hms(9, 31, 0))
    }

    fn wakeup(&mut self, ctx: &mut Context<'_, MarketMessage>) -> kernel::Result<()> {
        ctx.send(self.exchange, MarketMessage::QuerySnapshot { depth: Depth::All })?;
        ctx.schedule_wakeup(ctx.now() + std::time::Duration::from_secs(1800))
    }

    fn receive_message(&mut self, ctx: &mut Context<'_, MarketMessage>, _: AgentId, body: MarketMessage) -> kernel::Result<()> {
        if let MarketMessage::SnapshotReply(snap) = body {
            let bid_qty: u64 = snap.bids.iter().map(|l| l.1).sum();
            let ask_qty: u64 = snap.asks.iter().map(|l| l.1).sum();
            println!(
                "{}  bid {:?} ask {:?} spread {:?} last {:?}  depth {}x{} levels {}x{}",
                ctx.now(),
                snap.best_bid(),
                snap.best_ask(),
                snap.spread(),
                snap.last_transaction,
                bid_qty,
                ask_qty,
                snap.bids.len(),
                snap.asks.len()
            );
        }
        Ok(())
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let spec = PopulationSpec::default();
    let mut market = build_market::<()>(&spec, seed, SimTime::hms(9, 0, 0), SimTime::hms(16, 0, 0), MarketHours::default())?;
    market.config.add_agent(Box::new(Watcher { exchange: market.exchange }));
    let started = Instant::now();
    let mut kernel = Kernel::build(market.config)?;
    kernel.run_until_interrupt(None)?;
    let log = kernel.terminate()?;
    let tape = trade_tape(&log);
    println!(
        "trades {}  messages {}  wall {:.2?}",
        tape.len(),
        log.stats.delivered,
        started.elapsed()
    );
    Ok(())
}
