//! Exchange agent: owns the order book and speaks the market wire protocol.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::book::{BookError, BookSnapshot, BookStats, Depth, OrderBook, OrderId, Price, Qty, Side, Trade};
use crate::kernel::{self, Agent, AgentId, Context, RunLog};
use crate::time::{duration_nanos, SimTime};

/// Messages exchanged between trading agents and the exchange.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MarketMessage {
    // Trading instructions.
    SubmitLimit { order_id: OrderId, side: Side, qty: Qty, price: Price },
    SubmitMarket { order_id: OrderId, side: Side, qty: Qty },
    Cancel { order_id: OrderId },
    // Market data requests.
    QuerySnapshot { depth: Depth },
    QueryStats,
    Subscribe { depth: Depth, min_interval_nanos: u64 },
    Unsubscribe { depth: Depth },
    // Exchange replies.
    OrderAccepted { order_id: OrderId, resting_qty: Qty },
    OrderRejected { order_id: OrderId, reason: RejectReason },
    OrderCancelled { order_id: OrderId, cancelled_qty: Qty },
    OrderFilled { order_id: OrderId, side: Side, price: Price, qty: Qty },
    SnapshotReply(BookSnapshot),
    StatsReply(BookStats),
    MarketData { depth: Depth, snapshot: BookSnapshot },
}

impl MarketMessage {
    pub fn is_trading_instruction(&self) -> bool {
        matches!(
            self,
            MarketMessage::SubmitLimit { .. } | MarketMessage::SubmitMarket { .. } | MarketMessage::Cancel { .. }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    MarketClosed,
    NotOrderOwner,
    Invalid(String),
}

impl From<BookError> for RejectReason {
    fn from(e: BookError) -> Self {
        RejectReason::Invalid(e.to_string())
    }
}

/// Continuous session, `[open_at, close_at)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketHours {
    pub open_at: SimTime,
    pub close_at: SimTime,
}

impl MarketHours {
    pub fn regular_session() -> Self {
        MarketHours {
            open_at: SimTime::hms(9, 30, 0),
            close_at: SimTime::hms(16, 0, 0),
        }
    }

    pub fn is_open(&self, now: SimTime) -> bool {
        self.open_at <= now && now < self.close_at
    }
}

impl Default for MarketHours {
    fn default() -> Self {
        Self::regular_session()
    }
}

/// Resting liquidity placed by the exchange itself before the session opens.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BookSeed {
    pub orders: Vec<(Side, Price, Qty)>,
}

impl BookSeed {
    /// `levels` price levels per side, one tick apart, starting `half_spread`
    /// ticks from `mid`.
    pub fn ladder(mid: Price, half_spread: Price, levels: usize, qty: Qty) -> Self {
        let mut orders = Vec::with_capacity(levels * 2);
        for i in 0..levels as Price {
            orders.push((Side::Buy, mid - half_spread - i, qty));
            orders.push((Side::Sell, mid + half_spread + i, qty));
        }
        BookSeed { orders }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExchangeConfig {
    pub hours: MarketHours,
    /// When set, the book is seeded during the kernel starting phase,
    /// regardless of market hours.
    pub book_seed: Option<BookSeed>,
    /// Check book invariants after every trading instruction and log an
    /// `AUDIT` record at termination.
    #[serde(default)]
    pub audit: bool,
}

/// Invariant tracking collected when [`ExchangeConfig::audit`] is set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub checks: u64,
    pub crossed: u64,
    /// Peak number of simultaneously resting orders per owner.
    pub peak_resting: BTreeMap<u32, usize>,
}

impl Audit {
    fn observe(&mut self, book: &OrderBook) {
        self.checks += 1;
        if book.is_crossed() {
            self.crossed += 1;
        }
        let mut now: BTreeMap<u32, usize> = BTreeMap::new();
        for side in [Side::Buy, Side::Sell] {
            for o in book.resting_orders(side) {
                *now.entry(o.id.owner.0).or_default() += 1;
            }
        }
        for (owner, n) in now {
            let peak = self.peak_resting.entry(owner).or_default();
            *peak = (*peak).max(n);
        }
    }
}

pub const AUDIT_RECORD: &str = "AUDIT";

#[derive(Clone, Copy, Debug)]
struct Subscription {
    min_interval_nanos: u64,
    last_push: Option<SimTime>,
}

pub type Outbound = Vec<(AgentId, MarketMessage)>;

pub struct ExchangeAgent {
    id: Option<AgentId>,
    config: ExchangeConfig,
    book: OrderBook,
    subscriptions: BTreeMap<(AgentId, Depth), Subscription>,
    tape: Vec<Trade>,
    audit: Option<Audit>,
}

impl ExchangeAgent {
    pub fn new(config: ExchangeConfig) -> Self {
        ExchangeAgent {
            id: None,
            audit: config.audit.then(Audit::default),
            config,
            book: OrderBook::new(),
            subscriptions: BTreeMap::new(),
            tape: Vec::new(),
        }
    }

    pub fn book(&self) -> &OrderBook {
        &self.book
    }

    pub fn tape(&self) -> &[Trade] {
        &self.tape
    }

    pub fn hours(&self) -> MarketHours {
        self.config.hours
    }

    fn seed_book(&mut self, owner: AgentId, now: SimTime) {
        let Some(seed) = self.config.book_seed.take() else {
            return;
        };
        for (i, &(side, price, qty)) in seed.orders.iter().enumerate() {
            let id = OrderId::new(owner, i as u64);
            if let Ok(trades) = self.book.submit_limit(id, side, qty, price, now) {
                self.tape.extend(trades);
            }
        }
        self.config.book_seed = Some(seed);
    }

    /// Applies one trading instruction. Returns the acknowledgement (or
    /// reject) followed by two fill messages per trade, aggressor first.
    pub fn handle_trading_message(&mut self, sender: AgentId, msg: MarketMessage, now: SimTime) -> Outbound {
        let order_id = match &msg {
            MarketMessage::SubmitLimit { order_id, .. }
            | MarketMessage::SubmitMarket { order_id, .. }
            | MarketMessage::Cancel { order_id } => *order_id,
            _ => return Vec::new(),
        };
        let reject = |reason| vec![(sender, MarketMessage::OrderRejected { order_id, reason })];
        if order_id.owner != sender {
            return reject(RejectReason::NotOrderOwner);
        }
        if !self.config.hours.is_open(now) {
            return reject(RejectReason::MarketClosed);
        }

        let mut out = Vec::new();
        let trades = match msg {
            MarketMessage::SubmitLimit { side, qty, price, .. } => {
                match self.book.submit_limit(order_id, side, qty, price, now) {
                    Ok(trades) => {
                        let resting_qty = self.book.open_qty(order_id);
                        out.push((sender, MarketMessage::OrderAccepted { order_id, resting_qty }));
                        trades
                    }
                    Err(e) => return reject(e.into()),
                }
            }
            MarketMessage::SubmitMarket { side, qty, .. } => match self.book.submit_market(order_id, side, qty, now) {
                Ok(trades) => {
                    out.push((sender, MarketMessage::OrderAccepted { order_id, resting_qty: 0 }));
                    trades
                }
                Err(e) => return reject(e.into()),
            },
            MarketMessage::Cancel { .. } => {
                let cancelled_qty = self.book.cancel(order_id);
                out.push((sender, MarketMessage::OrderCancelled { order_id, cancelled_qty }));
                Vec::new()
            }
            _ => unreachable!("filtered above"),
        };
        for t in &trades {
            out.push((
                t.aggressor,
                MarketMessage::OrderFilled {
                    order_id: t.aggressor_order,
                    side: t.aggressor_side,
                    price: t.price,
                    qty: t.qty,
                },
            ));
            out.push((
                t.resting_owner,
                MarketMessage::OrderFilled {
                    order_id: t.resting_order,
                    side: t.aggressor_side.opposite(),
                    price: t.price,
                    qty: t.qty,
                },
            ));
        }
        self.tape.extend(trades);
        out
    }

    /// Read-only market data replies; `None` for messages that are not data
    /// requests.
    pub fn handle_data_request(&self, msg: &MarketMessage) -> Option<MarketMessage> {
        match *msg {
            MarketMessage::QuerySnapshot { depth } => Some(MarketMessage::SnapshotReply(self.book.snapshot(depth))),
            MarketMessage::QueryStats => Some(MarketMessage::StatsReply(self.book.stats())),
            _ => None,
        }
    }

    /// Registers (or replaces) a subscription and returns its first push.
    pub fn subscribe(&mut self, subscriber: AgentId, depth: Depth, min_interval: Duration, now: SimTime) -> Outbound {
        self.subscriptions.insert(
            (subscriber, depth),
            Subscription {
                min_interval_nanos: duration_nanos(min_interval),
                last_push: Some(now),
            },
        );
        vec![(
            subscriber,
            MarketMessage::MarketData {
                depth,
                snapshot: self.book.snapshot(depth),
            },
        )]
    }

    pub fn unsubscribe(&mut self, subscriber: AgentId, depth: Depth) {
        self.subscriptions.remove(&(subscriber, depth));
    }

    /// Pushes a fresh snapshot to every subscriber whose throttle interval
    /// has elapsed. Call after a book change.
    pub fn publish_subscriptions(&mut self, now: SimTime) -> Outbound {
        let mut out = Vec::new();
        for (&(subscriber, depth), sub) in self.subscriptions.iter_mut() {
            let due = match sub.last_push {
                None => true,
                Some(last) => now.nanos().saturating_sub(last.nanos()) >= sub.min_interval_nanos,
            };
            if due {
                sub.last_push = Some(now);
                out.push((
                    subscriber,
                    MarketMessage::MarketData {
                        depth,
                        snapshot: self.book.snapshot(depth),
                    },
                ));
            }
        }
        out
    }
}

impl<A> Agent<MarketMessage, A> for ExchangeAgent {
    fn name(&self) -> &str {
        "exchange"
    }

    fn kernel_initializing(&mut self, ctx: &mut Context<'_, MarketMessage>) -> kernel::Result<()> {
        self.id = Some(ctx.id());
        Ok(())
    }

    fn kernel_starting(&mut self, ctx: &mut Context<'_, MarketMessage>) -> kernel::Result<()> {
        self.seed_book(ctx.id(), ctx.now());
        Ok(())
    }

    fn receive_message(
        &mut self,
        ctx: &mut Context<'_, MarketMessage>,
        sender: AgentId,
        body: MarketMessage,
    ) -> kernel::Result<()> {
        let now = ctx.now();
        let out = match body {
            m if m.is_trading_instruction() => {
                let revision = self.book.revision();
                let mut out = self.handle_trading_message(sender, m, now);
                if let Some(audit) = self.audit.as_mut() {
                    audit.observe(&self.book);
                }
                if self.book.revision() != revision {
                    out.extend(self.publish_subscriptions(now));
                }
                out
            }
            MarketMessage::Subscribe { depth, min_interval_nanos } => {
                self.subscribe(sender, depth, Duration::from_nanos(min_interval_nanos), now)
            }
            MarketMessage::Unsubscribe { depth } => {
                self.unsubscribe(sender, depth);
                Vec::new()
            }
            ref m => self.handle_data_request(m).map(|r| vec![(sender, r)]).unwrap_or_default(),
        };
        for (recipient, msg) in out {
            ctx.send(recipient, msg)?;
        }
        Ok(())
    }

    fn kernel_terminating(&mut self, ctx: &mut Context<'_, MarketMessage>) -> kernel::Result<()> {
        for t in &self.tape {
            let row = TapeRow::from(t);
            ctx.log(TRADE_RECORD, serde_json::json!(row));
        }
        let fin = self.book.snapshot(Depth::All);
        ctx.log("BOOK_FINAL", serde_json::json!(fin));
        if let Some(audit) = &self.audit {
            ctx.log(AUDIT_RECORD, serde_json::json!(audit));
        }
        Ok(())
    }
}

pub const TRADE_RECORD: &str = "TRADE";

/// One trade tape row: `(time_nanos, price_cents, qty, aggressor_id, resting_id)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapeRow(pub u64, pub Price, pub Qty, pub u32, pub u32);

impl From<&Trade> for TapeRow {
    fn from(t: &Trade) -> Self {
        TapeRow(t.at.nanos(), t.price, t.qty, t.aggressor.0, t.resting_owner.0)
    }
}

/// Trade tape rows recorded by every exchange in the run, in execution order.
pub fn trade_tape(log: &RunLog) -> Vec<TapeRow> {
    log.records_of_kind(TRADE_RECORD)
        .filter_map(|(_, r)| serde_json::from_value(r.data.clone()).ok())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX: AgentId = AgentId(0);
    const A: AgentId = AgentId(1);
    const B: AgentId = AgentId(2);

    fn open_exchange() -> ExchangeAgent {
        ExchangeAgent::new(ExchangeConfig::default())
    }

    fn at_10() -> SimTime {
        SimTime::hms(10, 0, 0)
    }

    fn limit(owner: AgentId, seq: u64, side: Side, qty: Qty, price: Price) -> MarketMessage {
        MarketMessage::SubmitLimit { order_id: OrderId::new(owner, seq), side, qty, price }
    }

    #[test]
    fn market_order_fills_both_counterparties() {
        let mut ex = open_exchange();
        ex.handle_trading_message(A, limit(A, 1, Side::Sell, 100, 101), at_10());
        let out = ex.handle_trading_message(
            B,
            MarketMessage::SubmitMarket { order_id: OrderId::new(B, 1), side: Side::Buy, qty: 100 },
            at_10(),
        );
        assert_eq!(
            out,
            vec![
                (B, MarketMessage::OrderAccepted { order_id: OrderId::new(B, 1), resting_qty: 0 }),
                (B, MarketMessage::OrderFilled { order_id: OrderId::new(B, 1), side: Side::Buy, price: 101, qty: 100 }),
                (A, MarketMessage::OrderFilled { order_id: OrderId::new(A, 1), side: Side::Sell, price: 101, qty: 100 }),
            ]
        );
        assert_eq!(ex.tape().len(), 1);
    }

    #[test]
    fn closed_market_rejects_and_leaves_book_alone() {
        let mut ex = open_exchange();
        let out = ex.handle_trading_message(A, limit(A, 1, Side::Buy, 10, 99), SimTime::hms(9, 20, 0));
        assert_eq!(
            out,
            vec![(A, MarketMessage::OrderRejected { order_id: OrderId::new(A, 1), reason: RejectReason::MarketClosed })]
        );
        assert_eq!(ex.book().resting_count(), 0);
        // Close is exclusive.
        let out = ex.handle_trading_message(A, limit(A, 2, Side::Buy, 10, 99), SimTime::hms(16, 0, 0));
        assert!(matches!(out[0].1, MarketMessage::OrderRejected { .. }));
    }

    #[test]
    fn cancel_of_unknown_order_acks_zero() {
        let mut ex = open_exchange();
        let id = OrderId::new(A, 42);
        let out = ex.handle_trading_message(A, MarketMessage::Cancel { order_id: id }, at_10());
        assert_eq!(out, vec![(A, MarketMessage::OrderCancelled { order_id: id, cancelled_qty: 0 })]);
    }

    #[test]
    fn malformed_or_foreign_orders_are_rejected() {
        let mut ex = open_exchange();
        let out = ex.handle_trading_message(A, limit(A, 1, Side::Buy, 0, 99), at_10());
        assert!(matches!(out[0].1, MarketMessage::OrderRejected { reason: RejectReason::Invalid(_), .. }));
        let out = ex.handle_trading_message(B, limit(A, 2, Side::Buy, 10, 99), at_10());
        assert!(matches!(out[0].1, MarketMessage::OrderRejected { reason: RejectReason::NotOrderOwner, .. }));
        assert_eq!(ex.book().resting_count(), 0);
    }

    #[test]
    fn data_requests_are_pure() {
        let mut ex = open_exchange();
        let stats = ex.handle_data_request(&MarketMessage::QueryStats).unwrap();
        let MarketMessage::StatsReply(s) = stats else { panic!() };
        assert_eq!((s.mid, s.spread), (None, None));

        for (i, p) in [99, 98, 97, 96].into_iter().enumerate() {
            ex.handle_trading_message(A, limit(A, i as u64, Side::Buy, 10, p), at_10());
        }
        let q = MarketMessage::QuerySnapshot { depth: Depth::Top(3) };
        let first = ex.handle_data_request(&q).unwrap();
        let MarketMessage::SnapshotReply(snap) = &first else { panic!() };
        assert_eq!(snap.bids.len(), 3);
        assert_eq!(ex.handle_data_request(&q).unwrap(), first);
        assert_eq!(ex.handle_data_request(&MarketMessage::Cancel { order_id: OrderId::new(A, 1) }), None);
    }

    #[test]
    fn subscription_throttling() {
        let mut ex = open_exchange();
        let t0 = at_10();
        assert!(ex.publish_subscriptions(t0).is_empty());

        ex.subscribe(A, Depth::All, Duration::ZERO, t0);
        ex.subscribe(B, Depth::Top(1), Duration::from_secs(1), t0);
        let t1 = t0 + Duration::from_nanos(1);
        let t2 = t0 + Duration::from_nanos(2);
        let pushes_a = |out: &Outbound| out.iter().filter(|(r, _)| *r == A).count();
        let pushes_b = |out: &Outbound| out.iter().filter(|(r, _)| *r == B).count();
        let o1 = ex.publish_subscriptions(t1);
        let o2 = ex.publish_subscriptions(t2);
        assert_eq!((pushes_a(&o1), pushes_a(&o2)), (1, 1));
        assert_eq!(pushes_b(&o1) + pushes_b(&o2), 0);
        let o3 = ex.publish_subscriptions(t0 + Duration::from_secs(1));
        assert_eq!(pushes_b(&o3), 1);
    }

    #[test]
    fn seed_ladder_is_uncrossed() {
        let seed = BookSeed::ladder(10_000, 1, 5, 100);
        let mut ex = ExchangeAgent::new(ExchangeConfig { book_seed: Some(seed), ..Default::default() });
        ex.seed_book(EX, SimTime::hms(9, 0, 0));
        let s = ex.book().stats();
        assert_eq!((s.best_bid, s.best_ask), (Some(9_999), Some(10_001)));
        assert_eq!(ex.book().snapshot(Depth::All).asks.len(), 5);
    }
}
