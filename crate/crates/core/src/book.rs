//! Price/time-priority limit order book.
//!
//! Prices are integer cents. Each side is a ladder of price levels holding
//! FIFO queues of resting orders. An incoming order crosses against the
//! opposite side best price first and, within a level, oldest order first;
//! every trade prints at the resting order's price.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::AgentId;
use crate::time::SimTime;

/// Integer cents.
pub type Price = i64;
/// Shares.
pub type Qty = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }

    /// +1 for buys, -1 for sells.
    pub fn sign(self) -> i64 {
        match self {
            Side::Buy => 1,
            Side::Sell => -1,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Buy => "BUY",
            Side::Sell => "SELL",
        })
    }
}

/// Order ids are scoped by owner, so agents can mint them without
/// coordinating with the exchange.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrderId {
    pub owner: AgentId,
    pub seq: u64,
}

impl OrderId {
    pub fn new(owner: AgentId, seq: u64) -> Self {
        OrderId { owner, seq }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Order {
    pub id: OrderId,
    pub side: Side,
    pub qty_open: Qty,
    /// Absent only for market orders, which never rest.
    pub limit_price: Option<Price>,
    pub entered_at: SimTime,
    pub entry_seq: u64,
}

impl Order {
    pub fn owner(&self) -> AgentId {
        self.id.owner
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trade {
    pub price: Price,
    pub qty: Qty,
    pub aggressor: AgentId,
    pub resting_owner: AgentId,
    pub aggressor_order: OrderId,
    pub resting_order: OrderId,
    pub aggressor_side: Side,
    pub at: SimTime,
}

#[derive(Clone, Debug, Default)]
pub struct PriceLevel {
    orders: VecDeque<Order>,
    volume: Qty,
}

impl PriceLevel {
    pub fn volume(&self) -> Qty {
        self.volume
    }

    pub fn orders(&self) -> impl Iterator<Item = &Order> {
        self.orders.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }
}

/// How many price levels per side a snapshot covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Depth {
    Top(usize),
    All,
}

impl Depth {
    fn limit(self) -> usize {
        match self {
            Depth::Top(n) => n,
            Depth::All => usize::MAX,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookSnapshot {
    /// `(price, volume)`, best first.
    pub bids: Vec<(Price, Qty)>,
    pub asks: Vec<(Price, Qty)>,
    pub last_transaction: Option<Price>,
}

impl BookSnapshot {
    pub fn best_bid(&self) -> Option<Price> {
        self.bids.first().map(|l| l.0)
    }

    pub fn best_ask(&self) -> Option<Price> {
        self.asks.first().map(|l| l.0)
    }

    pub fn mid(&self) -> Option<f64> {
        mid_of(self.best_bid(), self.best_ask())
    }

    pub fn spread(&self) -> Option<Price> {
        Some(self.best_ask()? - self.best_bid()?)
    }

    /// The same snapshot cut down to `depth` levels per side.
    pub fn truncated(&self, depth: Depth) -> BookSnapshot {
        let n = depth.limit();
        BookSnapshot {
            bids: self.bids.iter().take(n).copied().collect(),
            asks: self.asks.iter().take(n).copied().collect(),
            last_transaction: self.last_transaction,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BookStats {
    pub best_bid: Option<Price>,
    pub best_ask: Option<Price>,
    pub mid: Option<f64>,
    pub spread: Option<Price>,
    pub last_transaction: Option<Price>,
    /// Total resting volume per side.
    pub bid_depth: Qty,
    pub ask_depth: Qty,
}

fn mid_of(bid: Option<Price>, ask: Option<Price>) -> Option<f64> {
    Some((bid? + ask?) as f64 / 2.0)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BookError {
    #[error("order quantity must be positive")]
    NonPositiveQty,
    #[error("limit price must be positive, got {0}")]
    NonPositivePrice(Price),
    #[error("order id {0:?} is already in use")]
    DuplicateOrderId(OrderId),
}

#[derive(Clone, Debug, Default)]
pub struct OrderBook {
    bids: BTreeMap<Price, PriceLevel>,
    asks: BTreeMap<Price, PriceLevel>,
    resting: HashMap<OrderId, (Side, Price)>,
    last_transaction: Option<Price>,
    next_entry_seq: u64,
    revision: u64,
}

impl OrderBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Crosses what it can, then rests the remainder at the tail of its
    /// price level. Trades are returned in execution order.
    pub fn submit_limit(
        &mut self,
        id: OrderId,
        side: Side,
        qty: Qty,
        price: Price,
        now: SimTime,
    ) -> Result<Vec<Trade>, BookError> {
        if qty == 0 {
            return Err(BookError::NonPositiveQty);
        }
        if price <= 0 {
            return Err(BookError::NonPositivePrice(price));
        }
        if self.resting.contains_key(&id) {
            return Err(BookError::DuplicateOrderId(id));
        }
        let (trades, remaining) = self.cross(id, side, qty, Some(price), now);
        if remaining > 0 {
            let entry_seq = self.next_entry_seq;
            self.next_entry_seq += 1;
            let level = self.side_mut(side).entry(price).or_default();
            level.volume += remaining;
            level.orders.push_back(Order {
                id,
                side,
                qty_open: remaining,
                limit_price: Some(price),
                entered_at: now,
                entry_seq,
            });
            self.resting.insert(id, (side, price));
            self.revision += 1;
        }
        Ok(trades)
    }

    /// Consumes the opposite side best first; any unfilled remainder is
    /// dropped.
    pub fn submit_market(
        &mut self,
        id: OrderId,
        side: Side,
        qty: Qty,
        now: SimTime,
    ) -> Result<Vec<Trade>, BookError> {
        if qty == 0 {
            return Err(BookError::NonPositiveQty);
        }
        Ok(self.cross(id, side, qty, None, now).0)
    }

    /// Removes a resting order, returning its open quantity. Unknown or
    /// already-filled ids return 0.
    pub fn cancel(&mut self, id: OrderId) -> Qty {
        let Some((side, price)) = self.resting.remove(&id) else {
            return 0;
        };
        let ladder = self.side_mut(side);
        let level = ladder.get_mut(&price).expect("indexed level exists");
        let pos = level
            .orders
            .iter()
            .position(|o| o.id == id)
            .expect("indexed order exists");
        let order = level.orders.remove(pos).expect("position in range");
        level.volume -= order.qty_open;
        if level.orders.is_empty() {
            ladder.remove(&price);
        }
        self.revision += 1;
        order.qty_open
    }

    fn cross(
        &mut self,
        id: OrderId,
        side: Side,
        mut remaining: Qty,
        limit: Option<Price>,
        now: SimTime,
    ) -> (Vec<Trade>, Qty) {
        let mut trades = Vec::new();
        while remaining > 0 {
            let ladder = match side {
                Side::Buy => &mut self.asks,
                Side::Sell => &mut self.bids,
            };
            let entry = match side {
                Side::Buy => ladder.first_entry(),
                Side::Sell => ladder.last_entry(),
            };
            let Some(mut entry) = entry else { break };
            let price = *entry.key();
            let crosses = match (side, limit) {
                (_, None) => true,
                (Side::Buy, Some(l)) => price <= l,
                (Side::Sell, Some(l)) => price >= l,
            };
            if !crosses {
                break;
            }
            let level = entry.get_mut();
            while remaining > 0 {
                let Some(resting) = level.orders.front_mut() else { break };
                let qty = remaining.min(resting.qty_open);
                resting.qty_open -= qty;
                level.volume -= qty;
                remaining -= qty;
                trades.push(Trade {
                    price,
                    qty,
                    aggressor: id.owner,
                    resting_owner: resting.owner(),
                    aggressor_order: id,
                    resting_order: resting.id,
                    aggressor_side: side,
                    at: now,
                });
                if resting.qty_open == 0 {
                    let done = level.orders.pop_front().expect("front exists");
                    self.resting.remove(&done.id);
                }
            }
            if level.orders.is_empty() {
                entry.remove();
            }
            self.last_transaction = Some(price);
            self.revision += 1;
        }
        (trades, remaining)
    }

    fn side_mut(&mut self, side: Side) -> &mut BTreeMap<Price, PriceLevel> {
        match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        }
    }

    pub fn snapshot(&self, depth: Depth) -> BookSnapshot {
        let n = depth.limit();
        BookSnapshot {
            bids: self.bids.iter().rev().take(n).map(|(&p, l)| (p, l.volume)).collect(),
            asks: self.asks.iter().take(n).map(|(&p, l)| (p, l.volume)).collect(),
            last_transaction: self.last_transaction,
        }
    }

    pub fn stats(&self) -> BookStats {
        let best_bid = self.best_bid();
        let best_ask = self.best_ask();
        BookStats {
            best_bid,
            best_ask,
            mid: mid_of(best_bid, best_ask),
            spread: best_bid.zip(best_ask).map(|(b, a)| a - b),
            last_transaction: self.last_transaction,
            bid_depth: self.total_volume(Side::Buy),
            ask_depth: self.total_volume(Side::Sell),
        }
    }

    pub fn best_bid(&self) -> Option<Price> {
        self.bids.keys().next_back().copied()
    }

    pub fn best_ask(&self) -> Option<Price> {
        self.asks.keys().next().copied()
    }

    /// Bumped by every mutation; equal revisions mean an unchanged book.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn last_transaction(&self) -> Option<Price> {
        self.last_transaction
    }

    pub fn open_qty(&self, id: OrderId) -> Qty {
        let Some(&(side, price)) = self.resting.get(&id) else {
            return 0;
        };
        let ladder = match side {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        };
        ladder[&price]
            .orders
            .iter()
            .find(|o| o.id == id)
            .map_or(0, |o| o.qty_open)
    }

    /// Resting orders of one side, best price first then time priority.
    pub fn resting_orders(&self, side: Side) -> Vec<&Order> {
        match side {
            Side::Buy => self.bids.values().rev().flat_map(|l| l.orders.iter()).collect(),
            Side::Sell => self.asks.values().flat_map(|l| l.orders.iter()).collect(),
        }
    }

    pub fn resting_count(&self) -> usize {
        self.resting.len()
    }

    pub fn total_volume(&self, side: Side) -> Qty {
        let ladder = match side {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        };
        ladder.values().map(|l| l.volume).sum()
    }

    pub fn is_crossed(&self) -> bool {
        matches!((self.best_bid(), self.best_ask()), (Some(b), Some(a)) if b >= a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: AgentId = AgentId(1);
    const B: AgentId = AgentId(2);
    const C: AgentId = AgentId(3);

    fn id(owner: AgentId, seq: u64) -> OrderId {
        OrderId::new(owner, seq)
    }

    fn fills(trades: &[Trade]) -> Vec<(Qty, Price)> {
        trades.iter().map(|t| (t.qty, t.price)).collect()
    }

    fn two_level_asks() -> OrderBook {
        let mut book = OrderBook::new();
        book.submit_limit(id(A, 1), Side::Sell, 100, 101, SimTime::ZERO).unwrap();
        book.submit_limit(id(A, 2), Side::Sell, 50, 102, SimTime::ZERO).unwrap();
        book
    }

    #[test]
    fn limit_into_empty_book_rests() {
        let mut book = OrderBook::new();
        let trades = book.submit_limit(id(A, 1), Side::Buy, 100, 99, SimTime::ZERO).unwrap();
        assert!(trades.is_empty());
        assert_eq!(book.snapshot(Depth::All).bids, vec![(99, 100)]);
    }

    #[test]
    fn marketable_limit_walks_then_rests() {
        let mut book = two_level_asks();
        let trades = book.submit_limit(id(B, 1), Side::Buy, 120, 102, SimTime::ZERO).unwrap();
        assert_eq!(fills(&trades), [(100, 101), (20, 102)]);
        assert_eq!(book.snapshot(Depth::All).asks, vec![(102, 30)]);
        assert!(book.snapshot(Depth::All).bids.is_empty());
    }

    #[test]
    fn fifo_within_level() {
        let mut book = OrderBook::new();
        book.submit_limit(id(A, 1), Side::Buy, 60, 100, SimTime::ZERO).unwrap();
        book.submit_limit(id(B, 1), Side::Buy, 60, 100, SimTime::ZERO).unwrap();
        let trades = book.submit_limit(id(C, 1), Side::Sell, 100, 100, SimTime::ZERO).unwrap();
        assert_eq!(trades[0].resting_owner, A);
        assert_eq!(trades[0].qty, 60);
        assert_eq!(trades[1].resting_owner, B);
        assert_eq!(trades[1].qty, 40);
        assert_eq!(book.open_qty(id(B, 1)), 20);
    }

    #[test]
    fn market_orders() {
        let mut book = two_level_asks();
        let trades = book.submit_market(id(B, 1), Side::Buy, 120, SimTime::ZERO).unwrap();
        assert_eq!(fills(&trades), [(100, 101), (20, 102)]);

        let mut empty = OrderBook::new();
        assert!(empty.submit_market(id(B, 1), Side::Buy, 50, SimTime::ZERO).unwrap().is_empty());

        let mut book = OrderBook::new();
        book.submit_limit(id(A, 1), Side::Buy, 100, 99, SimTime::ZERO).unwrap();
        let trades = book.submit_market(id(B, 1), Side::Sell, 100, SimTime::ZERO).unwrap();
        assert_eq!(fills(&trades), [(100, 99)]);
        assert_eq!(book.total_volume(Side::Buy), 0);
        assert!(book.snapshot(Depth::All).bids.is_empty());
    }

    #[test]
    fn market_remainder_is_discarded() {
        let mut book = two_level_asks();
        let trades = book.submit_market(id(B, 1), Side::Buy, 500, SimTime::ZERO).unwrap();
        assert_eq!(trades.iter().map(|t| t.qty).sum::<Qty>(), 150);
        assert_eq!(book.resting_count(), 0);
        assert_eq!(book.open_qty(id(B, 1)), 0);
    }

    #[test]
    fn invalid_orders_leave_book_unchanged() {
        let mut book = two_level_asks();
        assert_eq!(
            book.submit_limit(id(B, 1), Side::Buy, 0, 101, SimTime::ZERO),
            Err(BookError::NonPositiveQty)
        );
        assert_eq!(
            book.submit_limit(id(B, 1), Side::Buy, 10, 0, SimTime::ZERO),
            Err(BookError::NonPositivePrice(0))
        );
        assert_eq!(
            book.submit_market(id(B, 1), Side::Buy, 0, SimTime::ZERO),
            Err(BookError::NonPositiveQty)
        );
        assert_eq!(
            book.submit_limit(id(A, 1), Side::Sell, 10, 105, SimTime::ZERO),
            Err(BookError::DuplicateOrderId(id(A, 1)))
        );
        assert_eq!(book.snapshot(Depth::All).asks, vec![(101, 100), (102, 50)]);
    }

    #[test]
    fn cancel_semantics() {
        let mut book = two_level_asks();
        book.submit_limit(id(B, 1), Side::Buy, 120, 102, SimTime::ZERO).unwrap();
        assert_eq!(book.cancel(id(A, 2)), 30);
        assert!(book.snapshot(Depth::All).asks.is_empty());
        assert_eq!(book.cancel(id(A, 2)), 0);
        assert_eq!(book.cancel(id(C, 99)), 0);

        let mut book = OrderBook::new();
        book.submit_limit(id(A, 1), Side::Buy, 100, 100, SimTime::ZERO).unwrap();
        book.submit_market(id(B, 1), Side::Sell, 50, SimTime::ZERO).unwrap();
        assert_eq!(book.cancel(id(A, 1)), 50);
    }

    #[test]
    fn snapshot_depth() {
        let mut book = OrderBook::new();
        book.submit_limit(id(A, 1), Side::Buy, 10, 100, SimTime::ZERO).unwrap();
        book.submit_limit(id(A, 2), Side::Buy, 5, 99, SimTime::ZERO).unwrap();
        assert_eq!(book.snapshot(Depth::Top(1)).bids, vec![(100, 10)]);
        assert_eq!(book.snapshot(Depth::All).bids, vec![(100, 10), (99, 5)]);
        assert_eq!(OrderBook::new().snapshot(Depth::Top(3)), BookSnapshot::default());
    }

    #[test]
    fn stats() {
        let mut book = OrderBook::new();
        book.submit_limit(id(A, 1), Side::Buy, 10, 99, SimTime::ZERO).unwrap();
        let s = book.stats();
        assert_eq!((s.mid, s.spread), (None, None));
        book.submit_limit(id(A, 2), Side::Sell, 10, 101, SimTime::ZERO).unwrap();
        let s = book.stats();
        assert_eq!(s.mid, Some(100.0));
        assert_eq!(s.spread, Some(2));
        assert_eq!(s.last_transaction, None);
        book.submit_market(id(B, 1), Side::Buy, 5, SimTime::ZERO).unwrap();
        assert_eq!(book.stats().last_transaction, Some(101));
    }
}
