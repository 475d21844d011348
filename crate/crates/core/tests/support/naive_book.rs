//! Quadratic reference matcher used as an oracle for `OrderBook`.
//!
//! Keeps every resting order in one flat list and, for each fill, scans the
//! whole list for the best-priced, earliest opposite order. Shares no code
//! with the production book.

#![allow(dead_code)]

use std::collections::BTreeMap;

use marketgym_core::book::{OrderId, Price, Qty, Side};

#[derive(Clone, Debug)]
struct Resting {
    id: OrderId,
    side: Side,
    qty: Qty,
    price: Price,
    arrival: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NaiveFill {
    pub price: Price,
    pub qty: Qty,
    pub aggressor_order: OrderId,
    pub resting_order: OrderId,
}

#[derive(Default)]
pub struct NaiveBook {
    orders: Vec<Resting>,
    arrivals: u64,
    pub last_transaction: Option<Price>,
}

impl NaiveBook {
    pub fn limit(&mut self, id: OrderId, side: Side, qty: Qty, price: Price) -> Vec<NaiveFill> {
        if qty == 0 || price <= 0 || self.orders.iter().any(|o| o.id == id) {
            return Vec::new();
        }
        let (fills, left) = self.take(id, side, qty, Some(price));
        if left > 0 {
            self.arrivals += 1;
            self.orders.push(Resting { id, side, qty: left, price, arrival: self.arrivals });
        }
        fills
    }

    pub fn market(&mut self, id: OrderId, side: Side, qty: Qty) -> Vec<NaiveFill> {
        if qty == 0 {
            return Vec::new();
        }
        self.take(id, side, qty, None).0
    }

    pub fn cancel(&mut self, id: OrderId) -> Qty {
        match self.orders.iter().position(|o| o.id == id) {
            Some(i) => self.orders.remove(i).qty,
            None => 0,
        }
    }

    fn take(&mut self, id: OrderId, side: Side, mut qty: Qty, limit: Option<Price>) -> (Vec<NaiveFill>, Qty) {
        let mut fills = Vec::new();
        while qty > 0 {
            let mut best: Option<usize> = None;
            for (i, o) in self.orders.iter().enumerate() {
                if o.side == side {
                    continue;
                }
                let acceptable = match (side, limit) {
                    (_, None) => true,
                    (Side::Buy, Some(l)) => o.price <= l,
                    (Side::Sell, Some(l)) => o.price >= l,
                };
                if !acceptable {
                    continue;
                }
                best = match best {
                    None => Some(i),
                    Some(j) => {
                        let b = &self.orders[j];
                        let better_price = match side {
                            Side::Buy => o.price < b.price,
                            Side::Sell => o.price > b.price,
                        };
                        if better_price || (o.price == b.price && o.arrival < b.arrival) {
                            Some(i)
                        } else {
                            Some(j)
                        }
                    }
                };
            }
            let Some(i) = best else { break };
            let q = qty.min(self.orders[i].qty);
            qty -= q;
            self.orders[i].qty -= q;
            let price = self.orders[i].price;
            fills.push(NaiveFill { price, qty: q, aggressor_order: id, resting_order: self.orders[i].id });
            self.last_transaction = Some(price);
            if self.orders[i].qty == 0 {
                self.orders.remove(i);
            }
        }
        (fills, qty)
    }

    /// `(bids best first, asks best first)` aggregated per price.
    pub fn levels(&self) -> (Vec<(Price, Qty)>, Vec<(Price, Qty)>) {
        let mut bids = BTreeMap::new();
        let mut asks = BTreeMap::new();
        for o in &self.orders {
            let ladder = if o.side == Side::Buy { &mut bids } else { &mut asks };
            *ladder.entry(o.price).or_insert(0) += o.qty;
        }
        (bids.into_iter().rev().collect(), asks.into_iter().collect())
    }

    pub fn open_qty(&self, id: OrderId) -> Qty {
        self.orders.iter().find(|o| o.id == id).map_or(0, |o| o.qty)
    }
}

#[derive(Clone, Debug)]
pub enum Op {
    Limit { id: OrderId, side: Side, qty: Qty, price: Price },
    Market { id: OrderId, side: Side, qty: Qty },
    Cancel(OrderId),
}

/// Random operation stream over `ticks` price levels starting at `base`.
pub fn random_ops(seed: u64, n: usize, base: Price, ticks: i64) -> Vec<Op> {
    use rand::{Rng, SeedableRng};
    use marketgym_core::kernel::AgentId;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut issued: Vec<OrderId> = Vec::new();
    let mut ops = Vec::with_capacity(n);
    for i in 0..n {
        let owner = AgentId(rng.random_range(0..6));
        let id = OrderId::new(owner, i as u64);
        let side = if rng.random_bool(0.5) { Side::Buy } else { Side::Sell };
        let roll: f64 = rng.random();
        let op = if roll < 0.55 {
            issued.push(id);
            Op::Limit { id, side, qty: rng.random_range(1..=100), price: base + rng.random_range(0..ticks) }
        } else if roll < 0.75 {
            Op::Market { id, side, qty: rng.random_range(1..=150) }
        } else if !issued.is_empty() && roll < 0.97 {
            Op::Cancel(issued[rng.random_range(0..issued.len())])
        } else {
            Op::Cancel(OrderId::new(owner, 1_000_000 + i as u64))
        };
        ops.push(op);
    }
    ops
}

/// Runs `ops` through both books; `Err` describes the first divergence.
pub fn compare_with_reference(ops: &[Op]) -> Result<(), String> {
    use marketgym_core::book::{Depth, OrderBook};
    use marketgym_core::time::SimTime;

    let mut book = OrderBook::new();
    let mut naive = NaiveBook::default();
    for (step, op) in ops.iter().enumerate() {
        let now = SimTime::from_nanos(step as u64);
        let (got, want) = match *op {
            Op::Limit { id, side, qty, price } => {
                (book.submit_limit(id, side, qty, price, now).unwrap_or_default(), naive.limit(id, side, qty, price))
            }
            Op::Market { id, side, qty } => {
                (book.submit_market(id, side, qty, now).unwrap_or_default(), naive.market(id, side, qty))
            }
            Op::Cancel(id) => {
                let (a, b) = (book.cancel(id), naive.cancel(id));
                if a != b {
                    return Err(format!("op {step}: cancel returned {a}, reference {b}"));
                }
                (Vec::new(), Vec::new())
            }
        };
        let got: Vec<NaiveFill> = got
            .into_iter()
            .map(|t| NaiveFill {
                price: t.price,
                qty: t.qty,
                aggressor_order: t.aggressor_order,
                resting_order: t.resting_order,
            })
            .collect();
        if got != want {
            return Err(format!("op {step} {op:?}: trades {got:?} vs reference {want:?}"));
        }
        if book.is_crossed() {
            return Err(format!("op {step}: book crossed"));
        }
    }
    let snap = book.snapshot(Depth::All);
    let (bids, asks) = naive.levels();
    if snap.bids != bids || snap.asks != asks {
        return Err(format!("final book differs: {snap:?} vs {bids:?}/{asks:?}"));
    }
    if snap.last_transaction != naive.last_transaction {
        return Err("last transaction differs".into());
    }
    for op in ops {
        if let Op::Limit { id, .. } = *op {
            if book.open_qty(id) != naive.open_qty(id) {
                return Err(format!("open qty of {id:?} differs"));
            }
        }
    }
    Ok(())
}
