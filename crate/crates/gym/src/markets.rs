//! The experimental agent living inside the market simulation.
//!
//! It follows a fixed wakeup clock, interrupts the kernel at every wakeup
//! with a [`RawState`], and between interruptions executes the order
//! commands injected from outside.

use std::collections::{BTreeMap, VecDeque};
use std::time::Duration;

use marketgym_core::book::{BookSnapshot, Depth, OrderId, Price, Qty, Side};
use marketgym_core::exchange::MarketMessage;
use marketgym_core::kernel::{self, Agent, AgentId, Context};
use marketgym_core::raw_state::{RawState, RawStateError, RawValue};
use marketgym_core::time::SimTime;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderCommand {
    PlaceMarket { side: Side, qty: Qty },
    PlaceLimit { side: Side, qty: Qty, price: Price },
    CancelAll,
    Noop,
}

/// What an environment injects between two interruptions.
pub type Commands = Vec<OrderCommand>;

#[derive(Clone, Debug, PartialEq)]
pub struct GymAgentConfig {
    pub exchange: AgentId,
    pub first_wakeup: SimTime,
    pub timestep: Duration,
    pub initial_cash: i64,
    /// Mids kept for the return features; at least `k + 1`.
    pub history_len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct OpenOrder {
    side: Side,
    submitted: Qty,
    /// Resting quantity; unknown until the exchange acknowledges.
    resting: Option<Qty>,
    /// Fills still to arrive for the part that matched on entry.
    entry_fills_owed: Qty,
}

pub struct GymAgent {
    cfg: GymAgentConfig,
    cash: i64,
    holdings: i64,
    next_order: u64,
    open_orders: BTreeMap<OrderId, OpenOrder>,
    fills: Vec<Fill>,
    book: Option<BookSnapshot>,
    mids: VecDeque<Option<f64>>,
    rejected: u64,
}

impl GymAgent {
    pub fn new(cfg: GymAgentConfig) -> Self {
        GymAgent {
            cash: cfg.initial_cash,
            holdings: 0,
            next_order: 0,
            open_orders: BTreeMap::new(),
            fills: Vec::new(),
            book: None,
            mids: VecDeque::with_capacity(cfg.history_len + 1),
            rejected: 0,
            cfg,
        }
    }

    fn mint(&mut self, owner: AgentId) -> OrderId {
        let id = OrderId::new(owner, self.next_order);
        self.next_order += 1;
        id
    }

    /// Turns commands into exchange messages, in command order. Commands
    /// with a zero quantity are dropped without a message.
    pub fn apply_commands(&mut self, owner: AgentId, commands: &[OrderCommand]) -> Vec<MarketMessage> {
        let mut out = Vec::new();
        for cmd in commands {
            match *cmd {
                OrderCommand::PlaceMarket { side, qty } => {
                    if qty == 0 {
                        self.rejected += 1;
                        continue;
                    }
                    let order_id = self.mint(owner);
                    out.push(MarketMessage::SubmitMarket { order_id, side, qty });
                }
                OrderCommand::PlaceLimit { side, qty, price } => {
                    if qty == 0 || price <= 0 {
                        self.rejected += 1;
                        continue;
                    }
                    let order_id = self.mint(owner);
                    self.open_orders.insert(
                        order_id,
                        OpenOrder {
                            side,
                            submitted: qty,
                            resting: None,
                            entry_fills_owed: 0,
                        },
                    );
                    out.push(MarketMessage::SubmitLimit { order_id, side, qty, price });
                }
                OrderCommand::CancelAll => {
                    out.extend(self.open_orders.keys().map(|&order_id| MarketMessage::Cancel { order_id }));
                }
                OrderCommand::Noop => {}
            }
        }
        out
    }

    fn on_fill(&mut self, order_id: OrderId, side: Side, price: Price, qty: Qty) {
        self.holdings += side.sign() * qty as i64;
        self.cash -= side.sign() * price * qty as i64;
        self.fills.push(Fill { price, qty, side });
        if let Some(o) = self.open_orders.get_mut(&order_id) {
            let from_entry = o.entry_fills_owed.min(qty);
            o.entry_fills_owed -= from_entry;
            if let Some(r) = o.resting.as_mut() {
                *r = r.saturating_sub(qty - from_entry);
            }
            if o.resting == Some(0) && o.entry_fills_owed == 0 {
                self.open_orders.remove(&order_id);
            }
        }
    }

    fn on_accepted(&mut self, order_id: OrderId, resting_qty: Qty) {
        if let Some(o) = self.open_orders.get_mut(&order_id) {
            o.resting = Some(resting_qty);
            o.entry_fills_owed = o.submitted.saturating_sub(resting_qty);
            if resting_qty == 0 && o.entry_fills_owed == 0 {
                self.open_orders.remove(&order_id);
            }
        }
    }

    pub fn snapshot(&self) -> MarketRawState {
        let book = self.book.clone().unwrap_or_default();
        MarketRawState {
            time: SimTime::ZERO,
            cash: self.cash,
            holdings: self.holdings,
            bids: book.bids,
            asks: book.asks,
            last_transaction: book.last_transaction,
            mid_history: self.mids.iter().copied().collect(),
            fills: self.fills.clone(),
            open_orders: self
                .open_orders
                .values()
                .map(|o| (o.side, o.resting.unwrap_or(0)))
                .collect(),
            has_market_data: self.book.is_some(),
            rejected_commands: self.rejected,
        }
    }
}

impl Agent<MarketMessage, Commands> for GymAgent {
    fn name(&self) -> &str {
        "gym"
    }

    fn kernel_starting(&mut self, ctx: &mut Context<'_, MarketMessage>) -> kernel::Result<()> {
        let exchange = self.cfg.exchange;
        ctx.send(
            exchange,
            MarketMessage::Subscribe {
                depth: Depth::All,
                min_interval_nanos: 0,
            },
        )?;
        ctx.schedule_wakeup(self.cfg.first_wakeup)
    }

    fn wakeup(&mut self, ctx: &mut Context<'_, MarketMessage>) -> kernel::Result<()> {
        self.mids.push_back(self.book.as_ref().and_then(BookSnapshot::mid));
        while self.mids.len() > self.cfg.history_len.max(1) {
            self.mids.pop_front();
        }
        ctx.schedule_wakeup(ctx.now() + self.cfg.timestep)?;
        let mut raw = self.snapshot();
        raw.time = ctx.now();
        self.fills.clear();
        ctx.interrupt(raw.to_raw());
        Ok(())
    }

    fn apply_action(&mut self, ctx: &mut Context<'_, MarketMessage>, commands: Commands) -> kernel::Result<()> {
        for msg in self.apply_commands(ctx.id(), &commands) {
            ctx.send(self.cfg.exchange, msg)?;
        }
        Ok(())
    }

    fn receive_message(
        &mut self,
        _ctx: &mut Context<'_, MarketMessage>,
        _sender: AgentId,
        body: MarketMessage,
    ) -> kernel::Result<()> {
        match body {
            MarketMessage::MarketData { snapshot, .. } | MarketMessage::SnapshotReply(snapshot) => {
                self.book = Some(snapshot);
            }
            MarketMessage::OrderAccepted { order_id, resting_qty } => self.on_accepted(order_id, resting_qty),
            MarketMessage::OrderFilled { order_id, side, price, qty } => self.on_fill(order_id, side, price, qty),
            MarketMessage::OrderCancelled { order_id, .. } => {
                self.open_orders.remove(&order_id);
            }
            MarketMessage::OrderRejected { order_id, reason } => {
                log::debug!("order {order_id:?} rejected: {reason:?}");
                self.open_orders.remove(&order_id);
                self.rejected += 1;
            }
            _ => {}
        }
        Ok(())
    }

    fn kernel_terminating(&mut self, ctx: &mut Context<'_, MarketMessage>) -> kernel::Result<()> {
        ctx.log(
            "GYM_FINAL",
            serde_json::json!({"cash": self.cash, "holdings": self.holdings, "open_orders": self.open_orders.len()}),
        );
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fill {
    pub price: Price,
    pub qty: Qty,
    pub side: Side,
}

/// Typed view of the raw state the gym agent emits. Field names in the
/// untyped form are a stable contract:
///
/// | key | value |
/// |---|---|
/// | `time` | nanoseconds since midnight |
/// | `cash` | cents |
/// | `holdings` | signed shares |
/// | `bids`, `asks` | `[[price, qty], ...]`, best first, all levels |
/// | `last_transaction` | cents, or null before the first trade |
/// | `mid_history` | one mid per wakeup, oldest first, null when one-sided |
/// | `fills` | `[[price, qty, +1/-1], ...]` since the previous wakeup |
/// | `open_orders` | `[[+1/-1, resting_qty], ...]` |
/// | `has_market_data` | false until the first book update arrives |
/// | `rejected_commands` | running count of commands refused |
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MarketRawState {
    pub time: SimTime,
    pub cash: i64,
    pub holdings: i64,
    pub bids: Vec<(Price, Qty)>,
    pub asks: Vec<(Price, Qty)>,
    pub last_transaction: Option<Price>,
    pub mid_history: Vec<Option<f64>>,
    pub fills: Vec<Fill>,
    pub open_orders: Vec<(Side, Qty)>,
    pub has_market_data: bool,
    pub rejected_commands: u64,
}

fn levels(v: &[(Price, Qty)]) -> RawValue {
    RawValue::List(
        v.iter()
            .map(|&(p, q)| RawValue::List(vec![p.into(), (q as i64).into()]))
            .collect(),
    )
}

fn bad(field: &str, expected: &'static str) -> RawStateError {
    RawStateError::WrongType {
        field: field.to_owned(),
        expected,
    }
}

fn int_tuple<const N: usize>(v: &RawValue, field: &str) -> Result<[i64; N], RawStateError> {
    let items = v.as_list().ok_or_else(|| bad(field, "a list of integer tuples"))?;
    if items.len() != N {
        return Err(bad(field, "a list of integer tuples"));
    }
    let mut out = [0; N];
    for (slot, item) in out.iter_mut().zip(items) {
        *slot = item.as_int().ok_or_else(|| bad(field, "a list of integer tuples"))?;
    }
    Ok(out)
}

fn side_of(sign: i64, field: &str) -> Result<Side, RawStateError> {
    match sign {
        1 => Ok(Side::Buy),
        -1 => Ok(Side::Sell),
        _ => Err(bad(field, "signed with +1 or -1")),
    }
}

fn qty_of(v: i64, field: &str) -> Result<Qty, RawStateError> {
    Qty::try_from(v).map_err(|_| bad(field, "a non-negative quantity"))
}

fn read_levels(raw: &RawState, field: &str) -> Result<Vec<(Price, Qty)>, RawStateError> {
    raw.list(field)?
        .iter()
        .map(|v| {
            let [p, q] = int_tuple::<2>(v, field)?;
            Ok((p, qty_of(q, field)?))
        })
        .collect()
}

impl MarketRawState {
    pub fn to_raw(&self) -> RawState {
        let mut raw = RawState::new();
        raw.insert("time", self.time.nanos() as i64)
            .insert("cash", self.cash)
            .insert("holdings", self.holdings)
            .insert("bids", levels(&self.bids))
            .insert("asks", levels(&self.asks))
            .insert("last_transaction", self.last_transaction)
            .insert("mid_history", self.mid_history.clone())
            .insert(
                "fills",
                RawValue::List(
                    self.fills
                        .iter()
                        .map(|f| RawValue::List(vec![f.price.into(), (f.qty as i64).into(), f.side.sign().into()]))
                        .collect(),
                ),
            )
            .insert(
                "open_orders",
                RawValue::List(
                    self.open_orders
                        .iter()
                        .map(|&(s, q)| RawValue::List(vec![s.sign().into(), (q as i64).into()]))
                        .collect(),
                ),
            )
            .insert("has_market_data", self.has_market_data)
            .insert("rejected_commands", self.rejected_commands as i64);
        raw
    }

    pub fn from_raw(raw: &RawState) -> Result<Self, RawStateError> {
        let time = u64::try_from(raw.int("time")?).map_err(|_| bad("time", "non-negative"))?;
        let mid_history = raw
            .list("mid_history")?
            .iter()
            .map(|v| match v {
                RawValue::Absent => Ok(None),
                v => v.as_float().map(Some).ok_or_else(|| bad("mid_history", "numbers or null")),
            })
            .collect::<Result<_, _>>()?;
        let fills = raw
            .list("fills")?
            .iter()
            .map(|v| {
                let [price, qty, sign] = int_tuple::<3>(v, "fills")?;
                Ok(Fill {
                    price,
                    qty: qty_of(qty, "fills")?,
                    side: side_of(sign, "fills")?,
                })
            })
            .collect::<Result<_, RawStateError>>()?;
        let open_orders = raw
            .list("open_orders")?
            .iter()
            .map(|v| {
                let [sign, qty] = int_tuple::<2>(v, "open_orders")?;
                Ok((side_of(sign, "open_orders")?, qty_of(qty, "open_orders")?))
            })
            .collect::<Result<_, RawStateError>>()?;
        Ok(MarketRawState {
            time: SimTime::from_nanos(time),
            cash: raw.int("cash")?,
            holdings: raw.int("holdings")?,
            bids: read_levels(raw, "bids")?,
            asks: read_levels(raw, "asks")?,
            last_transaction: raw.opt_int("last_transaction")?,
            mid_history,
            fills,
            open_orders,
            has_market_data: raw.bool("has_market_data")?,
            rejected_commands: qty_of(raw.int("rejected_commands")?, "rejected_commands")?,
        })
    }

    pub fn best_bid(&self) -> Option<Price> {
        self.bids.first().map(|l| l.0)
    }

    pub fn best_ask(&self) -> Option<Price> {
        self.asks.first().map(|l| l.0)
    }

    pub fn mid(&self) -> Option<f64> {
        Some((self.best_bid()? + self.best_ask()?) as f64 / 2.0)
    }

    pub fn spread(&self) -> Option<Price> {
        Some(self.best_ask()? - self.best_bid()?)
    }

    /// Cash plus holdings valued at the last trade, zero when nothing has
    /// traded yet.
    pub fn marked_to_market(&self) -> i64 {
        self.cash + self.holdings * self.last_transaction.unwrap_or(0)
    }
}
